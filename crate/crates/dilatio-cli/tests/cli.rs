use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dilatio_cli::config::{parse_config, Span};
use dilatio_cli::ops::plan;
use dilatio_cli::{run_suite, Op};

fn dilatio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dilatio"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

const SUITE: &str = "\
seed = 5

[flat]
op = validate-axioms
space = euclidean 2
samples = 3

[pair]
op = gh
src = 0,0; 1,0; 0,1
dst = 0,0; 2,0
expect = 1

[ball]
op = profile
space = sphere
n = 6

[lift]
op = tempered
space = carnot heisenberg
background = euclidean 3
pairs = 0,0,0.1 > 0,0,0.3; 0,0,-0.2 > 0,0,0.05
expect = fail
";

#[test]
fn text_config_parses() {
    let s = parse_config(SUITE).unwrap();
    assert_eq!(s.seed, 5);
    let ops: Vec<Op> = s.experiments.iter().map(|e| e.op).collect();
    assert_eq!(ops, [Op::ValidateAxioms, Op::Gh, Op::Profile, Op::Tempered]);
    assert_eq!(s.experiments[1].params["dst"].value, "0,0; 2,0");
    assert_eq!(
        s.experiments[0].params["space"].span,
        Some(Span { line: 5, column: 9 })
    );
}

#[test]
fn json_config_matches_text() {
    let json = r#"{
  "seed": 5,
  "experiments": [
    {"name": "pair", "op": "gh", "src": [[0,0],[1,0],[0,1]], "dst": "0,0; 2,0", "expect": 1}
  ]
}"#;
    let s = parse_config(json).unwrap();
    let t = parse_config(SUITE).unwrap();
    assert_eq!(s.experiments[0].params["src"].value, "0, 0; 1, 0; 0, 1");
    let a = run_suite(&s, None).unwrap();
    let b = run_suite(
        &dilatio_cli::SuiteConfig {
            seed: 5,
            experiments: vec![t.experiments[1].clone()],
        },
        None,
    )
    .unwrap();
    assert_eq!(a.experiments[0].result, b.experiments[0].result);
    assert!(a.pass);
}

#[test]
fn parse_errors_carry_positions() {
    let e = parse_config("seed = 1\n[a]\nop = curvdim\nspace sphere\n").unwrap_err();
    assert_eq!(e.span, Some(Span { line: 4, column: 1 }));

    let e = parse_config("[a]\nop = curvdim\n  n = 4\n  n = 5\n").unwrap_err();
    assert_eq!(e.span, Some(Span { line: 4, column: 3 }));
    assert!(e.message.contains("duplicate"));

    let e = parse_config("seed = x\n").unwrap_err();
    assert_eq!(e.span, Some(Span { line: 1, column: 8 }));

    let e = parse_config("{\"seed\": 1,\n \"experiments\": [\n}").unwrap_err();
    assert_eq!(e.span.map(|s| s.line), Some(3));

    let e = parse_config("[a]\nspace = sphere\n").unwrap_err();
    assert!(e.message.contains("no `op`"));
}

#[test]
fn unknown_names_get_suggestions() {
    let e = parse_config("[a]\nop = curvdm\n").unwrap_err();
    assert!(
        e.message.contains("did you mean `curvdim`"),
        "{}",
        e.message
    );
    assert_eq!(e.span, Some(Span { line: 2, column: 6 }));

    let s = parse_config("[a]\nop = profile\nspace = sphere\nsampels = 4\n").unwrap();
    let e = plan(&s.experiments[0]).unwrap_err();
    assert!(
        e.message.contains("did you mean `samples`") || e.message.contains("known:"),
        "{}",
        e.message
    );
    assert_eq!(
        e.span,
        Some(Span {
            line: 4,
            column: 11
        })
    );

    let e = parse_config("sed = 3\n").unwrap_err();
    assert!(e.message.contains("did you mean `seed`"));
}

#[test]
fn plan_rejects_bad_values() {
    let cases = [
        "[a]\nop = profile\nspace = euclidian 2\n",
        "[a]\nop = profile\nspace = euclidean 2\nbase = 1, 2, 3\n",
        "[a]\nop = profile\nspace = euclidean 2\neps = 0.4, 2\n",
        "[a]\nop = cc-distance\n",
        "[a]\nop = cc-distance\nspace = euclidean 3\nto = 0,0,1\n",
        "[a]\nop = tempered\nspace = euclidean 2\nexpect = maybe\n",
        "[a]\nop = gamma\nspace = sphere\ncurve = 0,0\n",
        "[a]\nop = tangent\nspace = sphere\ngrid = 4, 2\n",
        "[a]\nop = profile\nspace = sphere\nseed = -1\n",
    ];
    for c in cases {
        let s = parse_config(c).unwrap();
        assert!(plan(&s.experiments[0]).is_err(), "{c}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(
        dir.path(),
        "good.cfg",
        "[a]\nop = gh\nsrc = 0; 1\ndst = 0; 3\nexpect = 2\n",
    );
    let bad_check = write(
        dir.path(),
        "fail.cfg",
        "[a]\nop = gh\nsrc = 0; 1\ndst = 0; 3\nexpect = 1\n",
    );
    let bad_cfg = write(dir.path(), "bad.cfg", "[a]\nop = gh\nsrc = 0; 1\n");
    assert_eq!(
        dilatio(&["report", "--config", &good]).status.code(),
        Some(0)
    );
    assert_eq!(
        dilatio(&["report", "--config", &bad_check]).status.code(),
        Some(1)
    );
    let out = dilatio(&["report", "--config", &bad_cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.cfg:") && err.contains("`dst`"), "{err}");
    assert_eq!(dilatio(&["report"]).status.code(), Some(2));
    assert_eq!(
        dilatio(&["curvdim", "--space", "spher"]).status.code(),
        Some(2)
    );
    assert_eq!(dilatio(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn sphere_curvdim_default_passes() {
    let out = dilatio(&["curvdim", "--space", "sphere"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let r = &v["experiments"][0]["result"];
    let k = r["sectional_curvature"].as_f64().unwrap();
    let slope = r["estimate"]["slope"].as_f64().unwrap();
    assert!((k - 1.0).abs() < 0.1);
    assert!((1.8..=2.2).contains(&slope));
}

#[test]
fn empty_config_gives_empty_passing_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.cfg", "# nothing here\n");
    let out = dir.path().join("out");
    let o = dilatio(&["report", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let files = read_dir(&out);
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["rollup.csv", "summary.json"]);
    let v: serde_json::Value = serde_json::from_slice(&files[1].1).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["experiments"].as_array().unwrap().len(), 0);
    assert_eq!(files[0].1, b"name,op,seed,pass,error\n");
}

#[test]
fn euclidean_axioms_bundle_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let o = dilatio(&[
        "validate-axioms",
        "--space",
        "euclidean 2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.starts_with("PASS validate-axioms"), "{stdout}");
    let csv = fs::read_to_string(out.join("validate-axioms.csv")).unwrap();
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("axiom,sample,pass,max_residual"));
    assert!(rows.all(|r| r.split(',').nth(2) == Some("1")));
}

#[test]
fn bundles_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "suite.cfg", SUITE);
    let mut bundles = Vec::new();
    for (k, jobs) in ["1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("out{k}"));
        let o = dilatio(&[
            "report",
            "--config",
            &cfg,
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stdout)
        );
        bundles.push(read_dir(&out));
    }
    assert_eq!(bundles[0], bundles[1]);
    assert!(bundles[0].iter().any(|(n, _)| n == "ball.csv"));
}

#[test]
fn op_subcommand_filters_config_and_applies_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "suite.cfg", SUITE);
    let o = dilatio(&["gh", "--config", &cfg, "--set", "expect=1.5"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["experiments"].as_array().unwrap().len(), 1);
    assert_eq!(v["experiments"][0]["name"], "pair");
    assert_eq!(dilatio(&["chow", "--config", &cfg]).status.code(), Some(2));

    let o = dilatio(&[
        "profile", "--config", &cfg, "--seed", "9", "--format", "csv",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        String::from_utf8_lossy(&o.stdout),
        "name,op,seed,pass,error\nball,profile,9,1,\n"
    );
}

#[test]
fn gh_reads_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dilatio::FiniteMetricSpace::from_points(&[vec![0.0], vec![1.0]]);
    let src = write(dir.path(), "a.csv", &a.to_csv());
    let dst = write(dir.path(), "b.json", &a.to_json());
    let cfg = write(
        dir.path(),
        "g.cfg",
        &format!(
            "[g]\nop = gh\nsrc = {src}\ndst = {dst}\nexpect = 0\nsrc_point = p0\ndst_point = p1\n"
        ),
    );
    let o = dilatio(&["report", "--config", &cfg]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let missing = write(
        dir.path(),
        "m.cfg",
        "[g]\nop = gh\nsrc = nowhere.csv\ndst = 0; 1\n",
    );
    let o = dilatio(&["report", "--config", &missing]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn positional_space_and_alias() {
    let o = dilatio(&["verify-axioms", "euclidean", "2", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        String::from_utf8_lossy(&o.stdout),
        "name,op,seed,pass,error\nvalidate-axioms,validate-axioms,0,1,\n"
    );
    let o = dilatio(&["curvdim", "sphere", "--space", "sphere"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = write(dir.path(), "file", "");
    let out = format!("{blocker}/sub");
    let o = dilatio(&["profile", "sphere", "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
}
