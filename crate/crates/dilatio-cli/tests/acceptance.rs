//! Acceptance report: one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dilatio::coherent::{chow_connect, coherent_identities, CandidateTangent, ChowConfig};
use dilatio::dilation::{
    derivative_and_rnp_scan, pplay_residuals, DilationStructure, TangentModel,
};
use dilatio::gh::{bar_generalize, gh_exact_small, relation_stats, Relation, GH_EXACT_CAP};
use dilatio::length::{cc_distance, horizontal_polyline, tempered_check};
use dilatio::metric::FnCurve;
use dilatio::profiles::{curvdim_estimate, sample_profile, sectional_curvature, FLAT_TOLERANCE};
use dilatio::scalar::max_abs_diff;
use dilatio::spaces::{CarnotSpace, Euclidean, ExpSpace, NonstandardPlane, Snowflake, SpaceSpec};
use dilatio::{
    CarnotGroup, CcConfig, CoherentProjection, FiniteMetricSpace, HorizontalControlCurve,
    LimitConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn cube(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-r..r)).collect()
}

fn within(t: Duration, limit: f64) -> bool {
    t.as_secs_f64() < limit
}

fn identities() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let spaces: Vec<(Box<dyn DilationStructure<f64>>, usize, f64)> = vec![
        (Box::new(Euclidean::<f64>::new(2)), 2, 1.0),
        (
            Box::new(Snowflake::new(Euclidean::<f64>::new(2), 0.5).unwrap()),
            2,
            1.0,
        ),
        (Box::new(NonstandardPlane::new(1.0)), 2, 1.0),
        (Box::new(CarnotSpace::heisenberg()), 3, 1.0),
        (Box::new(ExpSpace::sphere()), 2, 0.25),
    ];
    let mut worst = Vec::new();
    let mut errors = 0;
    for (s, n, r) in &spaces {
        let mut w = 0.0f64;
        for _ in 0..1000 {
            let p = cube(&mut rng, 4 * n, *r);
            let e = rng.gen_range(0.1..1.0);
            let (x, u, v, z) = (&p[..*n], &p[*n..2 * n], &p[2 * n..3 * n], &p[3 * n..]);
            match pplay_residuals(s.as_ref(), x, e, u, v, z) {
                Ok(res) => w = res.into_iter().fold(w, f64::max),
                Err(_) => errors += 1,
            }
        }
        worst.push((s.name(), w));
    }
    let t = start.elapsed();
    let pass = errors == 0 && worst.iter().all(|(_, w)| *w < 1e-12) && within(t, 10.0);
    let list: Vec<String> = worst.iter().map(|(n, w)| format!("{n} {w:.1e}")).collect();
    verdict(
        pass,
        format!(
            "worst residual: {}; errors {errors}; {:.2}s",
            list.join(", "),
            t.as_secs_f64()
        ),
    )
}

fn cloud(rng: &mut ChaCha8Rng, n: usize) -> FiniteMetricSpace {
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
        .collect();
    FiniteMetricSpace::from_points(&pts)
}

fn gh_calculus() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut held = [0usize; 7];
    let labels = [
        "(a)",
        "(b)",
        "(c) lower",
        "(c) upper",
        "(d) lower",
        "(d) upper",
        "(e)",
    ];
    let trials = 200;
    for _ in 0..trials {
        let x = cloud(&mut rng, 5);
        let y = cloud(&mut rng, 5);
        let f: Vec<usize> = (0..5).map(|_| rng.gen_range(0..5)).collect();
        let g: Vec<usize> = (0..5).map(|_| rng.gen_range(0..5)).collect();
        let rho = Relation::from_pairs(
            f.iter()
                .enumerate()
                .map(|(i, &j)| (i, j))
                .chain(g.iter().enumerate().map(|(j, &i)| (i, j))),
        );
        let eps = rng.gen_range(0.0..0.2);
        let mu = rng.gen_range(0.0..0.2);
        let s = relation_stats(&x, &y, &rho).unwrap();
        let bar = bar_generalize(&x, &y, &rho, eps, mu).unwrap();
        let b = relation_stats(&x, &y, &bar).unwrap();
        let tol = 1e-12;
        let up = s.accuracy + 2.0 * (eps + mu) + tol;
        let checks = [
            s.resolution <= s.accuracy + tol,
            s.precision <= s.accuracy + tol,
            s.resolution + 2.0 * eps <= b.resolution + tol,
            b.resolution <= up,
            s.precision + 2.0 * mu <= b.precision + tol,
            b.precision <= up,
            (b.accuracy - s.accuracy).abs() <= 2.0 * (eps + mu) + tol,
        ];
        for (h, ok) in held.iter_mut().zip(checks) {
            *h += ok as usize;
        }
    }
    let mut sym = 0.0f64;
    let mut tri = 0.0f64;
    for _ in 0..50 {
        let mut small = || {
            let n = rng.gen_range(1..=3);
            cloud(&mut rng, n)
        };
        let (a, b, c) = (small(), small(), small());
        let d = |p: &FiniteMetricSpace, q: &FiniteMetricSpace| {
            gh_exact_small(p, q, GH_EXACT_CAP).unwrap().value
        };
        let (ab, ba, bc, ac) = (d(&a, &b), d(&b, &a), d(&b, &c), d(&a, &c));
        sym = sym.max((ab - ba).abs());
        tri = tri.max(ac - ab - bc);
    }
    let t = start.elapsed();
    let props_ok = held.iter().all(|&h| h == trials);
    let pass = props_ok && sym <= 1e-9 && tri <= 1e-9 && within(t, 30.0);
    let counts: Vec<String> = labels
        .iter()
        .zip(held)
        .map(|(l, h)| format!("{l} {h}/{trials}"))
        .collect();
    verdict(
        pass,
        format!(
            "{}; gh asymmetry {sym:.1e}, triangle excess {:.1e}; {:.2}s",
            counts.join(", "),
            tri.max(0.0),
            t.as_secs_f64()
        ),
    )
}

fn conical() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let handles = [
        "carnot heisenberg",
        "carnot engel",
        "carnot free23",
        "snowflake(euclidean 2, 1/2)",
        "snowflake(euclidean 3, 0.3)",
    ];
    let grid: Vec<f64> = (0..=4).map(|k| 0.5f64.powi(k)).collect();
    let eps = [0.4, 0.2, 0.1, 0.05];
    let mut worst = 0.0f64;
    let mut flags_ok = true;
    let mut max_profile = 0.0f64;
    for h in handles {
        let s = h.parse::<SpaceSpec>().unwrap().build::<f64>().unwrap();
        let n = s.dim();
        for _ in 0..100 {
            let x = cube(&mut rng, n, 1.0);
            let u = cube(&mut rng, n, 1.0);
            let v = cube(&mut rng, n, 1.0);
            let d0 = s.dist(&u, &v);
            for &e in &grid {
                let a = s.dil(&x, e, &u).unwrap();
                let b = s.dil(&x, e, &v).unwrap();
                worst = worst.max((s.dist(&a, &b) / e - d0).abs());
            }
        }
        let x = cube(&mut rng, n, 0.5);
        let p = sample_profile(s.as_ref(), &x, 8, &eps, 7).unwrap();
        let dist = p.distortions();
        max_profile = dist.iter().copied().fold(max_profile, f64::max);
        let est = curvdim_estimate(&p).unwrap();
        if dist.iter().all(|&d| d < FLAT_TOLERANCE) && !est.flat {
            flags_ok = false;
        }
    }
    let flat_all = max_profile < FLAT_TOLERANCE;
    verdict(
        worst < 1e-12 && flags_ok && flat_all,
        format!(
            "max |ε⁻¹d(δu,δv) − d(u,v)| = {worst:.1e} on {} handles; max profile distortion {max_profile:.1e}, flat flags {}",
            handles.len(),
            if flags_ok { "set" } else { "missing" }
        ),
    )
}

fn tangent_group() -> Verdict {
    let h = CarnotSpace::heisenberg();
    let g = &h.group;
    let cfg = LimitConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut sum_err = 0.0f64;
    let mut trans_err = 0.0f64;
    let mut failures = 0;
    for _ in 0..200 {
        let x = cube(&mut rng, 3, 0.5);
        let u = cube(&mut rng, 3, 0.8);
        let v = cube(&mut rng, 3, 0.8);
        let w = cube(&mut rng, 3, 0.8);
        let m = TangentModel::new(&h, x.clone(), cfg.clone());
        let want = g.multiply(
            &g.multiply(&x, &g.left_quotient(&x, &u)),
            &g.left_quotient(&x, &v),
        );
        let run = || -> dilatio::Result<(f64, f64)> {
            let s = m.sum(&u, &v)?;
            let d = m.dist(&u, &v)?;
            let dt = m.dist(&m.sum(&w, &u)?, &m.sum(&w, &v)?)?;
            Ok((max_abs_diff(&s, &want), (dt - d).abs()))
        };
        match run() {
            Ok((a, b)) => {
                sum_err = sum_err.max(a);
                trans_err = trans_err.max(b);
            }
            Err(_) => failures += 1,
        }
    }
    verdict(
        failures == 0 && sum_err < 1e-6 && trans_err < 1e-5,
        format!("Σ^x error {sum_err:.1e}, left translation error {trans_err:.1e}, {failures} failed limits on 200 triples"),
    )
}

fn curvature() -> Verdict {
    let start = Instant::now();
    let s = ExpSpace::sphere();
    let p = sample_profile(&s, &[0.0, 0.0], 12, &[0.4, 0.2, 0.1, 0.05], 0).unwrap();
    let est = curvdim_estimate(&p).unwrap();
    let k = sectional_curvature(&s.chart, &p, &est).ok();
    let slope = est.slope.unwrap_or(f64::NAN);
    let t = start.elapsed();
    let pass = !est.flat
        && (1.8..=2.2).contains(&slope)
        && k.is_some_and(|k| (k - 1.0).abs() <= 0.1)
        && within(t, 60.0);
    verdict(
        pass,
        format!(
            "slope {slope:.4}, K {}, r² {:.7}; {:.2}s",
            k.map_or("none".into(), |k| format!("{k:.4}")),
            est.r2.unwrap_or(f64::NAN),
            t.as_secs_f64()
        ),
    )
}

fn rnp() -> Verdict {
    let cfg = LimitConfig::default();
    let ts: Vec<f64> = (0..5).map(|k| 0.1 + 0.15 * k as f64).collect();
    let line = FnCurve::new(0.0, 1.0, |t: f64| vec![t, 0.0]);
    let e = derivative_and_rnp_scan(&Euclidean::<f64>::new(2), &line, &ts, &cfg, 1e-6).unwrap();
    let n = derivative_and_rnp_scan(&NonstandardPlane::new(1.0), &line, &ts, &cfg, 1e-6).unwrap();
    let spread = n
        .samples
        .iter()
        .map(|s| s.spread)
        .fold(f64::INFINITY, f64::min);
    let non_cauchy = n.samples.iter().all(|s| !s.cauchy_ok);
    verdict(
        e.derivable_fraction == 1.0 && n.derivable_fraction == 0.0 && non_cauchy && spread > 0.5,
        format!(
            "euclidean fraction {}, nonstandard fraction {} (min spread {spread:.3}, all non-Cauchy: {non_cauchy})",
            e.derivable_fraction, n.derivable_fraction
        ),
    )
}

fn cc() -> Verdict {
    let start = Instant::now();
    let g = CarnotGroup::heisenberg();
    let cfg = CcConfig::default();
    let o = [0.0; 3];
    let a = cc_distance(&g, &o, &[1.0, 0.0, 0.0], &cfg).unwrap();
    let b = cc_distance(&g, &o, &[0.0, 0.0, 1.0], &cfg).unwrap();
    let want = 2.0 * PI.sqrt();
    let t = start.elapsed();
    let ra = (a.value - 1.0).abs();
    let rb = (b.value - want).abs() / want;
    let pass = ra <= 0.01
        && rb <= 0.02
        && a.endpoint_error < 1e-8
        && b.endpoint_error < 1e-8
        && within(t, 120.0);
    verdict(
        pass,
        format!(
            "d(0,e1) = {:.6} (rel {ra:.1e}), d(0,e3) = {:.6} vs {want:.6} (rel {rb:.1e}), endpoint errors {:.1e}/{:.1e}; {:.2}s",
            a.value,
            b.value,
            a.endpoint_error,
            b.endpoint_error,
            t.as_secs_f64()
        ),
    )
}

fn chow() -> Verdict {
    let p = CoherentProjection::heisenberg();
    let g = CarnotGroup::heisenberg();
    let cfg = ChowConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let x = [0.0; 3];
    let (lo, mid, hi) = (-3.2f64, -2.2f64, -1.2f64);
    let mut c = [0.0f64; 2];
    let mut count = [0usize; 2];
    let mut worst = 0.0f64;
    let mut failed = 0;
    let mut letters_ok = true;
    let mut made = 0;
    while made < 100 {
        let dir = cube(&mut rng, 3, 1.0);
        let r = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(r > 1e-3 && r <= 1.0) {
            continue;
        }
        let size = 10f64.powf(rng.gen_range(lo..hi));
        let z: Vec<f64> = dir.iter().map(|v| v / r * size).collect();
        if g.gauge_norm(&z) > 0.5 {
            continue;
        }
        made += 1;
        match chow_connect(&p, &x, &z, 1.0, &cfg) {
            Ok(s) => {
                worst = worst.max(s.endpoint_error);
                letters_ok &= s.n_used <= 4;
                let k = usize::from(s.eta.log10() >= mid);
                c[k] = c[k].max(s.f_ratio);
                count[k] += 1;
            }
            Err(_) => failed += 1,
        }
    }
    let stable = c[0] > 0.0 && c[1] > 0.0 && (c[0] / c[1] - 1.0).abs() <= 0.2;
    verdict(
        failed == 0 && letters_ok && worst < 1e-6 && stable,
        format!(
            "{failed} failures, worst endpoint error {worst:.1e}; C = {:.3} ({} targets, η < 10^{mid}) and {:.3} ({} targets)",
            c[0], count[0], c[1], count[1]
        ),
    )
}

fn coherent() -> Verdict {
    let p = CoherentProjection::heisenberg();
    let g = CarnotGroup::heisenberg();
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let triples: Vec<_> = (0..20)
        .map(|_| {
            (
                cube(&mut rng, 3, 0.5),
                cube(&mut rng, 3, 0.5),
                cube(&mut rng, 3, 0.5),
            )
        })
        .collect();
    let r =
        coherent_identities(&p, &triples, &[1.0, 0.7, 0.4, 0.1], &LimitConfig::default()).unwrap();
    let mut theta = 0.0f64;
    for _ in 0..200 {
        let (x, u, v) = (
            cube(&mut rng, 3, 1.0),
            cube(&mut rng, 3, 1.0),
            cube(&mut rng, 3, 1.0),
        );
        let e = rng.gen_range(0.1..1.0);
        theta = theta.max(p.theta_identity_residual(&x, e, &u, &v).unwrap());
    }
    let mut gap = 0.0f64;
    let mut homog = 0.0f64;
    let mut errors = 0;
    for _ in 0..10 {
        let x = cube(&mut rng, 3, 0.3);
        let ct = CandidateTangent::new(&p, x.clone(), LimitConfig::dyadic(1, 5));
        let cells = rng.gen_range(1..=3);
        let controls: Vec<Vec<f64>> = (0..cells).map(|_| cube(&mut rng, 2, 0.3)).collect();
        let start = g.multiply(
            &x,
            &[rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), 0.0],
        );
        let hc = HorizontalControlCurve::new(start, controls).unwrap();
        let poly = horizontal_polyline(&g, &hc, 2).unwrap();
        let run = || -> dilatio::Result<(f64, f64)> {
            let l = ct.length(&poly, 2)?;
            let (l_mu, mu_l) = ct.homogeneity(&poly, 0.5)?;
            Ok((l.gap, (l_mu - mu_l).abs() / mu_l))
        };
        match run() {
            Ok((a, b)) => {
                gap = gap.max(a);
                homog = homog.max(b);
            }
            Err(_) => errors += 1,
        }
    }
    let exact = r.exact_worst().max(theta);
    verdict(
        exact < 1e-12 && r.limit_worst() < 1e-6 && errors == 0 && gap < 1e-6 && homog < 1e-10,
        format!(
            "exact {exact:.1e}, limits {:.1e}, length gap {gap:.1e}, homogeneity {homog:.1e} (relative), {errors} errors",
            r.limit_worst()
        ),
    )
}

fn tempered() -> Verdict {
    let cfg = LimitConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let pairs: Vec<_> = (0..8)
        .map(|_| (cube(&mut rng, 2, 1.0), cube(&mut rng, 2, 1.0)))
        .collect();
    let e = Euclidean::<f64>::new(2);
    let a = tempered_check(&e, &e, &[0.1, 0.2], &pairs, &cfg).unwrap();
    let h = CarnotSpace::heisenberg();
    let flat = Euclidean::<f64>::new(3);
    let vertical = vec![
        (vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]),
        (vec![0.1, 0.2, 0.0], vec![0.1, 0.2, 0.5]),
        (vec![0.0, 0.0, -0.3], vec![0.0, 0.0, 0.2]),
    ];
    let b = tempered_check(&h, &flat, &[0.0; 3], &vertical, &cfg).unwrap();
    let unit = (a.c_low - 1.0).abs() <= 1e-9 && (a.c_high - 1.0).abs() <= 1e-9;
    verdict(
        a.pass && unit && !b.pass && b.slope_high <= -0.4,
        format!(
            "euclidean c = {:.12}, C = {:.12}; heisenberg/flat slope {:.3}, verdict {}",
            a.c_low,
            a.c_high,
            b.slope_high,
            if b.pass { "pass" } else { "fail" }
        ),
    )
}

const SUITE: &str = "\
seed = 11

[axioms]
op = validate-axioms
space = carnot heisenberg
samples = 3

[tangent]
op = tangent
space = snowflake(euclidean 2, 0.5)

[gh]
op = gh
src = 0,0; 1,0; 0,1
dst = 0,0; 2,0

[profile]
op = profile
space = sphere

[curvdim]
op = curvdim
space = sphere

[cc]
op = cc-distance
to = 0.3, -0.2, 0.4
cells = 8, 16

[chow]
op = chow
target = 0.01, -0.02, 0.005

[tempered]
op = tempered
space = euclidean 2
pairs = 4

[gamma]
op = gamma
space = sphere
curve = 0.1, 0; 0.1, 0.1; 0, 0.2
";

fn bundle(dir: &Path, jobs: &str) -> Vec<(String, Vec<u8>)> {
    let cfg = dir.join("suite.cfg");
    fs::write(&cfg, SUITE).unwrap();
    let out = dir.join(format!("out-{jobs}"));
    let status = Command::new(env!("CARGO_BIN_EXE_dilatio"))
        .args([
            "report",
            "--config",
            cfg.to_str().unwrap(),
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap()
        .status;
    assert!(status.code().is_some_and(|c| c < 2));
    let mut files: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let a = bundle(dir.path(), "1");
    let b = bundle(dir.path(), "4");
    let c = bundle(dir.path(), "1");
    let same = a == b && a == c;
    let bytes: usize = a.iter().map(|(_, f)| f.len()).sum();
    verdict(
        same && a.len() > 9,
        format!(
            "{} files, {bytes} bytes, identical over 3 runs: {same}",
            a.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("approximate-operation identities", identities),
        ("GH calculus", gh_calculus),
        ("conical exactness", conical),
        ("tangent group", tangent_group),
        ("curvature recovery", curvature),
        ("RNP dichotomy", rnp),
        ("CC distance", cc),
        ("Chow connectivity", chow),
        ("coherent projections", coherent),
        ("tempered dichotomy", tempered),
        ("determinism", determinism),
    ];
    let mut passed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let v = run();
        passed += v.pass as usize;
        println!(
            "{} {:>2} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
    }
    println!("{passed}/{} criteria passed", criteria.len());
}
