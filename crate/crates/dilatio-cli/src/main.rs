use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dilatio_cli::config::{ExperimentConfig, Param};
use dilatio_cli::{
    emit_report, exit, parse_config, run_suite, ConfigError, Format, Op, SuiteConfig,
};

/// Experiments on metric spaces with dilations.
#[derive(Parser)]
#[command(name = "dilatio", version)]
struct Cli {
    /// Suite configuration (key/value text or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the suite seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for the report bundle; without it the summary goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, default_value = "both")]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every experiment of `--config`.
    Report,
    #[command(alias = "verify-axioms")]
    ValidateAxioms(OpArgs),
    Tangent(OpArgs),
    Gh(OpArgs),
    Profile(OpArgs),
    Curvdim(OpArgs),
    CcDistance(OpArgs),
    Chow(OpArgs),
    Tempered(OpArgs),
    Gamma(OpArgs),
}

#[derive(Args)]
struct OpArgs {
    /// Space handle, e.g. `euclidean 2` or `carnot heisenberg`.
    #[arg(long, conflicts_with = "words")]
    space: Option<String>,
    /// The space handle may also follow the subcommand: `curvdim sphere`.
    #[arg(value_name = "SPACE")]
    words: Vec<String>,
    /// Parameter override `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Experiment name, used for file names in the bundle.
    #[arg(long)]
    name: Option<String>,
}

enum Failure {
    Config(String),
    /// Unwritable output; reported as a configuration error.
    Io(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load(path: &Path) -> Result<SuiteConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| Failure::Config(format!("{}:{e}", path.display())))
}

fn overrides(args: &OpArgs) -> Result<Vec<(String, String)>, Failure> {
    let mut out = Vec::new();
    if let Some(s) = &args.space {
        out.push(("space".to_string(), s.clone()));
    } else if !args.words.is_empty() {
        out.push(("space".to_string(), args.words.join(" ")));
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn suite_for(cli: &Cli) -> Result<SuiteConfig, Failure> {
    let (op, args) = match &cli.cmd {
        Cmd::Report => {
            let path = cli
                .config
                .as_deref()
                .ok_or_else(|| Failure::Config("`report` needs --config".into()))?;
            return load(path);
        }
        Cmd::ValidateAxioms(a) => (Op::ValidateAxioms, a),
        Cmd::Tangent(a) => (Op::Tangent, a),
        Cmd::Gh(a) => (Op::Gh, a),
        Cmd::Profile(a) => (Op::Profile, a),
        Cmd::Curvdim(a) => (Op::Curvdim, a),
        Cmd::CcDistance(a) => (Op::CcDistance, a),
        Cmd::Chow(a) => (Op::Chow, a),
        Cmd::Tempered(a) => (Op::Tempered, a),
        Cmd::Gamma(a) => (Op::Gamma, a),
    };
    let extra = overrides(args)?;
    let mut suite = match &cli.config {
        Some(path) => {
            let mut s = load(path)?;
            s.experiments.retain(|e| e.op == op);
            if let Some(name) = &args.name {
                s.experiments.retain(|e| &e.name == name);
            }
            if s.experiments.is_empty() {
                return Err(Failure::Config(format!(
                    "{}: no `{op}` experiment to run",
                    path.display()
                )));
            }
            s
        }
        None => SuiteConfig {
            seed: 0,
            experiments: vec![ExperimentConfig {
                name: args.name.clone().unwrap_or_else(|| op.name().to_string()),
                op,
                params: BTreeMap::new(),
                span: None,
            }],
        },
    };
    for e in &mut suite.experiments {
        for (k, v) in &extra {
            e.params.insert(
                k.clone(),
                Param {
                    value: v.clone(),
                    span: None,
                },
            );
        }
    }
    Ok(suite)
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let mut suite = suite_for(cli)?;
    if let Some(seed) = cli.seed {
        suite.seed = seed;
    }
    let bundle = run_suite(&suite, cli.jobs).map_err(|e| match (&cli.config, e.span) {
        (Some(path), Some(_)) => Failure::Config(format!("{}:{e}", path.display())),
        _ => e.into(),
    })?;
    match &cli.out {
        Some(dir) => {
            emit_report(&bundle, dir, cli.format)
                .with_context(|| format!("writing {}", dir.display()))
                .map_err(Failure::Io)?;
            for e in &bundle.experiments {
                let status = if e.pass { "PASS" } else { "FAIL" };
                match &e.error {
                    Some(err) => println!("{status} {} ({}): {err}", e.name, e.op),
                    None => println!("{status} {} ({})", e.name, e.op),
                }
            }
            println!(
                "{}",
                if bundle.pass {
                    "all passed"
                } else {
                    "some checks failed"
                }
            );
        }
        None if cli.format == Format::Csv => print!("{}", bundle.rollup_csv()),
        None => print!("{}", bundle.summary_json()),
    }
    Ok(bundle.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(true) => exit::PASS,
        Ok(false) => exit::CHECK_FAILED,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            exit::CONFIG_ERROR
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            exit::CONFIG_ERROR
        }
    };
    ExitCode::from(code as u8)
}
