//! Running a suite and writing its report bundle.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::config::{ConfigError, SuiteConfig};
use crate::ops::{execute, plan, Op, Plan, Table};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub op: Op,
    pub seed: u64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub result: Value,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub pass: bool,
    pub seed: u64,
    pub experiments: Vec<ExperimentReport>,
}

impl ReportBundle {
    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    /// `name,op,seed,pass,error` per experiment.
    pub fn rollup_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["name", "op", "seed", "pass", "error"])
            .unwrap();
        for e in &self.experiments {
            w.write_record([
                e.name.as_str(),
                e.op.name(),
                &e.seed.to_string(),
                if e.pass { "1" } else { "0" },
                e.error.as_deref().unwrap_or(""),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    Json,
    Csv,
    #[default]
    Both,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "both" => Ok(Format::Both),
            other => Err(format!("unknown format `{other}` (json, csv, both)")),
        }
    }
}

struct Planned {
    name: String,
    op: Op,
    seed: u64,
    plan: Plan,
}

/// Plans every experiment first, so that no work starts on a bad config.
pub fn run_suite(suite: &SuiteConfig, jobs: Option<usize>) -> Result<ReportBundle, ConfigError> {
    let planned = suite
        .experiments
        .iter()
        .map(|exp| {
            let plan = plan(exp)?;
            let seed = match exp.params.get("seed") {
                // validated by `plan`
                Some(p) => p.value.parse().unwrap(),
                None => suite.seed,
            };
            Ok(Planned {
                name: exp.name.clone(),
                op: exp.op,
                seed,
                plan,
            })
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    let run = || -> Vec<ExperimentReport> {
        planned
            .par_iter()
            .map(|p| match execute(&p.plan, p.seed) {
                Ok(o) => ExperimentReport {
                    name: p.name.clone(),
                    op: p.op,
                    seed: p.seed,
                    pass: o.pass,
                    error: None,
                    result: o.result,
                    tables: o.tables,
                },
                Err(e) => ExperimentReport {
                    name: p.name.clone(),
                    op: p.op,
                    seed: p.seed,
                    pass: false,
                    error: Some(e),
                    result: Value::Null,
                    tables: Vec::new(),
                },
            })
            .collect()
    };
    let experiments = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| ConfigError::bare(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    Ok(ReportBundle {
        pass: experiments.iter().all(|e| e.pass),
        seed: suite.seed,
        experiments,
    })
}

/// Writes the bundle into `dir` and returns the written paths in order.
///
/// `summary.json` for JSON; `rollup.csv` and one `<name>[-<table>].csv` per
/// table for CSV.
pub fn emit_report(bundle: &ReportBundle, dir: &Path, format: Format) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: &str| -> io::Result<()> {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    if format != Format::Csv {
        put("summary.json".into(), &bundle.summary_json())?;
    }
    if format != Format::Json {
        put("rollup.csv".into(), &bundle.rollup_csv())?;
        for e in &bundle.experiments {
            for t in &e.tables {
                let file = if t.name.is_empty() {
                    format!("{}.csv", e.name)
                } else {
                    format!("{}-{}.csv", e.name, t.name)
                };
                put(file, &t.csv)?;
            }
        }
    }
    Ok(written)
}
