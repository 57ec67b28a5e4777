//! Operations available to experiments: typed parameters and execution.

use std::fmt;
use std::str::FromStr;

use dilatio::coherent::{chow_connect, ChowConfig};
use dilatio::dilation::{
    build_tangent_model, sample_ball, verify_axioms, AxiomConfig, DilationStructure,
};
use dilatio::gh::{gh_distance, gh_pointed, GH_EXACT_CAP};
use dilatio::length::{cc_distance, gamma_diagnostic, tempered_check};
use dilatio::profiles::{curvdim_estimate, sample_profile_with, sectional_curvature};
use dilatio::spaces::{CarnotGroup, SpaceSpec, SphereChart};
use dilatio::{CcConfig, CoherentProjection, FiniteMetricSpace, LimitConfig, PolylineCurve, Space};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{suggest, ConfigError, ExperimentConfig, Param};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Op {
    ValidateAxioms,
    Tangent,
    Gh,
    Profile,
    Curvdim,
    CcDistance,
    Chow,
    Tempered,
    Gamma,
}

impl Op {
    pub const ALL: [Op; 9] = [
        Op::ValidateAxioms,
        Op::Tangent,
        Op::Gh,
        Op::Profile,
        Op::Curvdim,
        Op::CcDistance,
        Op::Chow,
        Op::Tempered,
        Op::Gamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Op::ValidateAxioms => "validate-axioms",
            Op::Tangent => "tangent",
            Op::Gh => "gh",
            Op::Profile => "profile",
            Op::Curvdim => "curvdim",
            Op::CcDistance => "cc-distance",
            Op::Chow => "chow",
            Op::Tempered => "tempered",
            Op::Gamma => "gamma",
        }
    }

    /// Parameter keys accepted by the operation.
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            Op::ValidateAxioms => &["space", "base", "samples", "radius", "grid", "seed"],
            Op::Tangent => &["space", "base", "samples", "radius", "tol", "grid", "seed"],
            Op::Gh => &[
                "src",
                "dst",
                "src_point",
                "dst_point",
                "cap",
                "expect",
                "tol",
                "seed",
            ],
            Op::Profile => &["space", "base", "n", "eps", "grid", "seed"],
            Op::Curvdim => &[
                "space",
                "base",
                "n",
                "eps",
                "grid",
                "slope_min",
                "slope_max",
                "curvature",
                "curvature_tol",
                "seed",
            ],
            Op::CcDistance => &[
                "space", "from", "to", "cells", "starts", "expect", "rel_tol", "seed",
            ],
            Op::Chow => &[
                "space", "base", "target", "eps", "letters", "accept", "starts", "seed",
            ],
            Op::Tempered => &[
                "space",
                "background",
                "base",
                "pairs",
                "radius",
                "expect",
                "grid",
                "seed",
            ],
            Op::Gamma => &[
                "space",
                "base",
                "curve",
                "levels",
                "max_slack",
                "max_violation",
                "grid",
                "seed",
            ],
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Op {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "verify-axioms" {
            return Ok(Op::ValidateAxioms);
        }
        Op::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Op::ALL.iter().map(|o| o.name()).collect();
                format!("unknown operation `{s}`; {}", suggest(s, &names))
            })
    }
}

/// Typed access to an experiment's parameters.
struct Params<'a> {
    exp: &'a ExperimentConfig,
}

impl<'a> Params<'a> {
    fn new(exp: &'a ExperimentConfig) -> Result<Self, ConfigError> {
        let keys = exp.op.keys();
        for (k, p) in &exp.params {
            if !keys.contains(&k.as_str()) {
                return Err(ConfigError {
                    span: p.span.or(exp.span),
                    message: format!(
                        "experiment `{}`: `{}` takes no parameter `{k}`; {}",
                        exp.name,
                        exp.op,
                        suggest(k, keys)
                    ),
                });
            }
        }
        Ok(Params { exp })
    }

    fn raw(&self, key: &str) -> Option<&Param> {
        self.exp.params.get(key)
    }

    fn err(&self, key: &str, msg: impl fmt::Display) -> ConfigError {
        ConfigError {
            span: self.raw(key).and_then(|p| p.span).or(self.exp.span),
            message: format!("experiment `{}`, parameter `{key}`: {msg}", self.exp.name),
        }
    }

    fn parse<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(p) => p
                .value
                .parse()
                .map(Some)
                .map_err(|_| self.err(key, format!("expected {what}, got `{}`", p.value))),
        }
    }

    fn real(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.parse::<f64>(key, "a number")?.unwrap_or(default);
        if !v.is_finite() {
            return Err(self.err(key, "must be finite"));
        }
        Ok(v)
    }

    fn count(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self
            .parse::<usize>(key, "a nonnegative integer")?
            .unwrap_or(default))
    }

    fn opt_real(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.parse::<f64>(key, "a number")
    }

    fn reals(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(p) = self.raw(key) else {
            return Ok(None);
        };
        parse_reals(&p.value)
            .map(Some)
            .map_err(|m| self.err(key, m))
    }

    fn points(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>, ConfigError> {
        let Some(p) = self.raw(key) else {
            return Ok(None);
        };
        p.value
            .split(';')
            .map(parse_reals)
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
            .map_err(|m| self.err(key, m))
    }

    fn space(&self, key: &str, default: Option<&str>) -> Result<SpaceSpec, ConfigError> {
        let text = match (self.raw(key), default) {
            (Some(p), _) => p.value.as_str(),
            (None, Some(d)) => d,
            (None, None) => return Err(self.err(key, "required")),
        };
        let spec: SpaceSpec = text.parse().map_err(|e| self.err(key, e))?;
        spec.build::<f64>().map_err(|e| self.err(key, e))?;
        Ok(spec)
    }

    fn point_in(
        &self,
        key: &str,
        dim: usize,
        default: Option<Vec<f64>>,
    ) -> Result<Vec<f64>, ConfigError> {
        let p = match (self.reals(key)?, default) {
            (Some(p), _) => p,
            (None, Some(d)) => d,
            (None, None) => return Err(self.err(key, "required")),
        };
        if p.len() != dim {
            return Err(self.err(key, format!("expected {dim} coordinates, got {}", p.len())));
        }
        Ok(p)
    }

    fn grid(&self, default: LimitConfig) -> Result<LimitConfig, ConfigError> {
        let Some(v) = self.reals("grid")? else {
            return Ok(default);
        };
        let ok = v.len() == 2 && v.iter().all(|x| x.fract() == 0.0) && v[0] < v[1];
        if !ok {
            return Err(self.err(
                "grid",
                "expected `from, to` with integers from < to (scales 2^-k)",
            ));
        }
        Ok(LimitConfig::dyadic(v[0] as i32, v[1] as i32))
    }

    fn carnot(&self) -> Result<CarnotGroup<f64>, ConfigError> {
        match self.space("space", Some("carnot heisenberg"))? {
            SpaceSpec::Carnot { table, .. } => {
                CarnotGroup::new(table).map_err(|e| self.err("space", e))
            }
            other => Err(self.err(
                "space",
                format!("`{}` needs a Carnot group, got `{other}`", self.exp.op),
            )),
        }
    }
}

fn parse_reals(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.iter().all(|p| p.is_empty()) {
        return Err("empty list".into());
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{p}` is not a finite number"))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum GhInput {
    Points(Vec<Vec<f64>>),
    File(String),
}

/// Source of the pairs for a tempered check.
#[derive(Debug, Clone, PartialEq)]
pub enum PairSource {
    Random { count: usize, radius: f64 },
    Given(Vec<(Vec<f64>, Vec<f64>)>),
}

/// Parsed and validated experiment.
#[derive(Debug, Clone)]
pub enum Plan {
    Axioms {
        space: SpaceSpec,
        base: Vec<f64>,
        samples: usize,
        radius: f64,
        cfg: LimitConfig,
    },
    Tangent {
        space: SpaceSpec,
        base: Vec<f64>,
        samples: usize,
        radius: f64,
        tol: f64,
        cfg: LimitConfig,
    },
    Gh {
        src: GhInput,
        dst: GhInput,
        points: Option<(String, String)>,
        cap: usize,
        expect: Option<f64>,
        tol: f64,
    },
    Profile {
        space: SpaceSpec,
        base: Vec<f64>,
        n: usize,
        eps: Vec<f64>,
        cfg: LimitConfig,
        curvdim: Option<CurvdimCheck>,
    },
    Cc {
        group: CarnotGroup<f64>,
        from: Vec<f64>,
        to: Vec<f64>,
        cfg: CcConfig,
        expect: Option<f64>,
        rel_tol: f64,
    },
    Chow {
        group: CarnotGroup<f64>,
        base: Vec<f64>,
        target: Vec<f64>,
        eps: f64,
        cfg: ChowConfig<f64>,
    },
    Tempered {
        space: SpaceSpec,
        background: SpaceSpec,
        base: Vec<f64>,
        pairs: PairSource,
        expect_pass: bool,
        cfg: LimitConfig,
    },
    Gamma {
        space: SpaceSpec,
        base: Vec<f64>,
        curve: Vec<Vec<f64>>,
        levels: usize,
        max_slack: f64,
        max_violation: f64,
        cfg: LimitConfig,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvdimCheck {
    pub slope: (f64, f64),
    pub curvature: Option<f64>,
    pub curvature_tol: f64,
}

fn built(spec: &SpaceSpec) -> Space {
    // checked by `Params::space`
    spec.build().expect("space was validated")
}

fn gh_input(p: &Params, key: &str) -> Result<GhInput, ConfigError> {
    let Some(raw) = p.raw(key) else {
        return Err(p.err(key, "required"));
    };
    let v = raw.value.trim();
    if v.ends_with(".csv") || v.ends_with(".json") {
        return Ok(GhInput::File(v.to_string()));
    }
    let pts = p.points(key)?.unwrap_or_default();
    let d = pts[0].len();
    if pts.iter().any(|q| q.len() != d) {
        return Err(p.err(key, "points of mixed dimension"));
    }
    Ok(GhInput::Points(pts))
}

/// Checks parameters and builds the plan of one experiment.
pub fn plan(exp: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let p = Params::new(exp)?;
    p.parse::<u64>("seed", "an unsigned integer")?;
    let limits = || p.grid(LimitConfig::default());
    Ok(match exp.op {
        Op::ValidateAxioms | Op::Tangent => {
            let space = p.space("space", None)?;
            let s = built(&space);
            let base = p.point_in("base", s.dim(), Some(s.origin()))?;
            let samples = p.count("samples", if exp.op == Op::Tangent { 4 } else { 5 })?;
            if samples == 0 {
                return Err(p.err("samples", "must be positive"));
            }
            let radius = p.real("radius", 0.5)?;
            if radius <= 0.0 {
                return Err(p.err("radius", "must be positive"));
            }
            if exp.op == Op::Tangent {
                Plan::Tangent {
                    space,
                    base,
                    samples,
                    radius,
                    tol: p.real("tol", 1e-5)?,
                    cfg: limits()?,
                }
            } else {
                Plan::Axioms {
                    space,
                    base,
                    samples,
                    radius,
                    cfg: limits()?,
                }
            }
        }
        Op::Gh => {
            let src = gh_input(&p, "src")?;
            let dst = gh_input(&p, "dst")?;
            let points = match (p.raw("src_point"), p.raw("dst_point")) {
                (None, None) => None,
                (Some(a), Some(b)) => Some((a.value.clone(), b.value.clone())),
                (Some(_), None) => return Err(p.err("src_point", "needs `dst_point` as well")),
                (None, Some(_)) => return Err(p.err("dst_point", "needs `src_point` as well")),
            };
            Plan::Gh {
                src,
                dst,
                points,
                cap: p.count("cap", GH_EXACT_CAP)?,
                expect: p.opt_real("expect")?,
                tol: p.real("tol", 1e-9)?,
            }
        }
        Op::Profile | Op::Curvdim => {
            let space = p.space("space", None)?;
            let s = built(&space);
            let base = p.point_in("base", s.dim(), Some(s.origin()))?;
            let n = p.count("n", 12)?;
            if n < 4 {
                return Err(p.err("n", "needs at least 4 points"));
            }
            let eps = p.reals("eps")?.unwrap_or_else(|| vec![0.4, 0.2, 0.1, 0.05]);
            if eps.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
                return Err(p.err("eps", "scales must lie in (0, 1]"));
            }
            let curvdim = if exp.op == Op::Curvdim {
                let lo = p.real("slope_min", 1.8)?;
                let hi = p.real("slope_max", 2.2)?;
                if lo > hi {
                    return Err(p.err("slope_min", "exceeds `slope_max`"));
                }
                let default_k = matches!(space, SpaceSpec::Sphere).then_some(1.0);
                Some(CurvdimCheck {
                    slope: (lo, hi),
                    curvature: p.opt_real("curvature")?.or(default_k),
                    curvature_tol: p.real("curvature_tol", 0.1)?,
                })
            } else {
                None
            };
            Plan::Profile {
                space,
                base,
                n,
                eps,
                cfg: limits()?,
                curvdim,
            }
        }
        Op::CcDistance => {
            let group = p.carnot()?;
            let dim = group.dim();
            let cells = match p.reals("cells")? {
                Some(c) if c.iter().all(|v| v.fract() == 0.0 && *v >= 1.0) => {
                    c.iter().map(|&v| v as usize).collect()
                }
                Some(_) => return Err(p.err("cells", "expected positive integers")),
                None => CcConfig::default().cells,
            };
            let cfg = CcConfig {
                cells,
                starts: p.count("starts", 8)?,
                ..CcConfig::default()
            };
            Plan::Cc {
                from: p.point_in("from", dim, Some(vec![0.0; dim]))?,
                to: p.point_in("to", dim, None)?,
                group,
                cfg,
                expect: p.opt_real("expect")?,
                rel_tol: p.real("rel_tol", 0.01)?,
            }
        }
        Op::Chow => {
            let group = p.carnot()?;
            let dim = group.dim();
            let eps = p.real("eps", 1.0)?;
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(p.err("eps", "must lie in (0, 1]"));
            }
            let cfg = ChowConfig {
                letters: p.count("letters", 4)?,
                accept: p.real("accept", 1e-6)?,
                starts: p.count("starts", 4)?,
                ..ChowConfig::default()
            };
            Plan::Chow {
                base: p.point_in("base", dim, Some(vec![0.0; dim]))?,
                target: p.point_in("target", dim, None)?,
                group,
                eps,
                cfg,
            }
        }
        Op::Tempered => {
            let space = p.space("space", None)?;
            let background = match p.raw("background") {
                Some(_) => p.space("background", None)?,
                None => space.clone(),
            };
            let s = built(&space);
            if built(&background).dim() != s.dim() {
                return Err(p.err("background", "dimension differs from the space"));
            }
            let base = p.point_in("base", s.dim(), Some(s.origin()))?;
            let radius = p.real("radius", 0.5)?;
            let pairs = match p.raw("pairs") {
                Some(raw) if raw.value.contains('>') => {
                    let mut out = Vec::new();
                    for item in raw.value.split(';') {
                        let (a, b) = item.split_once('>').ok_or_else(|| {
                            p.err("pairs", format!("expected `u > v`, got `{}`", item.trim()))
                        })?;
                        let u = parse_reals(a).map_err(|m| p.err("pairs", m))?;
                        let v = parse_reals(b).map_err(|m| p.err("pairs", m))?;
                        if u.len() != s.dim() || v.len() != s.dim() {
                            return Err(
                                p.err("pairs", format!("points need {} coordinates", s.dim()))
                            );
                        }
                        out.push((u, v));
                    }
                    PairSource::Given(out)
                }
                _ => PairSource::Random {
                    count: p.count("pairs", 6)?,
                    radius,
                },
            };
            let expect_pass = match p.raw("expect").map(|r| r.value.as_str()) {
                None | Some("pass") => true,
                Some("fail") => false,
                Some(other) => {
                    return Err(p.err(
                        "expect",
                        format!("expected `pass` or `fail`, got `{other}`"),
                    ))
                }
            };
            Plan::Tempered {
                space,
                background,
                base,
                pairs,
                expect_pass,
                cfg: limits()?,
            }
        }
        Op::Gamma => {
            let space = p.space("space", None)?;
            let s = built(&space);
            let base = p.point_in("base", s.dim(), Some(s.origin()))?;
            let curve = p
                .points("curve")?
                .ok_or_else(|| p.err("curve", "required"))?;
            if curve.len() < 2 || curve.iter().any(|q| q.len() != s.dim()) {
                return Err(p.err(
                    "curve",
                    format!("needs at least two points with {} coordinates", s.dim()),
                ));
            }
            let levels = p.count("levels", 8)?;
            if levels < 3 {
                return Err(p.err("levels", "needs at least 3 scales"));
            }
            Plan::Gamma {
                space,
                base,
                curve,
                levels,
                max_slack: p.real("max_slack", 1e-6)?,
                max_violation: p.real("max_violation", 1e-4)?,
                cfg: limits()?,
            }
        }
    })
}

/// A CSV table produced by an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Suffix of the file name; empty for the main table.
    pub name: String,
    pub csv: String,
}

/// Result of running one plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub result: Value,
    pub tables: Vec<Table>,
}

type Run = Result<Outcome, String>;

fn table(name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Table {
    let mut w = csv::Writer::from_writer(Vec::new());
    // writing to a Vec cannot fail
    w.write_record(header).unwrap();
    for r in rows {
        w.write_record(&r).unwrap();
    }
    Table {
        name: name.to_string(),
        csv: String::from_utf8(w.into_inner().unwrap()).unwrap(),
    }
}

fn num(v: f64) -> String {
    v.to_string()
}

fn to_value<S: Serialize>(s: &S) -> Value {
    serde_json::to_value(s).unwrap_or(Value::Null)
}

fn load_space(input: &GhInput) -> Result<FiniteMetricSpace, String> {
    match input {
        GhInput::Points(p) => Ok(FiniteMetricSpace::from_points(p)),
        GhInput::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
            let parsed = if path.ends_with(".json") {
                FiniteMetricSpace::from_json(&text)
            } else {
                FiniteMetricSpace::from_csv(&text)
            };
            parsed.map_err(|e| format!("{path}: {e}"))
        }
    }
}

fn random_point(rng: &mut ChaCha8Rng, base: &[f64], r: f64) -> Vec<f64> {
    base.iter().map(|&c| c + rng.gen_range(-r..r)).collect()
}

/// Runs a plan with the given seed.
pub fn execute(plan: &Plan, seed: u64) -> Run {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = |err: dilatio::Error| err.to_string();
    match plan {
        Plan::Axioms {
            space,
            base,
            samples,
            radius,
            cfg,
        } => {
            let s = built(space);
            let pts = sample_ball(s.as_ref(), base, *radius, *samples, &mut rng).map_err(e)?;
            let acfg = AxiomConfig {
                limits: cfg.clone(),
                ..AxiomConfig::default()
            };
            let report = verify_axioms(s.as_ref(), base, &pts, &acfg).map_err(e)?;
            let mut rows = Vec::new();
            for (i, q) in pts.iter().enumerate() {
                let one =
                    verify_axioms(s.as_ref(), base, std::slice::from_ref(q), &acfg).map_err(e)?;
                for c in &one.checks {
                    rows.push(vec![
                        c.axiom.clone(),
                        i.to_string(),
                        (c.pass as u8).to_string(),
                        num(c.max_residual),
                    ]);
                }
            }
            Ok(Outcome {
                pass: report.all_pass(),
                result: json!({ "space": space.to_string(), "base": base, "samples": pts, "report": to_value(&report) }),
                tables: vec![table(
                    "",
                    &["axiom", "sample", "pass", "max_residual"],
                    rows,
                )],
            })
        }
        Plan::Tangent {
            space,
            base,
            samples,
            radius,
            tol,
            cfg,
        } => {
            let s = built(space);
            let pts = sample_ball(s.as_ref(), base, *radius, *samples, &mut rng).map_err(e)?;
            let model = match build_tangent_model(s.as_ref(), base, &pts, cfg, *tol) {
                Ok(m) => m,
                Err(err) => {
                    return Ok(Outcome {
                        pass: false,
                        result: json!({ "space": space.to_string(), "base": base, "samples": pts, "failure": err.to_string() }),
                        tables: Vec::new(),
                    })
                }
            };
            let dist = model.dist_table(&pts).map_err(e)?;
            let mut rows = Vec::new();
            for (i, row) in dist.iter().enumerate() {
                for (j, &d) in row.iter().enumerate().skip(i + 1) {
                    rows.push(vec![i.to_string(), j.to_string(), num(d)]);
                }
            }
            let validation = model.validation.clone();
            Ok(Outcome {
                pass: validation.as_ref().is_some_and(|v| v.passed()),
                result: json!({
                    "space": space.to_string(),
                    "base": base,
                    "samples": pts,
                    "validation": to_value(&validation),
                    "tangent_distance": dist,
                }),
                tables: vec![table("", &["i", "j", "tangent_distance"], rows)],
            })
        }
        Plan::Gh {
            src,
            dst,
            points,
            cap,
            expect,
            tol,
        } => {
            let a = load_space(src)?;
            let b = load_space(dst)?;
            let r = match points {
                Some((x0, y0)) => {
                    let i = a.index_of(x0).map_err(e)?;
                    let j = b.index_of(y0).map_err(e)?;
                    gh_pointed(&a, i, &b, j, *cap).map_err(e)?
                }
                None => gh_distance(&a, &b, *cap).map_err(e)?,
            };
            let pass = expect.is_none_or(|x| (r.value - x).abs() <= *tol);
            let rows = r
                .witness
                .pairs
                .iter()
                .map(|&(i, j)| vec![a.ids[i].clone(), b.ids[j].clone()]);
            Ok(Outcome {
                pass,
                result: json!({ "gh": r.to_json(&a, &b), "expect": expect }),
                tables: vec![table("", &["src", "dst"], rows)],
            })
        }
        Plan::Profile {
            space,
            base,
            n,
            eps,
            cfg,
            curvdim,
        } => {
            let s = built(space);
            let series = sample_profile_with(s.as_ref(), base, *n, eps, seed, cfg).map_err(e)?;
            let dist = series.distortions();
            let main = Table {
                name: String::new(),
                csv: series.to_csv(),
            };
            let Some(check) = curvdim else {
                return Ok(Outcome {
                    pass: true,
                    result: json!({ "space": space.to_string(), "base": base, "eps": eps, "distortion": dist, "series": to_value(&series) }),
                    tables: vec![main],
                });
            };
            let est = curvdim_estimate(&series).map_err(e)?;
            let k = match space {
                SpaceSpec::Sphere if !est.flat => {
                    Some(sectional_curvature(&SphereChart::default(), &series, &est).map_err(e)?)
                }
                _ => None,
            };
            let slope_ok = est.flat
                || est
                    .slope
                    .is_some_and(|b| b >= check.slope.0 && b <= check.slope.1);
            let k_ok = match (check.curvature, k) {
                (Some(want), Some(got)) => (got - want).abs() <= check.curvature_tol * want.abs(),
                (Some(_), None) => est.flat,
                (None, _) => true,
            };
            Ok(Outcome {
                pass: slope_ok && k_ok && est.warning.is_none(),
                result: json!({
                    "space": space.to_string(),
                    "base": base,
                    "eps": eps,
                    "estimate": to_value(&est),
                    "sectional_curvature": k,
                    "slope_range": [check.slope.0, check.slope.1],
                    "expected_curvature": check.curvature,
                }),
                tables: vec![main],
            })
        }
        Plan::Cc {
            group,
            from,
            to,
            cfg,
            expect,
            rel_tol,
        } => {
            let cfg = CcConfig {
                seed,
                ..cfg.clone()
            };
            let r = cc_distance(group, from, to, &cfg).map_err(e)?;
            let close = expect.is_none_or(|x| (r.value - x).abs() <= rel_tol * x.abs());
            let trace = r.trace.iter().map(|t| {
                vec![
                    t.cells.to_string(),
                    t.iteration.to_string(),
                    num(t.penalty),
                    num(t.length),
                    num(t.endpoint_error),
                ]
            });
            let m = r.witness.controls.first().map_or(0, Vec::len);
            let mut header = vec!["cell".to_string()];
            header.extend((0..m).map(|i| format!("u{i}")));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let controls = r.witness.controls.iter().enumerate().map(|(i, u)| {
                std::iter::once(i.to_string())
                    .chain(u.iter().map(|&c| num(c)))
                    .collect()
            });
            Ok(Outcome {
                pass: r.certified && close,
                result: json!({
                    "from": from,
                    "to": to,
                    "value": r.value,
                    "certified": r.certified,
                    "endpoint": r.endpoint,
                    "endpoint_error": r.endpoint_error,
                    "start": r.start,
                    "start_values": r.start_values,
                    "expect": expect,
                }),
                tables: vec![
                    table(
                        "trace",
                        &["cells", "iteration", "penalty", "length", "endpoint_error"],
                        trace,
                    ),
                    table("witness", &header, controls),
                ],
            })
        }
        Plan::Chow {
            group,
            base,
            target,
            eps,
            cfg,
        } => {
            let proj = CoherentProjection::new(group.clone());
            let cfg = ChowConfig {
                seed,
                ..cfg.clone()
            };
            let sol = chow_connect(&proj, base, target, *eps, &cfg).map_err(e)?;
            Ok(Outcome {
                pass: sol.endpoint_error < cfg.accept,
                result: to_value(&sol),
                tables: vec![Table {
                    name: String::new(),
                    csv: sol.curve_csv(),
                }],
            })
        }
        Plan::Tempered {
            space,
            background,
            base,
            pairs,
            expect_pass,
            cfg,
        } => {
            let s = built(space);
            let bg = built(background);
            let pairs = match pairs {
                PairSource::Given(p) => p.clone(),
                PairSource::Random { count, radius } => (0..*count)
                    .map(|_| {
                        (
                            random_point(&mut rng, base, *radius),
                            random_point(&mut rng, base, *radius),
                        )
                    })
                    .collect(),
            };
            let r = tempered_check(s.as_ref(), bg.as_ref(), base, &pairs, cfg).map_err(e)?;
            let rows = r
                .per_eps
                .iter()
                .map(|&(a, lo, hi)| vec![num(a), num(lo), num(hi)]);
            Ok(Outcome {
                pass: r.pass == *expect_pass,
                result: json!({
                    "space": space.to_string(),
                    "background": background.to_string(),
                    "base": base,
                    "pairs": pairs,
                    "expected": if *expect_pass { "pass" } else { "fail" },
                    "report": to_value(&r),
                }),
                tables: vec![table("", &["eps", "min_ratio", "max_ratio"], rows)],
            })
        }
        Plan::Gamma {
            space,
            base,
            curve,
            levels,
            max_slack,
            max_violation,
            cfg,
        } => {
            let s = built(space);
            let c = PolylineCurve::uniform(curve.clone()).map_err(e)?;
            let eps: Vec<f64> = (0..*levels).map(|k| 0.5f64.powi(k as i32)).collect();
            let r = gamma_diagnostic(s.as_ref(), base, &[c], &[], &eps, cfg).map_err(e)?;
            let rec = &r.recovery[0];
            let pass = rec.slack.is_some_and(|v| v < *max_slack)
                && rec.monotone_violation < *max_violation;
            let rows = rec.values.iter().map(|v| vec![num(v.eps), num(v.value)]);
            Ok(Outcome {
                pass,
                result: json!({ "space": space.to_string(), "base": base, "report": to_value(&r) }),
                tables: vec![table("", &["eps", "rescaled_length"], rows)],
            })
        }
    }
}
