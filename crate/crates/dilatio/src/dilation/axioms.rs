use serde::{Deserialize, Serialize};

use crate::convergence::{coord_gap, extract_limit, LimitConfig};
use crate::error::Result;
use crate::scalar::{max_abs_diff, Real};

use super::{approx_difference, tangent_distance, DilationStructure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AxiomCheck<T: Real> {
    pub axiom: String,
    pub pass: bool,
    pub max_residual: T,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AxiomReport<T: Real> {
    pub structure: String,
    pub checks: Vec<AxiomCheck<T>>,
    /// Fitted ball-inclusion constants `1 < A < B`.
    pub fitted_a: T,
    pub fitted_b: T,
    /// Largest ε-variation of `(1/ε) d(δ^x_ε u, δ^x_ε v)` over the conical grid.
    pub conical_distortion: T,
    pub flat: bool,
}

impl<T: Real> AxiomReport<T> {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, axiom: &str) -> Option<&AxiomCheck<T>> {
        self.checks.iter().find(|c| c.axiom == axiom)
    }

    /// One row per check.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("axiom,pass,max_residual,witness\n");
        for c in &self.checks {
            s.push_str(&format!(
                "{},{},{},{}\n",
                c.axiom,
                c.pass as u8,
                c.max_residual.as_f64(),
                c.witness.clone().unwrap_or_default().replace(',', ";")
            ));
        }
        s
    }
}

/// Settings for [`verify_axioms`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AxiomConfig<T: Real> {
    pub limits: LimitConfig<T>,
    /// Coordinate tolerance, relative to `1 + |coordinates|`, for exact identities.
    pub exact_tol: T,
    /// Scales for the conical check.
    pub conical_grid: Vec<T>,
    pub flat_tol: T,
}

impl<T: Real> Default for AxiomConfig<T> {
    fn default() -> Self {
        AxiomConfig {
            limits: LimitConfig::default(),
            exact_tol: T::lit(1e-12),
            conical_grid: (0..=4).map(|k| T::lit(2f64.powi(-k))).collect(),
            flat_tol: T::lit(1e-9),
        }
    }
}

struct Tracker<T: Real> {
    name: &'static str,
    tol: T,
    worst: T,
    witness: Option<String>,
    failed: bool,
}

impl<T: Real> Tracker<T> {
    fn new(name: &'static str, tol: T) -> Self {
        Tracker {
            name,
            tol,
            worst: T::zero(),
            witness: None,
            failed: false,
        }
    }

    fn record(&mut self, residual: T, scale: T, what: impl FnOnce() -> String) {
        let r = if residual.is_nan() {
            T::infinity()
        } else {
            residual
        };
        if r > self.worst {
            self.worst = r;
        }
        if r > self.tol * (T::one() + scale) && !self.failed {
            self.failed = true;
            self.witness = Some(what());
        }
    }

    fn fail(&mut self, what: String) {
        if !self.failed {
            self.failed = true;
            self.witness = Some(what);
        }
        self.worst = T::infinity();
    }

    fn finish(self) -> AxiomCheck<T> {
        AxiomCheck {
            axiom: self.name.to_string(),
            pass: !self.failed,
            max_residual: self.worst,
            witness: self.witness,
        }
    }
}

fn mag<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Checks axioms A0-A4 at `x` on a point sample.
pub fn verify_axioms<T: Real, S: DilationStructure<T> + ?Sized>(
    s: &S,
    x: &[T],
    samples: &[Vec<T>],
    cfg: &AxiomConfig<T>,
) -> Result<AxiomReport<T>> {
    cfg.limits.validate()?;
    let grid = &cfg.limits.grid;
    let coarse: Vec<T> = [0.5, 0.25, 0.125].iter().map(|&e| T::lit(e)).collect();

    let mut a1 = Tracker::new("A1", cfg.exact_tol);
    let mut a2 = Tracker::new("A2", cfg.exact_tol);
    for (i, u) in samples.iter().enumerate() {
        let sc = mag(u).max(mag(x));
        match s.dil(x, T::one(), u) {
            Ok(p) => a1.record(max_abs_diff(&p, u), sc, || {
                format!("sample {i}: δ_1 u != u")
            }),
            Err(e) => a1.fail(format!("sample {i}: {e}")),
        }
        for &e in grid.iter().chain(&coarse) {
            match s.dil(x, e, x) {
                Ok(p) => a1.record(max_abs_diff(&p, x), sc, || format!("δ^x_{e} x != x")),
                Err(err) => a1.fail(format!("eps {e}: {err}")),
            }
        }
        for &e in &coarse {
            let back = s.dil(x, e, u).and_then(|p| s.dil(x, e.recip(), &p));
            match back {
                Ok(p) => a1.record(max_abs_diff(&p, u), sc, || {
                    format!("sample {i}, eps {e}: δ_(1/ε) δ_ε u != u")
                }),
                Err(err) => a1.fail(format!("sample {i}, eps {e}: {err}")),
            }
            for &m in grid.iter().step_by(3) {
                let lhs = s.dil(x, m, u).and_then(|p| s.dil(x, e, &p));
                let rhs = s.dil(x, e * m, u);
                match (lhs, rhs) {
                    (Ok(a), Ok(b)) => a2.record(max_abs_diff(&a, &b), sc, || {
                        format!("sample {i}, eps {e}, mu {m}: δ_ε δ_μ != δ_εμ")
                    }),
                    (Err(err), _) | (_, Err(err)) => {
                        a2.fail(format!("sample {i}, eps {e}, mu {m}: {err}"))
                    }
                }
            }
        }
        // contraction towards x
        if let Ok(p) = s.dil(x, grid[grid.len() - 1], u) {
            let d = s.dist(x, &p);
            let du = s.dist(x, u);
            if !(d <= du) {
                a2.fail(format!("sample {i}: smallest dilation does not contract"));
            }
        }
    }

    // A0: cone ratios d(x, δ_ε u) / (ε d(x,u))
    let mut lo = T::infinity();
    let mut hi = T::zero();
    let mut a0 = Tracker::new("A0", T::infinity());
    for (i, u) in samples.iter().enumerate() {
        let du = s.dist(x, u);
        if !(du > T::zero()) {
            continue;
        }
        for &e in grid {
            match s.dil(x, e, u) {
                Ok(p) => {
                    let r = s.dist(x, &p) / (e * du);
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
                Err(err) => a0.fail(format!("sample {i}, eps {e}: {err}")),
            }
        }
    }
    if !(lo > T::zero()) || !hi.is_finite() {
        a0.fail("cone ratios are not bounded away from 0 and infinity".into());
    }
    let fitted_a = (T::one() / lo).max(T::one()) * T::lit(1.0001);
    let fitted_b = fitted_a * hi.max(T::one()) * T::lit(1.0001);
    a0.worst = if lo > T::zero() {
        hi / lo
    } else {
        T::infinity()
    };

    // A3 and A4 on consecutive pairs
    let mut a3 = Tracker::new("A3", T::zero());
    let mut a4 = Tracker::new("A4", T::zero());
    let mut conical = T::zero();
    let n = samples.len();
    for i in 0..n {
        let u = &samples[i];
        let v = &samples[(i + 1) % n];
        let td = tangent_distance(s, x, u, v, &cfg.limits)?;
        a3.worst = a3.worst.max(td.report.tail_gap);
        if !td.report.cauchy_ok {
            a3.fail(format!("pair ({i},{}) : d^x not Cauchy", (i + 1) % n));
        } else if td.degenerate {
            a3.fail(format!(
                "pair ({i},{}) : d^x vanishes for distinct points",
                (i + 1) % n
            ));
        }
        let r = extract_limit(|e| approx_difference(s, x, e, u, v), &cfg.limits, coord_gap)?;
        a4.worst = a4.worst.max(r.tail_gap);
        if !r.cauchy_ok {
            a4.fail(format!("pair ({i},{}) : Δ^x not Cauchy", (i + 1) % n));
        }

        let mut vals = Vec::new();
        for &e in &cfg.conical_grid {
            if let (Ok(a), Ok(b)) = (s.dil(x, e, u), s.dil(x, e, v)) {
                vals.push(s.dist(&a, &b) / e);
            }
        }
        if let (Some(mx), Some(mn)) = (
            vals.iter().copied().reduce(T::max),
            vals.iter().copied().reduce(T::min),
        ) {
            conical = conical.max(mx - mn);
        }
    }

    Ok(AxiomReport {
        structure: s.name(),
        checks: vec![
            a0.finish(),
            a1.finish(),
            a2.finish(),
            a3.finish(),
            a4.finish(),
        ],
        fitted_a,
        fitted_b,
        conical_distortion: conical,
        flat: conical < cfg.flat_tol,
    })
}
