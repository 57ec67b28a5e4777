use serde::{Deserialize, Serialize};

use crate::convergence::{
    coord_gap, extract_limit, extract_scalar_limit, ConvergenceReport, LimitConfig,
};
use crate::error::{Error, Result};
use crate::metric::Curve;
use crate::scalar::Real;

use super::{approx_sum, DilationStructure};

/// Derivative search at one parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DerivativeSample<T: Real> {
    pub t: T,
    /// `ċ(t)`, when the quotients converge.
    pub velocity: Option<Vec<T>>,
    /// Whether `ε ↦ δ_ε ċ(t)` is a one-parameter subgroup of the tangent space.
    pub in_distribution: Option<bool>,
    pub cauchy_ok: bool,
    pub spread: T,
    /// `(1/ε) d(c(t+ε), δ^{c(t)}_ε ċ(t))` at the smallest scale.
    pub residual: Option<T>,
}

impl<T: Real> DerivativeSample<T> {
    pub fn derivable(&self) -> bool {
        self.velocity.is_some() && self.in_distribution == Some(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DerivativeScan<T: Real> {
    pub samples: Vec<DerivativeSample<T>>,
    pub derivable_fraction: T,
}

/// Tests whether `ε ↦ δ^x_ε u` is additive for the tangent sum at `x`.
pub fn in_distribution<T: Real, S: DilationStructure<T> + ?Sized>(
    s: &S,
    x: &[T],
    u: &[T],
    cfg: &LimitConfig<T>,
    tol: T,
) -> Result<bool> {
    for (a, b) in [(0.25, 0.5), (0.5, 0.5)] {
        let (a, b) = (T::lit(a), T::lit(b));
        let ua = s.dil(x, a, u)?;
        let ub = s.dil(x, b, u)?;
        let r = extract_limit(|e| approx_sum(s, x, e, &ua, &ub), cfg, coord_gap)?;
        let Some(sum) = r.converged() else {
            return Ok(false);
        };
        let target = s.dil(x, a + b, u)?;
        if coord_gap(sum, &target) > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Searches for `ċ(t) = lim δ^{c(t)}_{1/ε} c(t+ε)` at each `t`.
pub fn derivative_and_rnp_scan<T, S, C>(
    s: &S,
    curve: &C,
    ts: &[T],
    cfg: &LimitConfig<T>,
    tol: T,
) -> Result<DerivativeScan<T>>
where
    T: Real,
    S: DilationStructure<T> + ?Sized,
    C: Curve<T> + ?Sized,
{
    let (_, b) = curve.domain();
    let mut samples = Vec::with_capacity(ts.len());
    for &t in ts {
        let ct = curve.eval(t);
        let r = extract_limit(
            |e| {
                if t + e > b {
                    return Err(Error::OutOfDomain("step leaves the curve".into()));
                }
                s.dil(&ct, e.recip(), &curve.eval(t + e))
            },
            cfg,
            coord_gap,
        )?;
        let velocity = r.converged().map(|v| v.to_vec());
        let mut residual = None;
        let mut in_d = None;
        if let Some(v) = &velocity {
            let e = cfg.grid[cfg.grid.len() - 1];
            if t + e <= b {
                if let Ok(p) = s.dil(&ct, e, v) {
                    residual = Some(s.dist(&curve.eval(t + e), &p) / e);
                }
            }
            in_d = Some(in_distribution(s, &ct, v, cfg, tol).unwrap_or(false));
        }
        samples.push(DerivativeSample {
            t,
            cauchy_ok: r.cauchy_ok,
            spread: r.spread,
            velocity,
            in_distribution: in_d,
            residual,
        });
    }
    let good = samples.iter().filter(|d| d.derivable()).count();
    let frac = if samples.is_empty() {
        T::zero()
    } else {
        T::of(good) / T::of(samples.len())
    };
    Ok(DerivativeScan {
        samples,
        derivable_fraction: frac,
    })
}

/// Samples `max_u (1/ε) d̄(f(δ^x_ε u), δ̄^{f(x)}_ε Df(u))` over `neighborhood`.
///
/// `f` is differentiable at `x` with derivative `df` when the limit is 0.
pub fn pansu_differential_check<T, S, R, F, G>(
    src: &S,
    dst: &R,
    f: F,
    df: G,
    x: &[T],
    neighborhood: &[Vec<T>],
    cfg: &LimitConfig<T>,
) -> Result<ConvergenceReport<T>>
where
    T: Real,
    S: DilationStructure<T> + ?Sized,
    R: DilationStructure<T> + ?Sized,
    F: Fn(&[T]) -> Vec<T>,
    G: Fn(&[T]) -> Vec<T>,
{
    let fx = f(x);
    let images: Vec<Vec<T>> = neighborhood.iter().map(|u| df(u)).collect();
    extract_scalar_limit(
        |e| {
            let mut worst = T::zero();
            for (u, du) in neighborhood.iter().zip(&images) {
                let a = f(&src.dil(x, e, u)?);
                let b = dst.dil(&fx, e, du)?;
                worst = worst.max(dst.dist(&a, &b) / e);
            }
            Ok(worst)
        },
        cfg,
    )
}
