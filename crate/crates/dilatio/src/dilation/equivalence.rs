use serde::{Deserialize, Serialize};

use crate::convergence::{coord_gap, extract_limit, ConvergenceReport, LimitConfig};
use crate::error::Result;
use crate::scalar::{linear_fit, Real};

use super::DilationStructure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Equivalent,
    NotEquivalent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EquivalenceReport<T: Real> {
    /// `Q^x(u) = lim (δ̄^x_ε)^{-1} δ^x_ε u` per sample.
    pub q: Vec<ConvergenceReport<T>>,
    /// `P^x(u) = lim (δ^x_ε)^{-1} δ̄^x_ε u` per sample.
    pub p: Vec<ConvergenceReport<T>>,
    /// Extremes of `d̄/d` over dilated sample pairs.
    pub ratio_low: T,
    pub ratio_high: T,
    /// Log-log slopes of the per-scale extremes against ε.
    pub slope_low: T,
    pub slope_high: T,
    pub bilipschitz: bool,
    pub verdict: Verdict,
}

/// Compares the structures `(d, δ)` and `(d̄, δ̄)` on a shared chart near `x`.
pub fn equivalence_probe<T, S, R>(
    s: &S,
    sbar: &R,
    x: &[T],
    samples: &[Vec<T>],
    cfg: &LimitConfig<T>,
) -> Result<EquivalenceReport<T>>
where
    T: Real,
    S: DilationStructure<T> + ?Sized,
    R: DilationStructure<T> + ?Sized,
{
    let mut q = Vec::new();
    let mut p = Vec::new();
    for u in samples {
        q.push(extract_limit(
            |e| sbar.dil(x, e.recip(), &s.dil(x, e, u)?),
            cfg,
            coord_gap,
        )?);
        p.push(extract_limit(
            |e| s.dil(x, e.recip(), &sbar.dil(x, e, u)?),
            cfg,
            coord_gap,
        )?);
    }

    let (mut le, mut llo, mut lhi) = (Vec::new(), Vec::new(), Vec::new());
    let mut lo_all = T::infinity();
    let mut hi_all = T::zero();
    for &e in &cfg.grid {
        let mut lo = T::infinity();
        let mut hi = T::zero();
        for i in 0..samples.len() {
            for j in i + 1..samples.len() {
                let (Ok(a), Ok(b)) = (s.dil(x, e, &samples[i]), s.dil(x, e, &samples[j])) else {
                    continue;
                };
                let d = s.dist(&a, &b);
                if d > T::zero() {
                    let r = sbar.dist(&a, &b) / d;
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
            }
        }
        if lo.is_finite() && hi > T::zero() {
            le.push(e.ln());
            llo.push(lo.ln());
            lhi.push(hi.ln());
            lo_all = lo_all.min(lo);
            hi_all = hi_all.max(hi);
        }
    }
    let slope_low = linear_fit(&le, &llo).map_or(T::nan(), |f| f.0);
    let slope_high = linear_fit(&le, &lhi).map_or(T::nan(), |f| f.0);
    let flat = |sl: T| sl.abs() < T::lit(0.1);
    let bilipschitz =
        lo_all > T::zero() && hi_all.is_finite() && flat(slope_low) && flat(slope_high);

    let all_cauchy = q.iter().chain(&p).all(|r| r.cauchy_ok);
    let wild = q.iter().chain(&p).any(|r| !r.cauchy_ok && !r.partial);
    let verdict = if all_cauchy && bilipschitz {
        Verdict::Equivalent
    } else if wild || (!bilipschitz && !le.is_empty()) {
        Verdict::NotEquivalent
    } else {
        Verdict::Inconclusive
    };
    Ok(EquivalenceReport {
        q,
        p,
        ratio_low: lo_all,
        ratio_high: hi_all,
        slope_low,
        slope_high,
        bilipschitz,
        verdict,
    })
}
