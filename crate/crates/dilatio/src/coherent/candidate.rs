use serde::{Deserialize, Serialize};

use super::{induced_difference, CoherentProjection};
use crate::convergence::{coord_gap, extract_limit, LimitConfig};
use crate::dilation::{approx_sum, tangent_distance};
use crate::error::{Error, Result};
use crate::metric::{Curve, PolylineCurve};
use crate::scalar::{norm, Real};

/// Candidate tangent space at `x`: `δ̊^{x,u}_μ`, `Q̊^{x,u}_μ` and the
/// length `l^x` of horizontal curves, built from extracted `Σ^x`, `Δ^x`.
pub struct CandidateTangent<'a, T: Real> {
    pub p: &'a CoherentProjection<T>,
    pub x: Vec<T>,
    pub cfg: LimitConfig<T>,
    /// Largest `|Q^x D − D|` accepted as horizontal.
    pub horizontal_tol: T,
    /// Number of halvings of the piece length used for curve derivatives.
    pub derivative_levels: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CandidateLength<T: Real> {
    /// `l^x(c)`
    pub length: T,
    /// `l̄^x(Q^x c)`
    pub projected: T,
    pub gap: T,
    /// Worst `|Q^x D − D|` over the pieces.
    pub horizontal_defect: T,
}

impl<'a, T: Real> CandidateTangent<'a, T> {
    pub fn new(p: &'a CoherentProjection<T>, x: Vec<T>, cfg: LimitConfig<T>) -> Self {
        CandidateTangent {
            p,
            x,
            cfg,
            horizontal_tol: T::lit(1e-6),
            derivative_levels: 4,
        }
    }

    fn need(&self, r: crate::convergence::ConvergenceReport<T>, what: &str) -> Result<Vec<T>> {
        r.converged().map(|v| v.to_vec()).ok_or_else(|| {
            Error::ConstructionFailed(format!("{what} is not Cauchy (tail gap {})", r.tail_gap))
        })
    }

    /// `Σ^x(u,v)`
    pub fn sum(&self, u: &[T], v: &[T]) -> Result<Vec<T>> {
        let s = self.p.induced();
        let r = extract_limit(|e| approx_sum(&s, &self.x, e, u, v), &self.cfg, coord_gap)?;
        self.need(r, "Σ^x")
    }

    /// `Δ^x(u,v)`
    pub fn difference(&self, u: &[T], v: &[T]) -> Result<Vec<T>> {
        induced_difference(self.p, &self.x, u, v, &self.cfg)
    }

    /// `δ̊^{x,u}_μ v = Σ^x(u, δ^x_μ Δ^x(u,v))`
    pub fn ring_dilate(&self, u: &[T], mu: T, v: &[T]) -> Result<Vec<T>> {
        let d = self.difference(u, v)?;
        self.sum(u, &self.p.dil(&self.x, mu, &d)?)
    }

    /// `Q̊^{x,u}_μ v = Σ^x(u, Q^x_μ Δ^x(u,v))`; `μ = 0` is the limit projection.
    pub fn ring_project(&self, u: &[T], mu: T, v: &[T]) -> Result<Vec<T>> {
        let d = self.difference(u, v)?;
        self.sum(u, &self.p.q(&self.x, mu, &d)?)
    }

    /// `Δ^x(c(t), ċ(t)) = lim δ^x_{1/ε} Δ^x(c(t), c(t+ε))` for steps
    /// `ε = h/2, h/4, …` inside the piece.
    fn velocity<C: Curve<T> + ?Sized>(&self, c: &C, t: T, h: T) -> Result<Vec<T>> {
        let grid = LimitConfig {
            grid: (1..=self.derivative_levels)
                .map(|k| h * T::lit(0.5f64.powi(k)))
                .collect(),
            ..self.cfg.clone()
        };
        let ct = c.eval(t);
        let r = extract_limit(
            |e| {
                let d = self.difference(&ct, &c.eval(t + e))?;
                self.p.dil(&self.x, T::one() / e, &d)
            },
            &grid,
            coord_gap,
        )?;
        r.converged().map(|v| v.to_vec()).ok_or_else(|| {
            Error::Inapplicable(format!(
                "curve is not derivable at t = {t} (tail gap {})",
                r.tail_gap
            ))
        })
    }

    /// `l^x(c)` by the midpoint rule on each piece, and `l̄^x(Q^x c)` as the
    /// `d̄^x`-variation of the projected curve with `sub` points per piece.
    pub fn length(&self, c: &PolylineCurve<T>, sub: usize) -> Result<CandidateLength<T>> {
        let x = &self.x;
        let mut length = T::zero();
        let mut defect = T::zero();
        let mut projected = T::zero();
        for w in c.knots.windows(2) {
            let tau = w[1] - w[0];
            let mid = (w[0] + w[1]) * T::lit(0.5);
            let d = self.velocity(c, mid, tau)?;
            defect = defect.max(coord_gap(&self.p.q_limit(x, &d)?, &d));
            if defect > self.horizontal_tol {
                return Err(Error::Inapplicable(format!(
                    "curve is not horizontal near t = {mid} (defect {defect})"
                )));
            }
            length += tau * self.bar_tangent_dist(x, &d)?;

            let sub = sub.max(1);
            let mut prev = self.p.q_limit(x, &c.eval(w[0]))?;
            for j in 1..=sub {
                let t = w[0] + tau * T::of(j) / T::of(sub);
                let next = self.p.q_limit(x, &c.eval(t))?;
                projected += self.bar_tangent_dist(&prev, &next)?;
                prev = next;
            }
        }
        Ok(CandidateLength {
            length,
            projected,
            gap: (length - projected).abs(),
            horizontal_defect: defect,
        })
    }

    /// `d̄^x(a, b)`, extracted.
    fn bar_tangent_dist(&self, a: &[T], b: &[T]) -> Result<T> {
        if coord_gap(a, b) == T::zero() {
            return Ok(T::zero());
        }
        let r = tangent_distance(&self.p.background(), &self.x, a, b, &self.cfg)?;
        r.value
            .ok_or_else(|| Error::ConstructionFailed("d̄^x is not Cauchy".into()))
    }

    /// `(l^x(δ^x_μ c), μ l^x(c))`
    pub fn homogeneity(&self, c: &PolylineCurve<T>, mu: T) -> Result<(T, T)> {
        let img = c
            .samples
            .iter()
            .map(|v| self.p.dil(&self.x, mu, v))
            .collect::<Result<Vec<_>>>()?;
        let dc = PolylineCurve::new(c.knots.clone(), img)?;
        Ok((self.length(&dc, 1)?.length, mu * self.length(c, 1)?.length))
    }

    /// Norm of the non-horizontal part of `x⁻¹ [u, v]`, the commutator of
    /// `u = x·h1` and `v = x·h2` computed with `Σ^x` and `inv^x`.
    pub fn commutator_vertical(&self, h1: &[T], h2: &[T]) -> Result<T> {
        let g = &self.p.group;
        let u = g.multiply(&self.x, &g.horizontal(h1));
        let v = g.multiply(&self.x, &g.horizontal(h2));
        let iu = self.difference(&u, &self.x)?;
        let iv = self.difference(&v, &self.x)?;
        let c = self.sum(&self.sum(&self.sum(&u, &v)?, &iu)?, &iv)?;
        let rel = g.left_quotient(&self.x, &c);
        Ok(norm(&rel[g.horizontal_dim()..]))
    }
}
