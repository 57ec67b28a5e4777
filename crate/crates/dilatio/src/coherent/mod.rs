//! Coherent projections over a Carnot group in exponential coordinates.
//!
//! The background structure is Euclidean distance on coordinates with
//! dilations `δ̄^x_ε y = x·(ε x⁻¹y)`; the projection scales each layer of
//! `x⁻¹y` by `ε^{deg-1}`. Induced dilations `δ̄^x_ε Q^x_ε` are the Carnot ones.

mod candidate;
mod chow;
mod words;

pub use candidate::{CandidateLength, CandidateTangent};
pub use chow::{
    chow_connect, condition_a, short_curve_and_cond_b, ChowConfig, ChowSolution, ConditionA,
    ConditionB, SegmentRatios,
};
pub use words::{nesting_radius, psi_word, NestingRadius, WordProgram};

use serde::{Deserialize, Serialize};

use crate::convergence::{coord_gap, extract_limit, ConvergenceReport, LimitConfig};
use crate::dilation::{approx_difference, approx_sum, DilationStructure};
use crate::error::{Error, Result};
use crate::scalar::{euclid, Real};
use crate::spaces::CarnotGroup;

/// `Q^x_ε` for a Carnot group, with the background it is coherent for.
#[derive(Debug, Clone)]
pub struct CoherentProjection<T: Real> {
    pub group: CarnotGroup<T>,
    /// Background radius of the neighbourhood `U(x)` used for nesting.
    pub domain: T,
}

impl<T: Real> CoherentProjection<T> {
    pub fn new(group: CarnotGroup<T>) -> Self {
        CoherentProjection {
            group,
            domain: T::one(),
        }
    }

    pub fn heisenberg() -> Self {
        Self::new(CarnotGroup::heisenberg())
    }

    pub fn dim(&self) -> usize {
        self.group.dim()
    }

    fn scale_layers(&self, eps: T, a: &[T]) -> Vec<T> {
        a.iter()
            .zip(&self.group.deg)
            .map(|(&v, &d)| {
                if d == 1 {
                    v
                } else {
                    v * eps.powi(d as i32 - 1)
                }
            })
            .collect()
    }

    /// `Q^x_ε u`; `eps = 0` gives the limit projection `Q^x`.
    pub fn q(&self, x: &[T], eps: T, u: &[T]) -> Result<Vec<T>> {
        if !(eps >= T::zero()) || !eps.is_finite() {
            return Err(Error::OutOfDomain(format!("projection scale {eps}")));
        }
        self.check(x, u)?;
        let g = &self.group;
        Ok(g.multiply(x, &self.scale_layers(eps, &g.left_quotient(x, u))))
    }

    /// `Q^x u`
    pub fn q_limit(&self, x: &[T], u: &[T]) -> Result<Vec<T>> {
        self.q(x, T::zero(), u)
    }

    /// `δ̄^x_ε u`
    pub fn bar_dil(&self, x: &[T], eps: T, u: &[T]) -> Result<Vec<T>> {
        self.background().dil(x, eps, u)
    }

    /// Induced `δ^x_ε u = δ̄^x_ε Q^x_ε u`.
    pub fn dil(&self, x: &[T], eps: T, u: &[T]) -> Result<Vec<T>> {
        let q = self.q(x, eps, u)?;
        self.bar_dil(x, eps, &q)
    }

    pub fn bar_dist(&self, a: &[T], b: &[T]) -> T {
        euclid(a, b)
    }

    /// `(δ̄^x_ε d̄)(a, b) = d̄(δ̄^x_ε a, δ̄^x_ε b) / ε`.
    pub fn scaled_bar_dist(&self, x: &[T], eps: T, a: &[T], b: &[T]) -> Result<T> {
        Ok(self.bar_dist(&self.bar_dil(x, eps, a)?, &self.bar_dil(x, eps, b)?) / eps)
    }

    pub fn background(&self) -> Background<'_, T> {
        Background { p: self }
    }

    pub fn induced(&self) -> Induced<'_, T> {
        Induced { p: self }
    }

    fn check(&self, x: &[T], u: &[T]) -> Result<()> {
        let n = self.dim();
        if x.len() != n || u.len() != n {
            return Err(Error::MalformedInput(format!(
                "points must have {n} coordinates"
            )));
        }
        if x.iter().chain(u).any(|v| !v.is_finite()) {
            return Err(Error::OutOfDomain("non-finite point".into()));
        }
        Ok(())
    }

    /// `Θ^x_ε(u,v) = δ̄^x_{1/ε} Q^{δ̄^x_ε Q^x_ε u}_{1/ε} δ̄^x_ε Q^x_ε v`.
    pub fn theta(&self, x: &[T], eps: T, u: &[T], v: &[T]) -> Result<Vec<T>> {
        let a = self.bar_dil(x, eps, &self.q(x, eps, u)?)?;
        let b = self.bar_dil(x, eps, &self.q(x, eps, v)?)?;
        let c = self.q(&a, T::one() / eps, &b)?;
        self.bar_dil(x, T::one() / eps, &c)
    }

    /// Limit `Θ^x(u,v)`.
    pub fn theta_limit(
        &self,
        x: &[T],
        u: &[T],
        v: &[T],
        cfg: &LimitConfig<T>,
    ) -> Result<ConvergenceReport<T>> {
        extract_limit(|e| self.theta(x, e, u, v), cfg, coord_gap)
    }

    /// Residual of `Θ^x_ε(u,v) = Σ̄^x_ε(Q^x_ε u, Δ^x_ε(u,v))`.
    pub fn theta_identity_residual(&self, x: &[T], eps: T, u: &[T], v: &[T]) -> Result<T> {
        let lhs = self.theta(x, eps, u, v)?;
        let d = approx_difference(&self.induced(), x, eps, u, v)?;
        let rhs = approx_sum(&self.background(), x, eps, &self.q(x, eps, u)?, &d)?;
        Ok(rel_gap(&lhs, &rhs))
    }
}

fn rel_gap<T: Real>(a: &[T], b: &[T]) -> T {
    let m = b.iter().fold(T::zero(), |m, c| m.max(c.abs()));
    coord_gap(a, b) / (T::one() + m)
}

/// `(ℝⁿ, d̄, δ̄)` for a coherent projection.
pub struct Background<'a, T: Real> {
    p: &'a CoherentProjection<T>,
}

impl<T: Real> DilationStructure<T> for Background<'_, T> {
    fn name(&self) -> String {
        "background".into()
    }
    fn dim(&self) -> usize {
        self.p.dim()
    }
    fn dist(&self, x: &[T], y: &[T]) -> T {
        euclid(x, y)
    }
    fn dilate_raw(&self, x: &[T], eps: T, y: &[T]) -> Vec<T> {
        let g = &self.p.group;
        let a: Vec<T> = g.left_quotient(x, y).into_iter().map(|v| v * eps).collect();
        g.multiply(x, &a)
    }
}

/// Induced dilations `δ̄ Q` with the group gauge distance.
pub struct Induced<'a, T: Real> {
    p: &'a CoherentProjection<T>,
}

impl<T: Real> DilationStructure<T> for Induced<'_, T> {
    fn name(&self) -> String {
        "induced".into()
    }
    fn dim(&self) -> usize {
        self.p.dim()
    }
    fn dist(&self, x: &[T], y: &[T]) -> T {
        self.p.group.gauge_dist(x, y)
    }
    fn dilate_raw(&self, x: &[T], eps: T, y: &[T]) -> Vec<T> {
        let b = self.p.background();
        let g = &self.p.group;
        let q = g.multiply(x, &self.p.scale_layers(eps, &g.left_quotient(x, y)));
        b.dilate_raw(x, eps, &q)
    }
}

/// Worst residuals of the coherent projection identities on a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CoherentReport<T: Real> {
    /// `Q^x_1 = id` and `Q^x_ε x = x`.
    pub unit: T,
    /// `Q^x_ε Q^x_μ = Q^x_{εμ}`.
    pub semigroup: T,
    /// `Q^x_ε δ̄^x_μ = δ̄^x_μ Q^x_ε`.
    pub commutation: T,
    /// `δ^x_ε δ̄^x_μ = δ̄^x_μ δ^x_ε`.
    pub induced_commutation: T,
    pub theta_identity: T,
    /// `Q^x Q^x = Q^x`.
    pub projection: T,
    /// `Δ^x(u,v) = Δ̄^x(Q^x u, Θ^x(u,v))`.
    pub recon: T,
    /// `Q^x Δ^x(u,v) = Δ̄^x(Q^x u, Q^x v)`.
    pub morph: T,
}

impl<T: Real> CoherentReport<T> {
    pub fn exact_worst(&self) -> T {
        [
            self.unit,
            self.semigroup,
            self.commutation,
            self.induced_commutation,
            self.theta_identity,
        ]
        .into_iter()
        .fold(T::zero(), T::max)
    }

    pub fn limit_worst(&self) -> T {
        [self.projection, self.recon, self.morph]
            .into_iter()
            .fold(T::zero(), T::max)
    }
}

fn converged<T: Real>(r: ConvergenceReport<T>, what: &str) -> Result<Vec<T>> {
    r.converged().map(|v| v.to_vec()).ok_or_else(|| {
        Error::ConstructionFailed(format!("{what} is not Cauchy (tail gap {})", r.tail_gap))
    })
}

/// `Δ^x(u,v)` for the induced structure, extracted.
pub fn induced_difference<T: Real>(
    p: &CoherentProjection<T>,
    x: &[T],
    u: &[T],
    v: &[T],
    cfg: &LimitConfig<T>,
) -> Result<Vec<T>> {
    let s = p.induced();
    converged(
        extract_limit(|e| approx_difference(&s, x, e, u, v), cfg, coord_gap)?,
        "Δ^x",
    )
}

/// `Δ̄^x(u,v)` for the background, extracted.
pub fn background_difference<T: Real>(
    p: &CoherentProjection<T>,
    x: &[T],
    u: &[T],
    v: &[T],
    cfg: &LimitConfig<T>,
) -> Result<Vec<T>> {
    let s = p.background();
    converged(
        extract_limit(|e| approx_difference(&s, x, e, u, v), cfg, coord_gap)?,
        "Δ̄^x",
    )
}

/// Checks every identity on the triples `(x, u, v)` with exact identities
/// evaluated at each scale of `eps` and limits extracted with `cfg`.
pub fn coherent_identities<T: Real>(
    p: &CoherentProjection<T>,
    triples: &[(Vec<T>, Vec<T>, Vec<T>)],
    eps: &[T],
    cfg: &LimitConfig<T>,
) -> Result<CoherentReport<T>> {
    let mut r = CoherentReport {
        unit: T::zero(),
        semigroup: T::zero(),
        commutation: T::zero(),
        induced_commutation: T::zero(),
        theta_identity: T::zero(),
        projection: T::zero(),
        recon: T::zero(),
        morph: T::zero(),
    };
    let up = |m: &mut T, v: T| *m = m.max(v);
    for (x, u, v) in triples {
        up(&mut r.unit, rel_gap(&p.q(x, T::one(), u)?, u));
        for &e in eps {
            up(&mut r.unit, rel_gap(&p.q(x, e, x)?, x));
            for &m in eps {
                up(
                    &mut r.semigroup,
                    rel_gap(&p.q(x, e, &p.q(x, m, u)?)?, &p.q(x, e * m, u)?),
                );
                let a = p.q(x, e, &p.bar_dil(x, m, u)?)?;
                let b = p.bar_dil(x, m, &p.q(x, e, u)?)?;
                up(&mut r.commutation, rel_gap(&a, &b));
                let a = p.dil(x, e, &p.bar_dil(x, m, u)?)?;
                let b = p.bar_dil(x, m, &p.dil(x, e, u)?)?;
                up(&mut r.induced_commutation, rel_gap(&a, &b));
            }
            up(
                &mut r.theta_identity,
                p.theta_identity_residual(x, e, u, v)?,
            );
        }

        let qu = p.q_limit(x, u)?;
        up(&mut r.projection, coord_gap(&p.q_limit(x, &qu)?, &qu));
        let qv = p.q_limit(x, v)?;
        let diff = induced_difference(p, x, u, v, cfg)?;
        let theta = converged(p.theta_limit(x, u, v, cfg)?, "Θ^x")?;
        up(
            &mut r.recon,
            coord_gap(&diff, &background_difference(p, x, &qu, &theta, cfg)?),
        );
        up(
            &mut r.morph,
            coord_gap(
                &p.q_limit(x, &diff)?,
                &background_difference(p, x, &qu, &qv, cfg)?,
            ),
        );
    }
    Ok(r)
}
