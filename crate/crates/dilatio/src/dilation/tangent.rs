use serde::{Deserialize, Serialize};

use crate::convergence::{
    coord_gap, extract_limit, extract_scalar_limit, ConvergenceReport, LimitConfig,
};
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{approx_difference, approx_sum, DilationStructure};

/// Extracted `d^x(u,v)` with cone and nondegeneracy diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TangentDistance<T: Real> {
    pub report: ConvergenceReport<T>,
    pub value: Option<T>,
    /// `max_μ |d^x(u,v) - d^x(δ_μ u, δ_μ v)/μ|` over `μ ∈ {1/2, 1/4}`.
    pub cone_residual: Option<T>,
    /// The limit vanished although `u != v`.
    pub degenerate: bool,
}

fn scaled_distance<T: Real, S: DilationStructure<T> + ?Sized>(
    s: &S,
    x: &[T],
    u: &[T],
    v: &[T],
    cfg: &LimitConfig<T>,
) -> Result<ConvergenceReport<T>> {
    extract_scalar_limit(
        |e| {
            let a = s.dil(x, e, u)?;
            let b = s.dil(x, e, v)?;
            Ok(s.dist(&a, &b) / e)
        },
        cfg,
    )
}

/// `d^x(u,v) = lim (1/ε) d(δ^x_ε u, δ^x_ε v)`.
pub fn tangent_distance<T: Real, S: DilationStructure<T> + ?Sized>(
    s: &S,
    x: &[T],
    u: &[T],
    v: &[T],
    cfg: &LimitConfig<T>,
) -> Result<TangentDistance<T>> {
    let report = scaled_distance(s, x, u, v, cfg)?;
    let value = report.converged().map(|l| l[0]);
    let mut cone = None;
    if let Some(d) = value {
        let mut worst = T::zero();
        for mu in [T::lit(0.5), T::lit(0.25)] {
            let a = s.dil(x, mu, u)?;
            let b = s.dil(x, mu, v)?;
            let r = scaled_distance(s, x, &a, &b, cfg)?;
            match r.converged() {
                Some(l) => worst = worst.max((d - l[0] / mu).abs()),
                None => worst = T::infinity(),
            }
        }
        cone = Some(worst);
    }
    let separated = s.dist(u, v) > T::lit(1e-9);
    let degenerate = separated && value.is_some_and(|d| d.abs() < cfg.tolerance);
    Ok(TangentDistance {
        report,
        value,
        cone_residual: cone,
        degenerate,
    })
}

/// Residuals of the tangent group laws on the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ModelValidation<T: Real> {
    pub associativity: T,
    pub neutral: T,
    pub inverse: T,
    pub left_translation: T,
    pub morphism: T,
    pub tolerance: T,
}

impl<T: Real> ModelValidation<T> {
    pub fn worst(&self) -> T {
        [
            self.associativity,
            self.neutral,
            self.inverse,
            self.left_translation,
            self.morphism,
        ]
        .into_iter()
        .fold(T::zero(), T::max)
    }

    pub fn passed(&self) -> bool {
        self.worst() <= self.tolerance
    }
}

/// Tangent space at `x` with operations computed as extracted limits.
pub struct TangentModel<'a, T: Real, S: DilationStructure<T> + ?Sized> {
    pub space: &'a S,
    pub x: Vec<T>,
    pub cfg: LimitConfig<T>,
    pub validation: Option<ModelValidation<T>>,
}

impl<'a, T: Real, S: DilationStructure<T> + ?Sized> TangentModel<'a, T, S> {
    pub fn new(space: &'a S, x: Vec<T>, cfg: LimitConfig<T>) -> Self {
        TangentModel {
            space,
            x,
            cfg,
            validation: None,
        }
    }

    fn metric(&self) -> impl Fn(&[T], &[T]) -> T {
        coord_gap
    }

    fn need(&self, r: ConvergenceReport<T>, what: &str) -> Result<Vec<T>> {
        r.converged().map(|v| v.to_vec()).ok_or_else(|| {
            Error::ConstructionFailed(format!("{what} is not Cauchy (tail gap {})", r.tail_gap))
        })
    }

    pub fn sum_report(&self, u: &[T], v: &[T]) -> Result<ConvergenceReport<T>> {
        extract_limit(
            |e| approx_sum(self.space, &self.x, e, u, v),
            &self.cfg,
            self.metric(),
        )
    }

    pub fn difference_report(&self, u: &[T], v: &[T]) -> Result<ConvergenceReport<T>> {
        extract_limit(
            |e| approx_difference(self.space, &self.x, e, u, v),
            &self.cfg,
            self.metric(),
        )
    }

    /// `Σ^x(u,v)`
    pub fn sum(&self, u: &[T], v: &[T]) -> Result<Vec<T>> {
        self.need(self.sum_report(u, v)?, "Σ^x")
    }

    /// `Δ^x(u,v)`
    pub fn difference(&self, u: &[T], v: &[T]) -> Result<Vec<T>> {
        self.need(self.difference_report(u, v)?, "Δ^x")
    }

    /// `inv^x u`
    pub fn inverse(&self, u: &[T]) -> Result<Vec<T>> {
        self.difference(u, &self.x.clone())
    }

    /// `δ^x_ε u`, exact.
    pub fn dilate(&self, eps: T, u: &[T]) -> Result<Vec<T>> {
        self.space.dil(&self.x, eps, u)
    }

    /// `d^x(u,v)`
    pub fn dist(&self, u: &[T], v: &[T]) -> Result<T> {
        let r = scaled_distance(self.space, &self.x, u, v, &self.cfg)?;
        self.need(r, "d^x").map(|v| v[0])
    }

    /// `d^x` table on a point list.
    pub fn dist_table(&self, pts: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        let n = pts.len();
        let mut m = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let d = self.dist(&pts[i], &pts[j])?;
                m[i][j] = d;
                m[j][i] = d;
            }
        }
        Ok(m)
    }
}

/// Builds the tangent model at `x` and validates the group laws on `samples`.
///
/// Triples are formed cyclically from the sample list. Residuals are
/// measured with the structure's distance.
pub fn build_tangent_model<'a, T: Real, S: DilationStructure<T> + ?Sized>(
    s: &'a S,
    x: &[T],
    samples: &[Vec<T>],
    cfg: &LimitConfig<T>,
    tolerance: T,
) -> Result<TangentModel<'a, T, S>> {
    let mut model = TangentModel::new(s, x.to_vec(), cfg.clone());
    let n = samples.len();
    let mut val = ModelValidation {
        associativity: T::zero(),
        neutral: T::zero(),
        inverse: T::zero(),
        left_translation: T::zero(),
        morphism: T::zero(),
        tolerance,
    };
    let half = T::lit(0.5);
    for i in 0..n {
        let u = &samples[i];
        let v = &samples[(i + 1) % n];
        let w = &samples[(i + 2) % n];
        let fail = |e: Error| Error::ConstructionFailed(format!("triple {i}: {e}"));
        let uv = model.sum(u, v).map_err(fail)?;
        let vw = model.sum(v, w).map_err(fail)?;
        let left = model.sum(&uv, w).map_err(fail)?;
        let right = model.sum(u, &vw).map_err(fail)?;
        val.associativity = val.associativity.max(coord_gap(&left, &right));

        let xu = approx_sum(s, x, half, x, u).map_err(fail)?;
        let ux = model.sum(u, x).map_err(fail)?;
        val.neutral = val.neutral.max(coord_gap(&xu, u)).max(coord_gap(&ux, u));

        let iu = model.inverse(u).map_err(fail)?;
        let z = model.sum(u, &iu).map_err(fail)?;
        val.inverse = val.inverse.max(coord_gap(&z, x));

        let duv = model.dist(u, v).map_err(fail)?;
        let wu = model.sum(w, u).map_err(fail)?;
        let wv = model.sum(w, v).map_err(fail)?;
        let dt = model.dist(&wu, &wv).map_err(fail)?;
        val.left_translation = val.left_translation.max((dt - duv).abs());

        let du = model.dilate(half, u).map_err(fail)?;
        let dv = model.dilate(half, v).map_err(fail)?;
        let a = model.dilate(half, &uv).map_err(fail)?;
        let b = model.sum(&du, &dv).map_err(fail)?;
        val.morphism = val.morphism.max(coord_gap(&a, &b));

        if val.worst() > tolerance {
            return Err(Error::ConstructionFailed(format!(
                "triple {i} violates the group laws: {val:?}"
            )));
        }
    }
    model.validation = Some(val);
    Ok(model)
}
