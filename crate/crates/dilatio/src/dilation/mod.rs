//! Dilation structures, approximate operations and their limits.

mod axioms;
mod derivative;
mod equivalence;
mod tangent;

pub use axioms::{verify_axioms, AxiomCheck, AxiomConfig, AxiomReport};
pub use derivative::{
    derivative_and_rnp_scan, in_distribution, pansu_differential_check, DerivativeSample,
    DerivativeScan,
};
pub use equivalence::{equivalence_probe, EquivalenceReport, Verdict};
pub use tangent::{
    build_tangent_model, tangent_distance, ModelValidation, TangentDistance, TangentModel,
};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A point domain with a distance and a based dilation field `δ^x_ε`.
pub trait DilationStructure<T: Real>: Send + Sync {
    fn name(&self) -> String;

    /// Number of coordinates of a point.
    fn dim(&self) -> usize;

    fn dist(&self, x: &[T], y: &[T]) -> T;

    /// `δ^x_ε y` without domain checks.
    fn dilate_raw(&self, x: &[T], eps: T, y: &[T]) -> Vec<T>;

    /// Radius around `x` inside which dilations are defined.
    fn domain_radius(&self, _x: &[T]) -> T {
        T::infinity()
    }

    /// Distinguished base point.
    fn origin(&self) -> Vec<T> {
        vec![T::zero(); self.dim()]
    }

    /// `δ^x_ε y`, failing when `y` or the result leaves the domain around `x`.
    fn dil(&self, x: &[T], eps: T, y: &[T]) -> Result<Vec<T>> {
        if !(eps > T::zero()) || !eps.is_finite() {
            return Err(Error::OutOfDomain(format!("dilation coefficient {eps}")));
        }
        let r = self.domain_radius(x);
        if r.is_finite() {
            let d = self.dist(x, y);
            if !(d <= r) {
                return Err(Error::OutOfDomain(format!(
                    "argument at distance {d} exceeds radius {r}"
                )));
            }
            if !(d * eps <= r) {
                return Err(Error::OutOfDomain(format!(
                    "image at distance {} exceeds radius {r}",
                    d * eps
                )));
            }
        }
        let out = self.dilate_raw(x, eps, y);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutOfDomain("non-finite dilation".into()));
        }
        Ok(out)
    }
}

impl<T: Real, S: DilationStructure<T> + ?Sized> DilationStructure<T> for Box<S> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn dist(&self, x: &[T], y: &[T]) -> T {
        (**self).dist(x, y)
    }
    fn dilate_raw(&self, x: &[T], eps: T, y: &[T]) -> Vec<T> {
        (**self).dilate_raw(x, eps, y)
    }
    fn domain_radius(&self, x: &[T]) -> T {
        (**self).domain_radius(x)
    }
    fn origin(&self) -> Vec<T> {
        (**self).origin()
    }
    fn dil(&self, x: &[T], eps: T, y: &[T]) -> Result<Vec<T>> {
        (**self).dil(x, eps, y)
    }
}

/// Structure defined by a pair of closures on coordinates.
pub struct FnStructure<D, L> {
    pub label: String,
    pub dim: usize,
    pub dist: D,
    pub dil: L,
}

impl<T, D, L> DilationStructure<T> for FnStructure<D, L>
where
    T: Real,
    D: Fn(&[T], &[T]) -> T + Send + Sync,
    L: Fn(&[T], T, &[T]) -> Vec<T> + Send + Sync,
{
    fn name(&self) -> String {
        self.label.clone()
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn dist(&self, x: &[T], y: &[T]) -> T {
        (self.dist)(x, y)
    }
    fn dilate_raw(&self, x: &[T], eps: T, y: &[T]) -> Vec<T> {
        (self.dil)(x, eps, y)
    }
}

fn step<T: Real, S: DilationStructure<T> + ?Sized>(
    s: &S,
    x: &[T],
    eps: T,
    y: &[T],
    label: &str,
) -> Result<Vec<T>> {
    s.dil(x, eps, y).map_err(|e| match e {
        Error::OutOfDomain(m) => Error::OutOfDomain(format!("{label}: {m}")),
        other => other,
    })
}

/// `Δ^x_ε(u,v) = δ^{δ^x_ε u}_{1/ε} δ^x_ε v`.
pub fn approx_difference<T: Real, S: DilationStructure<T> + ?Sized>(
    s: &S,
    x: &[T],
    eps: T,
    u: &[T],
    v: &[T],
) -> Result<Vec<T>> {
    let w = step(s, x, eps, u, "δ^x_ε u in Δ")?;
    let z = step(s, x, eps, v, "δ^x_ε v in Δ")?;
    step(s, &w, eps.recip(), &z, "δ^{δ^x_ε u}_{1/ε} in Δ")
}

/// `Σ^x_ε(u,v) = δ^x_{1/ε} δ^{δ^x_ε u}_ε v`.
pub fn approx_sum<T: Real, S: DilationStructure<T> + ?Sized>(
    s: &S,
    x: &[T],
    eps: T,
    u: &[T],
    v: &[T],
) -> Result<Vec<T>> {
    let w = step(s, x, eps, u, "δ^x_ε u in Σ")?;
    let z = step(s, &w, eps, v, "δ^{δ^x_ε u}_ε v in Σ")?;
    step(s, x, eps.recip(), &z, "δ^x_{1/ε} in Σ")
}

/// `inv^x_ε u = Δ^x_ε(u, x)`.
pub fn approx_inverse<T: Real, S: DilationStructure<T> + ?Sized>(
    s: &S,
    x: &[T],
    eps: T,
    u: &[T],
) -> Result<Vec<T>> {
    approx_difference(s, x, eps, u, x)
}

/// Random points within distance `radius` of `x`, built by rescaling
/// random coordinate offsets with the dilations at `x`.
pub fn sample_ball<T: Real, S: DilationStructure<T> + ?Sized>(
    s: &S,
    x: &[T],
    radius: T,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<T>>> {
    let dim = s.dim();
    let mut out = Vec::with_capacity(n);
    let mut tries = 0usize;
    while out.len() < n {
        tries += 1;
        if tries > 100 * n + 100 {
            return Err(Error::OutOfDomain("could not sample the ball".into()));
        }
        let u0: Vec<T> = x
            .iter()
            .map(|&c| c + T::lit(rng.gen_range(-0.5..0.5)))
            .collect();
        let d = s.dist(x, &u0);
        if !(d > T::lit(1e-9)) || !d.is_finite() || d > s.domain_radius(x) {
            continue;
        }
        let rho: f64 = rng.gen_range(0.05f64..1.0).powf(1.0 / dim as f64);
        match s.dil(x, radius * T::lit(rho) / d, &u0) {
            Ok(u) => out.push(u),
            Err(_) => continue,
        }
    }
    Ok(out)
}

/// Coordinate residuals of the exact identities between `Δ`, `Σ` and `inv`
/// at one scale, in the order
/// `Δ(u,Σ(u,v)) = v`, `Σ(u,Δ(u,v)) = v`, `Δ(u,v) = Σ^{δu}(inv u, v)`,
/// `inv^{δu} inv u = u`, the associativity of `Σ` with shifted base,
/// `inv u = Δ(u,x)` and `Σ(x,u) = u`.
///
/// Each residual is a max-norm coordinate gap divided by `1 + |target|`.
pub fn pplay_residuals<T: Real, S: DilationStructure<T> + ?Sized>(
    s: &S,
    x: &[T],
    eps: T,
    u: &[T],
    v: &[T],
    w: &[T],
) -> Result<[T; 7]> {
    let gap = |a: &[T], b: &[T]| {
        let m = b.iter().fold(T::zero(), |m, c| m.max(c.abs()));
        crate::scalar::max_abs_diff(a, b) / (T::one() + m)
    };
    let xu = s.dil(x, eps, u)?;
    let inv_u = approx_inverse(s, x, eps, u)?;

    let sum_uv = approx_sum(s, x, eps, u, v)?;
    let a = gap(&approx_difference(s, x, eps, u, &sum_uv)?, v);
    let diff_uv = approx_difference(s, x, eps, u, v)?;
    let b = gap(&approx_sum(s, x, eps, u, &diff_uv)?, v);
    let c = gap(&approx_sum(s, &xu, eps, &inv_u, v)?, &diff_uv);
    let d = gap(&approx_inverse(s, &xu, eps, &inv_u)?, u);
    let inner = approx_sum(s, &xu, eps, v, w)?;
    let lhs = approx_sum(s, x, eps, u, &inner)?;
    let rhs = approx_sum(s, x, eps, &sum_uv, w)?;
    let e = gap(&lhs, &rhs);
    let f = gap(&inv_u, &approx_difference(s, x, eps, u, x)?);
    let g = gap(&approx_sum(s, x, eps, x, u)?, u);
    Ok([a, b, c, d, e, f, g])
}
