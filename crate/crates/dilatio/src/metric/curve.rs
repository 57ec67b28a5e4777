use crate::convergence::{extract_scalar_limit, ConvergenceReport, LimitConfig};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// A parametrized curve in coordinates.
pub trait Curve<T: Real> {
    /// Closed parameter interval.
    fn domain(&self) -> (T, T);
    fn eval(&self, t: T) -> Vec<T>;
}

/// Curve given by a closure on `[a, b]`.
pub struct FnCurve<T, F> {
    pub a: T,
    pub b: T,
    pub f: F,
}

impl<T: Real, F: Fn(T) -> Vec<T>> FnCurve<T, F> {
    pub fn new(a: T, b: T, f: F) -> Self {
        FnCurve { a, b, f }
    }
}

impl<T: Real, F: Fn(T) -> Vec<T>> Curve<T> for FnCurve<T, F> {
    fn domain(&self) -> (T, T) {
        (self.a, self.b)
    }
    fn eval(&self, t: T) -> Vec<T> {
        (self.f)(t)
    }
}

/// Piecewise linear curve through samples at increasing knots.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(bound = "")]
pub struct PolylineCurve<T: Real> {
    pub knots: Vec<T>,
    pub samples: Vec<Vec<T>>,
}

impl<T: Real> PolylineCurve<T> {
    pub fn new(knots: Vec<T>, samples: Vec<Vec<T>>) -> Result<Self> {
        if knots.len() != samples.len() {
            return Err(Error::MalformedInput(format!(
                "{} knots but {} samples",
                knots.len(),
                samples.len()
            )));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::MalformedInput("knots must increase strictly".into()));
        }
        if let Some(d) = samples.first().map(|s| s.len()) {
            if samples.iter().any(|s| s.len() != d) {
                return Err(Error::MalformedInput("samples of mixed dimension".into()));
            }
        }
        Ok(PolylineCurve { knots, samples })
    }

    /// Samples with knots `0, 1/n, ..., 1`.
    pub fn uniform(samples: Vec<Vec<T>>) -> Result<Self> {
        let n = samples.len().saturating_sub(1).max(1);
        let knots = (0..samples.len()).map(|i| T::of(i) / T::of(n)).collect();
        Self::new(knots, samples)
    }

    /// Samples `curve` at `n + 1` equally spaced parameters.
    pub fn sample<C: Curve<T> + ?Sized>(curve: &C, n: usize) -> Result<Self> {
        let (a, b) = curve.domain();
        let n = n.max(1);
        let knots: Vec<T> = (0..=n).map(|i| a + (b - a) * T::of(i) / T::of(n)).collect();
        let samples = knots.iter().map(|&t| curve.eval(t)).collect();
        Self::new(knots, samples)
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// Inserts the midpoint of every piece.
    pub fn refine(&self) -> Self {
        let mut knots = Vec::new();
        let mut samples = Vec::new();
        for i in 0..self.knots.len() {
            if i > 0 {
                let t = (self.knots[i - 1] + self.knots[i]) * T::lit(0.5);
                knots.push(t);
                samples.push(self.eval(t));
            }
            knots.push(self.knots[i]);
            samples.push(self.samples[i].clone());
        }
        PolylineCurve { knots, samples }
    }
}

impl<T: Real> Curve<T> for PolylineCurve<T> {
    fn domain(&self) -> (T, T) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    fn eval(&self, t: T) -> Vec<T> {
        let n = self.knots.len();
        if n == 1 || t <= self.knots[0] {
            return self.samples[0].clone();
        }
        if t >= self.knots[n - 1] {
            return self.samples[n - 1].clone();
        }
        let i = self.knots.partition_point(|&k| k <= t) - 1;
        let s = (t - self.knots[i]) / (self.knots[i + 1] - self.knots[i]);
        self.samples[i]
            .iter()
            .zip(&self.samples[i + 1])
            .map(|(&a, &b)| a + s * (b - a))
            .collect()
    }
}

/// Sum of distances between consecutive samples.
pub fn variation_length<T: Real, D: Fn(&[T], &[T]) -> T>(curve: &PolylineCurve<T>, dist: D) -> T {
    curve.samples.windows(2).map(|w| dist(&w[0], &w[1])).sum()
}

/// Re-knots the curve so that parameter gaps equal distances.
///
/// Consecutive samples at distance zero are merged.
pub fn reparameterize_unit_speed<T: Real, D: Fn(&[T], &[T]) -> T>(
    curve: &PolylineCurve<T>,
    dist: D,
) -> Result<PolylineCurve<T>> {
    let total = variation_length(curve, &dist);
    if !(total > T::zero()) || !total.is_finite() {
        return Err(Error::DegenerateCurve(
            "variation is zero or not finite".into(),
        ));
    }
    let mut knots = vec![curve.knots[0]];
    let mut samples = vec![curve.samples[0].clone()];
    let mut t = curve.knots[0];
    for w in curve.samples.windows(2) {
        let g = dist(&w[0], &w[1]);
        if g > T::zero() {
            t += g;
            knots.push(t);
            samples.push(w[1].clone());
        }
    }
    PolylineCurve::new(knots, samples)
}

/// Forward difference quotients `d(c(t+s), c(t)) / s` and their limit.
pub fn metric_derivative<T, C, D>(
    curve: &C,
    t: T,
    grid: &LimitConfig<T>,
    dist: D,
) -> Result<ConvergenceReport<T>>
where
    T: Real,
    C: Curve<T> + ?Sized,
    D: Fn(&[T], &[T]) -> T,
{
    let (a, b) = curve.domain();
    if !(t > a && t < b) {
        return Err(Error::OutOfDomain(format!(
            "parameter {t} is not interior to [{a}, {b}]"
        )));
    }
    if grid.grid.iter().any(|&s| t + s > b) {
        return Err(Error::OutOfDomain(
            "grid step leaves the parameter range".into(),
        ));
    }
    let ct = curve.eval(t);
    extract_scalar_limit(|s| Ok(dist(&curve.eval(t + s), &ct) / s), grid)
}
