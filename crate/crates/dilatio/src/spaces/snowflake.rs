use crate::dilation::DilationStructure;
use crate::scalar::Real;

/// Snowflake `d_a = d^a` with dilations `δ^x_{ε^{1/a}}` of the base.
pub struct Snowflake<T, S> {
    pub base: S,
    pub a: T,
}

impl<T: Real, S: DilationStructure<T>> Snowflake<T, S> {
    /// `a` must lie in `(0, 1]`.
    pub fn new(base: S, a: T) -> Option<Self> {
        (a > T::zero() && a <= T::one()).then_some(Snowflake { base, a })
    }
}

impl<T: Real, S: DilationStructure<T>> DilationStructure<T> for Snowflake<T, S> {
    fn name(&self) -> String {
        format!("snowflake({}, {})", self.base.name(), self.a)
    }
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn dist(&self, x: &[T], y: &[T]) -> T {
        self.base.dist(x, y).powf(self.a)
    }
    fn dilate_raw(&self, x: &[T], eps: T, y: &[T]) -> Vec<T> {
        self.base.dilate_raw(x, eps.powf(self.a.recip()), y)
    }
    fn domain_radius(&self, x: &[T]) -> T {
        self.base.domain_radius(x).powf(self.a)
    }
    fn origin(&self) -> Vec<T> {
        self.base.origin()
    }
}
