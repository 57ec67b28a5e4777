use std::marker::PhantomData;

use crate::dilation::DilationStructure;
use crate::scalar::{euclid, Real};

/// The plane with dilations `δ^x_ε y = x + ε^{1+iθ}(y - x)` in complex notation.
#[derive(Debug, Clone, Copy)]
pub struct NonstandardPlane<T> {
    pub theta: T,
    _t: PhantomData<T>,
}

impl<T: Real> NonstandardPlane<T> {
    pub fn new(theta: T) -> Self {
        NonstandardPlane {
            theta,
            _t: PhantomData,
        }
    }
}

impl<T: Real> DilationStructure<T> for NonstandardPlane<T> {
    fn name(&self) -> String {
        format!("nonstandard {}", self.theta)
    }
    fn dim(&self) -> usize {
        2
    }
    fn dist(&self, x: &[T], y: &[T]) -> T {
        euclid(x, y)
    }
    fn dilate_raw(&self, x: &[T], eps: T, y: &[T]) -> Vec<T> {
        let phi = self.theta * eps.ln();
        let (s, c) = phi.sin_cos();
        let (dx, dy) = (y[0] - x[0], y[1] - x[1]);
        vec![
            x[0] + eps * (c * dx - s * dy),
            x[1] + eps * (s * dx + c * dy),
        ]
    }
}
