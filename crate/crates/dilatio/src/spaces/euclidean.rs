use std::marker::PhantomData;

use crate::dilation::DilationStructure;
use crate::scalar::{euclid, Real};

/// `ℝⁿ` with the Euclidean distance and affine dilations.
#[derive(Debug, Clone, Copy)]
pub struct Euclidean<T> {
    pub dim: usize,
    _t: PhantomData<T>,
}

impl<T: Real> Euclidean<T> {
    pub fn new(dim: usize) -> Self {
        Euclidean {
            dim,
            _t: PhantomData,
        }
    }
}

impl<T: Real> DilationStructure<T> for Euclidean<T> {
    fn name(&self) -> String {
        format!("euclidean {}", self.dim)
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn dist(&self, x: &[T], y: &[T]) -> T {
        euclid(x, y)
    }
    fn dilate_raw(&self, x: &[T], eps: T, y: &[T]) -> Vec<T> {
        x.iter().zip(y).map(|(&a, &b)| a + eps * (b - a)).collect()
    }
}
