use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{FiniteMetricSpace, METRIC_TOL};

/// Arrow `(y, x)` of the pair groupoid, with source `x` and target `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Arrow {
    pub target: usize,
    pub source: usize,
}

impl Arrow {
    pub fn inverse(self) -> Arrow {
        Arrow {
            target: self.source,
            source: self.target,
        }
    }
}

/// A metric space seen as the groupoid `X × X` normed by the distance.
#[derive(Debug, Clone)]
pub struct TrivialGroupoidView<T: Real> {
    pub base: FiniteMetricSpace<T>,
}

impl<T: Real> TrivialGroupoidView<T> {
    pub fn new(base: FiniteMetricSpace<T>) -> Self {
        TrivialGroupoidView { base }
    }

    pub fn arrow(&self, target: &str, source: &str) -> Result<Arrow> {
        Ok(Arrow {
            target: self.base.index_of(target)?,
            source: self.base.index_of(source)?,
        })
    }

    pub fn arrows(&self) -> impl Iterator<Item = Arrow> + '_ {
        let n = self.base.len();
        (0..n).flat_map(move |t| {
            (0..n).map(move |s| Arrow {
                target: t,
                source: s,
            })
        })
    }

    pub fn norm(&self, g: Arrow) -> T {
        self.base.d(g.target, g.source)
    }

    /// `g h`, defined when the source of `g` is the target of `h`.
    pub fn compose(&self, g: Arrow, h: Arrow) -> Option<Arrow> {
        (g.source == h.target).then_some(Arrow {
            target: g.target,
            source: h.source,
        })
    }

    /// Distance in the fiber over `x` between `(u, x)` and `(v, x)`.
    pub fn fiber_distance(&self, x: &str, u: &str, v: &str) -> Result<T> {
        let g = self.arrow(u, x)?;
        let h = self.arrow(v, x)?;
        self.fiber_distance_arrows(g, h)
    }

    pub fn fiber_distance_arrows(&self, g: Arrow, h: Arrow) -> Result<T> {
        if g.source != h.source {
            return Err(Error::MalformedInput(
                "arrows lie in different fibers".into(),
            ));
        }
        let gh = self
            .compose(g, h.inverse())
            .expect("same source composes with inverse");
        Ok(self.norm(gh))
    }

    /// Right translation of `(u, x)` by `(x, w)`, landing in the fiber over `w`.
    pub fn right_translate(&self, g: Arrow, by: Arrow) -> Option<Arrow> {
        self.compose(g, by)
    }

    /// Checks the groupoid norm axioms; returns the offending arrows.
    pub fn norm_axiom_violations(&self) -> Vec<(Arrow, Arrow)> {
        let tol = T::lit(METRIC_TOL);
        let mut bad = Vec::new();
        let all: Vec<Arrow> = self.arrows().collect();
        for &g in &all {
            let identity = g.source == g.target;
            if (self.norm(g) <= tol) != identity {
                bad.push((g, g));
            }
            if (self.norm(g) - self.norm(g.inverse())).abs() > tol {
                bad.push((g, g.inverse()));
            }
            for &h in &all {
                if let Some(gh) = self.compose(g, h) {
                    if self.norm(gh) > self.norm(g) + self.norm(h) + tol {
                        bad.push((g, h));
                    }
                }
            }
        }
        bad
    }
}
