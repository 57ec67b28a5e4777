//! Relations between finite metric spaces and Gromov-Hausdorff distances.
//!
//! The GH distance here is the infimum of the accuracy of correspondences,
//! without the factor 1/2 of the more common convention.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::FiniteMetricSpace;
use crate::scalar::{euclid, Real};

/// Set of index pairs `(x, y)` with `x` in the source and `y` in the target.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Relation {
    pub pairs: BTreeSet<(usize, usize)>,
}

impl Relation {
    pub fn from_pairs<I: IntoIterator<Item = (usize, usize)>>(it: I) -> Self {
        Relation {
            pairs: it.into_iter().collect(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_pairs((0..n).map(|i| (i, i)))
    }

    pub fn full(n: usize, m: usize) -> Self {
        Self::from_pairs((0..n).flat_map(|i| (0..m).map(move |j| (i, j))))
    }

    pub fn domain(&self) -> BTreeSet<usize> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn image(&self) -> BTreeSet<usize> {
        self.pairs.iter().map(|p| p.1).collect()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn is_correspondence(&self, n: usize, m: usize) -> bool {
        self.domain().len() == n && self.image().len() == m
    }

    /// Swaps source and target.
    pub fn transpose(&self) -> Self {
        Self::from_pairs(self.pairs.iter().map(|&(a, b)| (b, a)))
    }

    /// JSON list of `[x_id, y_id]` pairs.
    pub fn to_json<T: Real>(
        &self,
        src: &FiniteMetricSpace<T>,
        dst: &FiniteMetricSpace<T>,
    ) -> String {
        serde_json::to_string(&self.id_pairs(src, dst)).expect("serializable")
    }

    pub fn id_pairs<T: Real>(
        &self,
        src: &FiniteMetricSpace<T>,
        dst: &FiniteMetricSpace<T>,
    ) -> Vec<(String, String)> {
        self.pairs
            .iter()
            .map(|&(a, b)| (src.ids[a].clone(), dst.ids[b].clone()))
            .collect()
    }

    pub fn from_json<T: Real>(
        s: &str,
        src: &FiniteMetricSpace<T>,
        dst: &FiniteMetricSpace<T>,
    ) -> Result<Self> {
        let raw: Vec<(String, String)> =
            serde_json::from_str(s).map_err(|e| Error::MalformedInput(e.to_string()))?;
        let pairs = raw
            .iter()
            .map(|(a, b)| Ok((src.index_of(a)?, dst.index_of(b)?)))
            .collect::<Result<BTreeSet<_>>>()?;
        Ok(Relation { pairs })
    }

    fn check<T: Real>(&self, src: &FiniteMetricSpace<T>, dst: &FiniteMetricSpace<T>) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::EmptyRelation);
        }
        for &(a, b) in &self.pairs {
            if a >= src.len() {
                return Err(Error::UnknownPoint(format!("source index {a}")));
            }
            if b >= dst.len() {
                return Err(Error::UnknownPoint(format!("target index {b}")));
            }
        }
        Ok(())
    }
}

/// Accuracy, precision and resolution of a relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RelationStats<T: Real> {
    pub accuracy: T,
    pub precision: T,
    pub resolution: T,
}

pub fn relation_stats<T: Real>(
    src: &FiniteMetricSpace<T>,
    dst: &FiniteMetricSpace<T>,
    rel: &Relation,
) -> Result<RelationStats<T>> {
    rel.check(src, dst)?;
    let pairs: Vec<(usize, usize)> = rel.pairs.iter().copied().collect();
    let mut acc = T::zero();
    let mut prec = T::zero();
    let mut res = T::zero();
    for (i, &(x1, y1)) in pairs.iter().enumerate() {
        for &(x2, y2) in &pairs[i + 1..] {
            let dx = src.d(x1, x2);
            let dy = dst.d(y1, y2);
            acc = acc.max((dy - dx).abs());
            if x1 == x2 {
                prec = prec.max(dy);
            }
            if y1 == y2 {
                res = res.max(dx);
            }
        }
    }
    Ok(RelationStats {
        accuracy: acc,
        precision: prec,
        resolution: res,
    })
}

pub fn accuracy<T: Real>(
    src: &FiniteMetricSpace<T>,
    dst: &FiniteMetricSpace<T>,
    rel: &Relation,
) -> Result<T> {
    relation_stats(src, dst, rel).map(|s| s.accuracy)
}

fn density_witness<T: Real>(
    space: &FiniteMetricSpace<T>,
    set: &BTreeSet<usize>,
    r: T,
) -> Option<usize> {
    (0..space.len()).find(|&p| !set.iter().any(|&q| space.d(p, q) <= r))
}

/// Widens `rel` by closed balls of radii `eps` in the source and `mu` in the target.
pub fn bar_generalize<T: Real>(
    src: &FiniteMetricSpace<T>,
    dst: &FiniteMetricSpace<T>,
    rel: &Relation,
    eps: T,
    mu: T,
) -> Result<Relation> {
    rel.check(src, dst)?;
    if let Some(p) = density_witness(src, &rel.domain(), eps) {
        return Err(Error::DensityViolation {
            point: src.ids[p].clone(),
            radius: eps.as_f64(),
        });
    }
    if let Some(p) = density_witness(dst, &rel.image(), mu) {
        return Err(Error::DensityViolation {
            point: dst.ids[p].clone(),
            radius: mu.as_f64(),
        });
    }
    let mut out = BTreeSet::new();
    for x in 0..src.len() {
        for y in 0..dst.len() {
            if rel
                .pairs
                .iter()
                .any(|&(a, b)| src.d(x, a) <= eps && dst.d(y, b) <= mu)
            {
                out.insert((x, y));
            }
        }
    }
    Ok(Relation { pairs: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GhKind {
    Exact,
    UpperBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GhResult<T: Real> {
    pub value: T,
    pub kind: GhKind,
    pub witness: Relation,
}

impl<T: Real> GhResult<T> {
    /// `{value, kind, witness}` with the witness as id pairs.
    pub fn to_json(
        &self,
        src: &FiniteMetricSpace<T>,
        dst: &FiniteMetricSpace<T>,
    ) -> serde_json::Value {
        serde_json::json!({
            "value": self.value.as_f64(),
            "kind": self.kind,
            "witness": self.witness.id_pairs(src, dst),
        })
    }
}

/// Default bound on `|src| * |dst|` for exact enumeration.
pub const GH_EXACT_CAP: usize = 12;

/// Exact GH distance by enumerating correspondences.
pub fn gh_exact_small<T: Real>(
    src: &FiniteMetricSpace<T>,
    dst: &FiniteMetricSpace<T>,
    cap: usize,
) -> Result<GhResult<T>> {
    exact_search(src, dst, None, cap)
}

/// Exact pointed GH distance: correspondences must relate `x0` to `y0`.
pub fn gh_pointed<T: Real>(
    src: &FiniteMetricSpace<T>,
    x0: usize,
    dst: &FiniteMetricSpace<T>,
    y0: usize,
    cap: usize,
) -> Result<GhResult<T>> {
    if x0 >= src.len() {
        return Err(Error::UnknownPoint(format!("source index {x0}")));
    }
    if y0 >= dst.len() {
        return Err(Error::UnknownPoint(format!("target index {y0}")));
    }
    exact_search(src, dst, Some((x0, y0)), cap)
}

struct Search<'a, T: Real> {
    src: &'a FiniteMetricSpace<T>,
    dst: &'a FiniteMetricSpace<T>,
    forced: Option<(usize, usize)>,
    chosen: Vec<(usize, usize)>,
    best: T,
    best_rel: Option<Vec<(usize, usize)>>,
}

impl<T: Real> Search<'_, T> {
    fn run(&mut self, x: usize, acc: T, covered: u64) {
        let m = self.dst.len();
        if x == self.src.len() {
            if covered.count_ones() as usize == m && acc < self.best {
                self.best = acc;
                self.best_rel = Some(self.chosen.clone());
            }
            return;
        }
        // the remaining rows can cover at most all of them
        let remaining = self.src.len() - x;
        let missing = m - covered.count_ones() as usize;
        if missing > remaining * m {
            return;
        }
        for mask in 1u64..(1u64 << m) {
            if let Some((fx, fy)) = self.forced {
                if fx == x && mask & (1 << fy) == 0 {
                    continue;
                }
            }
            let mut a = acc;
            let base = self.chosen.len();
            let mut pruned = false;
            for y in 0..m {
                if mask & (1 << y) == 0 {
                    continue;
                }
                for k in 0..self.chosen.len() {
                    let (x2, y2) = self.chosen[k];
                    a = a.max((self.dst.d(y, y2) - self.src.d(x, x2)).abs());
                }
                if a >= self.best {
                    pruned = true;
                    break;
                }
                self.chosen.push((x, y));
            }
            if !pruned {
                self.run(x + 1, a, covered | mask);
            }
            self.chosen.truncate(base);
        }
    }
}

fn exact_search<T: Real>(
    src: &FiniteMetricSpace<T>,
    dst: &FiniteMetricSpace<T>,
    forced: Option<(usize, usize)>,
    cap: usize,
) -> Result<GhResult<T>> {
    let size = src.len() * dst.len();
    if size == 0 {
        return Err(Error::EmptyRelation);
    }
    if size > cap || dst.len() > 63 {
        return Err(Error::CapExceeded { size, cap });
    }
    let mut s = Search {
        src,
        dst,
        forced,
        chosen: Vec::new(),
        best: T::infinity(),
        best_rel: None,
    };
    s.run(0, T::zero(), 0);
    let pairs = s.best_rel.expect("full relation is always feasible");
    Ok(GhResult {
        value: s.best,
        kind: GhKind::Exact,
        witness: Relation::from_pairs(pairs),
    })
}

fn acc_of<T: Real>(
    src: &FiniteMetricSpace<T>,
    dst: &FiniteMetricSpace<T>,
    f: &[usize],
    g: &[usize],
) -> T {
    let mut pairs: Vec<(usize, usize)> = f.iter().enumerate().map(|(x, &y)| (x, y)).collect();
    pairs.extend(g.iter().enumerate().map(|(y, &x)| (x, y)));
    pairs.sort_unstable();
    pairs.dedup();
    let mut acc = T::zero();
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let (x1, y1) = pairs[i];
            let (x2, y2) = pairs[j];
            acc = acc.max((dst.d(y1, y2) - src.d(x1, x2)).abs());
        }
    }
    acc
}

fn improve<T: Real>(
    src: &FiniteMetricSpace<T>,
    dst: &FiniteMetricSpace<T>,
    f: &mut [usize],
    g: &mut [usize],
) -> T {
    let mut cur = acc_of(src, dst, f, g);
    for _ in 0..8 {
        let mut changed = false;
        for x in 0..f.len() {
            for y in 0..dst.len() {
                let keep = f[x];
                f[x] = y;
                let a = acc_of(src, dst, f, g);
                if a < cur {
                    cur = a;
                    changed = true;
                } else {
                    f[x] = keep;
                }
            }
        }
        for y in 0..g.len() {
            for x in 0..src.len() {
                let keep = g[y];
                g[y] = x;
                let a = acc_of(src, dst, f, g);
                if a < cur {
                    cur = a;
                    changed = true;
                } else {
                    g[y] = keep;
                }
            }
        }
        if !changed {
            break;
        }
    }
    cur
}

fn argmin_by<F: Fn(usize) -> f64>(n: usize, key: F) -> usize {
    (0..n)
        .min_by(|&a, &b| {
            key(a)
                .partial_cmp(&key(b))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(0)
}

/// Upper bound on the GH distance from map-pair correspondences.
pub fn gh_upper_bound<T: Real>(
    src: &FiniteMetricSpace<T>,
    dst: &FiniteMetricSpace<T>,
) -> Result<GhResult<T>> {
    let (n, m) = (src.len(), dst.len());
    if n == 0 || m == 0 {
        return Err(Error::EmptyRelation);
    }
    let mut starts: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    if let (Some(cx), Some(cy)) = (&src.coords, &dst.coords) {
        if cx.first().map(|v| v.len()) == cy.first().map(|v| v.len()) {
            let f = (0..n)
                .map(|x| argmin_by(m, |y| euclid(&cx[x], &cy[y]).as_f64()))
                .collect();
            let g = (0..m)
                .map(|y| argmin_by(n, |x| euclid(&cx[x], &cy[y]).as_f64()))
                .collect();
            starts.push((f, g));
        }
    }
    let anchors_a: Vec<usize> = (0..n).take(6).collect();
    let anchors_b: Vec<usize> = (0..m).take(6).collect();
    for &a in &anchors_a {
        for &b in &anchors_b {
            let f = (0..n)
                .map(|x| argmin_by(m, |y| (src.d(x, a) - dst.d(y, b)).abs().as_f64()))
                .collect();
            let g = (0..m)
                .map(|y| argmin_by(n, |x| (src.d(x, a) - dst.d(y, b)).abs().as_f64()))
                .collect();
            starts.push((f, g));
        }
    }
    let mut best: Option<(T, Vec<usize>, Vec<usize>)> = None;
    for (mut f, mut g) in starts {
        let v = improve(src, dst, &mut f, &mut g);
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, f, g));
        }
    }
    let (value, f, g) = best.expect("at least one start");
    let witness = Relation::from_pairs(
        f.iter()
            .enumerate()
            .map(|(x, &y)| (x, y))
            .chain(g.iter().enumerate().map(|(y, &x)| (x, y))),
    );
    Ok(GhResult {
        value,
        kind: GhKind::UpperBound,
        witness,
    })
}

/// Exact value when under the cap, otherwise the upper bound.
pub fn gh_distance<T: Real>(
    src: &FiniteMetricSpace<T>,
    dst: &FiniteMetricSpace<T>,
    cap: usize,
) -> Result<GhResult<T>> {
    match gh_exact_small(src, dst, cap) {
        Err(Error::CapExceeded { .. }) => gh_upper_bound(src, dst),
        other => other,
    }
}
