use serde::{Deserialize, Serialize};

use crate::dilation::DilationStructure;
use crate::error::{Error, Result};
use crate::scalar::{norm, Real};

/// Bracket table `{step, dims, brackets: [[i, j, k, c]]}` meaning `[e_i, e_j] = c e_k`.
///
/// Indices are 0-based; `dims` lists the dimension of each layer and
/// `[e_j, e_i] = -c e_k` is implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketTable {
    pub step: usize,
    pub dims: Vec<usize>,
    pub brackets: Vec<(usize, usize, usize, f64)>,
}

impl BracketTable {
    pub fn heisenberg() -> Self {
        BracketTable {
            step: 2,
            dims: vec![2, 1],
            brackets: vec![(0, 1, 2, 1.0)],
        }
    }

    /// `ℝⁿ` as an abelian group of step 1.
    pub fn abelian(n: usize) -> Self {
        BracketTable {
            step: 1,
            dims: vec![n],
            brackets: vec![],
        }
    }

    /// Engel-type group of step 3: `[e0,e1] = e2`, `[e0,e2] = e3`.
    pub fn engel() -> Self {
        BracketTable {
            step: 3,
            dims: vec![2, 1, 1],
            brackets: vec![(0, 1, 2, 1.0), (0, 2, 3, 1.0)],
        }
    }

    /// Free nilpotent group of step 2 on three generators.
    pub fn free_step2_rank3() -> Self {
        BracketTable {
            step: 2,
            dims: vec![3, 3],
            brackets: vec![(0, 1, 3, 1.0), (0, 2, 4, 1.0), (1, 2, 5, 1.0)],
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidBrackets(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum Gauge<T: Real> {
    /// `((a²+b²)² + 16 (c/κ)²)^{1/4}` for Heisenberg-shaped groups with `[e0,e1] = κ e2`.
    Koranyi { kappa: T },
    /// `max_i λ_i |x_i|^{1/i}` over layers.
    Max { lambda2: T, lambda3: T },
}

/// Graded nilpotent group of step at most 3 in exponential coordinates.
#[derive(Debug, Clone)]
pub struct CarnotGroup<T: Real> {
    pub table: BracketTable,
    pub deg: Vec<u32>,
    /// Antisymmetrized structure constants `(i, j, k, c)` with `i != j`.
    consts: Vec<(usize, usize, usize, T)>,
    pub gauge: Gauge<T>,
    /// Bound `|[a,b]| <= beta |a| |b|`.
    pub beta: T,
}

impl<T: Real> CarnotGroup<T> {
    pub fn heisenberg() -> Self {
        Self::new(BracketTable::heisenberg()).expect("valid table")
    }

    pub fn new(table: BracketTable) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidBrackets(m));
        if table.step == 0 || table.step != table.dims.len() {
            return bad(format!(
                "step {} does not match {} layers",
                table.step,
                table.dims.len()
            ));
        }
        if table.step > 3 {
            return Err(Error::Unsupported(format!("step {} > 3", table.step)));
        }
        if table.dims.contains(&0) {
            return bad("empty layer".into());
        }
        let deg: Vec<u32> = table
            .dims
            .iter()
            .enumerate()
            .flat_map(|(l, &d)| std::iter::repeat_n(l as u32 + 1, d))
            .collect();
        let n = deg.len();
        let mut dense = vec![vec![vec![0f64; n]; n]; n];
        for &(i, j, k, c) in &table.brackets {
            if i >= n || j >= n || k >= n {
                return bad(format!("index out of range in [{i},{j},{k}]"));
            }
            if i == j {
                if c != 0.0 {
                    return bad(format!("[e{i},e{i}] must vanish"));
                }
                continue;
            }
            if !c.is_finite() {
                return bad("non-finite structure constant".into());
            }
            if deg[k] != deg[i] + deg[j] {
                return bad(format!("[e{i},e{j}] -> e{k} violates the grading"));
            }
            let prev = dense[j][i][k];
            if prev != 0.0 && prev != -c {
                return bad(format!("[e{i},e{j}] given inconsistently"));
            }
            dense[i][j][k] = c;
            dense[j][i][k] = -c;
        }
        let mut consts = Vec::new();
        let mut fro = 0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = dense[i][j][k];
                    if c != 0.0 {
                        consts.push((i, j, k, T::lit(c)));
                        fro += c * c;
                    }
                }
            }
        }
        let beta = T::lit((fro / 2.0).sqrt().max(1e-300));
        let mut g = CarnotGroup {
            table: table.clone(),
            deg,
            consts,
            gauge: Gauge::Max {
                lambda2: T::one(),
                lambda3: T::one(),
            },
            beta,
        };
        g.check_generation()?;
        g.check_jacobi()?;
        g.gauge = g.choose_gauge();
        Ok(g)
    }

    fn choose_gauge(&self) -> Gauge<T> {
        let t = &self.table;
        if t.dims == [2, 1] && self.consts.len() == 2 {
            let kappa = self
                .consts
                .iter()
                .find(|c| c.0 == 0 && c.1 == 1)
                .map(|c| c.3)
                .unwrap_or(T::one());
            return Gauge::Koranyi { kappa };
        }
        let b = self.beta;
        let l2sq = T::lit(4.0) / b;
        let lambda2 = l2sq.sqrt();
        let l3cube = T::lit(3.0) / (b / (T::lit(2.0) * l2sq) + b * b / T::lit(12.0));
        Gauge::Max {
            lambda2,
            lambda3: l3cube.cbrt(),
        }
    }

    pub fn dim(&self) -> usize {
        self.deg.len()
    }

    pub fn step(&self) -> usize {
        self.table.step
    }

    /// Homogeneous dimension `Σ i dim V_i`.
    pub fn homogeneous_dim(&self) -> usize {
        self.deg.iter().map(|&d| d as usize).sum()
    }

    pub fn horizontal_dim(&self) -> usize {
        self.table.dims[0]
    }

    /// Index range of layer `l` (1-based).
    pub fn layer(&self, l: usize) -> std::ops::Range<usize> {
        let start: usize = self.table.dims[..l - 1].iter().sum();
        start..start + self.table.dims[l - 1]
    }

    pub fn bracket(&self, a: &[T], b: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        for &(i, j, k, c) in &self.consts {
            out[k] += c * a[i] * b[j];
        }
        out
    }

    fn check_generation(&self) -> Result<()> {
        for l in 2..=self.step() {
            let mut vecs = Vec::new();
            for i in self.layer(1) {
                for j in self.layer(l - 1) {
                    let mut ei = vec![T::zero(); self.dim()];
                    let mut ej = vec![T::zero(); self.dim()];
                    ei[i] = T::one();
                    ej[j] = T::one();
                    let b = self.bracket(&ei, &ej);
                    vecs.push(self.layer(l).map(|k| b[k].as_f64()).collect::<Vec<f64>>());
                }
            }
            if rank(vecs, self.table.dims[l - 1]) < self.table.dims[l - 1] {
                return Err(Error::InvalidBrackets(format!(
                    "layer {l} is not generated by brackets with the first layer"
                )));
            }
        }
        Ok(())
    }

    fn check_jacobi(&self) -> Result<()> {
        let n = self.dim();
        let e = |i: usize| {
            let mut v = vec![T::zero(); n];
            v[i] = T::one();
            v
        };
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let (ea, eb, ec) = (e(a), e(b), e(c));
                    let t1 = self.bracket(&ea, &self.bracket(&eb, &ec));
                    let t2 = self.bracket(&eb, &self.bracket(&ec, &ea));
                    let t3 = self.bracket(&ec, &self.bracket(&ea, &eb));
                    if (0..n).any(|k| (t1[k] + t2[k] + t3[k]).abs() > T::lit(1e-12)) {
                        return Err(Error::InvalidBrackets(format!(
                            "Jacobi identity fails on (e{a}, e{b}, e{c})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Truncated BCH product.
    pub fn multiply(&self, g: &[T], h: &[T]) -> Vec<T> {
        let mut out: Vec<T> = g.iter().zip(h).map(|(&a, &b)| a + b).collect();
        if self.step() >= 2 {
            let gh = self.bracket(g, h);
            for (o, b) in out.iter_mut().zip(&gh) {
                *o += *b * T::lit(0.5);
            }
            if self.step() >= 3 {
                let hg: Vec<T> = gh.iter().map(|&x| -x).collect();
                let t1 = self.bracket(g, &gh);
                let t2 = self.bracket(h, &hg);
                let c = T::lit(1.0 / 12.0);
                for k in 0..out.len() {
                    out[k] += c * (t1[k] + t2[k]);
                }
            }
        }
        out
    }

    pub fn invert(&self, g: &[T]) -> Vec<T> {
        g.iter().map(|&a| -a).collect()
    }

    /// `g⁻¹ h`
    pub fn left_quotient(&self, g: &[T], h: &[T]) -> Vec<T> {
        self.multiply(&self.invert(g), h)
    }

    pub fn dilate(&self, eps: T, g: &[T]) -> Vec<T> {
        g.iter()
            .zip(&self.deg)
            .map(|(&a, &d)| a * eps.powi(d as i32))
            .collect()
    }

    fn layer_norm(&self, g: &[T], l: usize) -> T {
        norm(&g[self.layer(l)])
    }

    /// Homogeneous gauge, `‖δ_ε g‖ = ε ‖g‖`.
    pub fn gauge_norm(&self, g: &[T]) -> T {
        match self.gauge {
            Gauge::Koranyi { kappa } => {
                let h = g[0] * g[0] + g[1] * g[1];
                let c = g[2] / kappa;
                (h * h + T::lit(16.0) * c * c).sqrt().sqrt()
            }
            Gauge::Max { lambda2, lambda3 } => {
                let mut m = self.layer_norm(g, 1);
                if self.step() >= 2 {
                    m = m.max(lambda2 * self.layer_norm(g, 2).sqrt());
                }
                if self.step() >= 3 {
                    m = m.max(lambda3 * self.layer_norm(g, 3).cbrt());
                }
                m
            }
        }
    }

    /// Left-invariant gauge distance `‖g⁻¹ h‖`.
    pub fn gauge_dist(&self, g: &[T], h: &[T]) -> T {
        self.gauge_norm(&self.left_quotient(g, h))
    }

    /// Horizontal element `exp(v)` for `v ∈ V_1`.
    pub fn horizontal(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        out[..v.len()].copy_from_slice(v);
        out
    }

    /// Pairs of first-layer indices whose brackets span layer 2, with the
    /// coordinates of `r2` in that spanning set.
    fn layer2_pairs(&self, r: &[T]) -> Vec<(usize, usize, T)> {
        let l1 = self.layer(1);
        let l2 = self.layer(2);
        let mut chosen: Vec<(usize, usize, Vec<f64>)> = Vec::new();
        for i in l1.clone() {
            for j in l1.clone() {
                if i >= j {
                    continue;
                }
                let mut ei = vec![T::zero(); self.dim()];
                let mut ej = vec![T::zero(); self.dim()];
                ei[i] = T::one();
                ej[j] = T::one();
                let b = self.bracket(&ei, &ej);
                let col: Vec<f64> = l2.clone().map(|k| b[k].as_f64()).collect();
                let mut cand: Vec<Vec<f64>> = chosen.iter().map(|c| c.2.clone()).collect();
                cand.push(col.clone());
                if rank(cand, l2.len()) > chosen.len() {
                    chosen.push((i, j, col));
                }
            }
        }
        solve_in_span(
            &chosen.iter().map(|c| c.2.clone()).collect::<Vec<_>>(),
            &r[l2].iter().map(|x| x.as_f64()).collect::<Vec<_>>(),
        )
        .into_iter()
        .zip(&chosen)
        .map(|(g, c)| (c.0, c.1, T::lit(g)))
        .collect()
    }

    fn layer3_triples(&self, r: &[T]) -> Vec<(usize, usize, usize, T)> {
        let l1 = self.layer(1);
        let l3 = self.layer(3);
        let mut chosen: Vec<(usize, usize, usize, Vec<f64>)> = Vec::new();
        for i in l1.clone() {
            for j in l1.clone() {
                for k in l1.clone() {
                    if j >= k {
                        continue;
                    }
                    let e = |a: usize| {
                        let mut v = vec![T::zero(); self.dim()];
                        v[a] = T::one();
                        v
                    };
                    let b = self.bracket(&e(i), &self.bracket(&e(j), &e(k)));
                    let col: Vec<f64> = l3.clone().map(|q| b[q].as_f64()).collect();
                    let mut cand: Vec<Vec<f64>> = chosen.iter().map(|c| c.3.clone()).collect();
                    cand.push(col.clone());
                    if rank(cand, l3.len()) > chosen.len() {
                        chosen.push((i, j, k, col));
                    }
                }
            }
        }
        solve_in_span(
            &chosen.iter().map(|c| c.3.clone()).collect::<Vec<_>>(),
            &r[l3].iter().map(|x| x.as_f64()).collect::<Vec<_>>(),
        )
        .into_iter()
        .zip(&chosen)
        .map(|(g, c)| (c.0, c.1, c.2, T::lit(g)))
        .collect()
    }

    fn unit(&self, i: usize, s: T) -> Vec<T> {
        let mut v = vec![T::zero(); self.dim()];
        v[i] = s;
        v
    }

    /// Group commutator `a b a⁻¹ b⁻¹`.
    pub fn commutator(&self, a: &[T], b: &[T]) -> Vec<T> {
        let ab = self.multiply(a, b);
        let abai = self.multiply(&ab, &self.invert(a));
        self.multiply(&abai, &self.invert(b))
    }

    /// Upper bound for the CC norm from an explicit horizontal decomposition:
    /// a straight first-layer move, square commutator loops for layer 2
    /// (cost `4√|γ|`) and nested commutators for layer 3 (cost `10|γ|^{1/3}`).
    pub fn cc_norm_upper(&self, g: &[T]) -> T {
        self.cc_decomposition(g).0
    }

    /// Horizontal word realizing `g`, with its total length.
    pub fn cc_decomposition(&self, g: &[T]) -> (T, Vec<Vec<T>>) {
        let m = self.horizontal_dim();
        let mut word: Vec<Vec<T>> = Vec::new();
        let x1: Vec<T> = g[..m].to_vec();
        let mut len = norm(&x1);
        if len > T::zero() {
            word.push(x1.clone());
        }
        let mut acc = self.horizontal(&x1);
        if self.step() >= 2 {
            let r = self.left_quotient(&acc, g);
            for (i, j, gamma) in self.layer2_pairs(&r) {
                if gamma == T::zero() {
                    continue;
                }
                let s = gamma.abs().sqrt();
                let a = self.unit(i, if gamma > T::zero() { s } else { -s });
                let b = self.unit(j, s);
                for piece in [a.clone(), b.clone(), self.invert(&a), self.invert(&b)] {
                    acc = self.multiply(&acc, &piece);
                    word.push(piece[..m].to_vec());
                }
                len += T::lit(4.0) * s;
            }
        }
        if self.step() >= 3 {
            let r = self.left_quotient(&acc, g);
            for (i, j, k, gamma) in self.layer3_triples(&r) {
                if gamma == T::zero() {
                    continue;
                }
                let s = gamma.abs().cbrt();
                let a = self.unit(i, if gamma > T::zero() { s } else { -s });
                let b = self.unit(j, s);
                let c = self.unit(k, s);
                let inner = [b.clone(), c.clone(), self.invert(&b), self.invert(&c)];
                let inner_inv = [c.clone(), b.clone(), self.invert(&c), self.invert(&b)];
                let mut pieces = vec![a.clone()];
                pieces.extend(inner.iter().cloned());
                pieces.push(self.invert(&a));
                pieces.extend(inner_inv.iter().cloned());
                for piece in pieces {
                    acc = self.multiply(&acc, &piece);
                    word.push(piece[..m].to_vec());
                }
                len += T::lit(10.0) * s;
            }
        }
        (len, word)
    }
}

fn rank(mut rows: Vec<Vec<f64>>, width: usize) -> usize {
    let mut r = 0;
    for c in 0..width {
        let Some(p) = (r..rows.len())
            .max_by(|&a, &b| rows[a][c].abs().partial_cmp(&rows[b][c].abs()).unwrap())
        else {
            break;
        };
        if rows[p][c].abs() < 1e-10 {
            continue;
        }
        rows.swap(r, p);
        for q in 0..rows.len() {
            if q != r {
                let f = rows[q][c] / rows[r][c];
                for k in c..width {
                    let v = rows[r][k];
                    rows[q][k] -= f * v;
                }
            }
        }
        r += 1;
    }
    r
}

/// Coefficients expressing `target` in the independent columns `cols`.
fn solve_in_span(cols: &[Vec<f64>], target: &[f64]) -> Vec<f64> {
    let n = cols.len();
    if n == 0 {
        return vec![];
    }
    // normal equations
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = cols[i].iter().zip(&cols[j]).map(|(x, y)| x * y).sum();
        }
        b[i] = cols[i].iter().zip(target).map(|(x, y)| x * y).sum();
    }
    crate::linalg::solve(&a, &b).unwrap_or_else(|| vec![0.0; n])
}

/// Carnot group with its gauge distance and dilations `x δ_ε(x⁻¹ y)`.
#[derive(Debug, Clone)]
pub struct CarnotSpace<T: Real> {
    pub group: CarnotGroup<T>,
    pub label: String,
}

impl<T: Real> CarnotSpace<T> {
    pub fn new(group: CarnotGroup<T>, label: impl Into<String>) -> Self {
        CarnotSpace {
            group,
            label: label.into(),
        }
    }

    pub fn heisenberg() -> Self {
        Self::new(CarnotGroup::heisenberg(), "carnot(heisenberg)")
    }
}

impl<T: Real> DilationStructure<T> for CarnotSpace<T> {
    fn name(&self) -> String {
        self.label.clone()
    }
    fn dim(&self) -> usize {
        self.group.dim()
    }
    fn dist(&self, x: &[T], y: &[T]) -> T {
        self.group.gauge_dist(x, y)
    }
    fn dilate_raw(&self, x: &[T], eps: T, y: &[T]) -> Vec<T> {
        let g = &self.group;
        g.multiply(x, &g.dilate(eps, &g.left_quotient(x, y)))
    }
}
