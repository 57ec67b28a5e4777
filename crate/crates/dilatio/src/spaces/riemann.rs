use crate::dilation::DilationStructure;
use crate::error::{Error, Result};
use crate::linalg::{bilinear, damped_step, fd_jacobian, identity, solve, Mat};
use crate::scalar::{norm, sub, Real};

/// Symmetric positive-definite metric tensor on a coordinate chart.
pub trait MetricTensorField<T: Real>: Send + Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn metric(&self, x: &[T]) -> Mat<T>;

    /// Christoffel symbols `Γ[k][i][j]`, by central differences of the metric.
    fn christoffel(&self, x: &[T]) -> Vec<Mat<T>> {
        let n = self.dim();
        let h = T::lit(1e-5);
        let mut dg: Vec<Mat<T>> = Vec::with_capacity(n);
        for l in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[l] += h;
            xm[l] -= h;
            let gp = self.metric(&xp);
            let gm = self.metric(&xm);
            dg.push(
                (0..n)
                    .map(|i| (0..n).map(|j| (gp[i][j] - gm[i][j]) / (h + h)).collect())
                    .collect(),
            );
        }
        let g = self.metric(x);
        let mut gamma = vec![vec![vec![T::zero(); n]; n]; n];
        for i in 0..n {
            for j in 0..n {
                // lowered symbols Γ_{l,ij}
                let low: Vec<T> = (0..n)
                    .map(|l| T::lit(0.5) * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]))
                    .collect();
                let up = solve(&g, &low).unwrap_or_else(|| vec![T::nan(); n]);
                for k in 0..n {
                    gamma[k][i][j] = up[k];
                }
            }
        }
        gamma
    }
}

/// Constant identity metric.
#[derive(Debug, Clone, Copy)]
pub struct FlatTensor {
    pub dim: usize,
}

impl<T: Real> MetricTensorField<T> for FlatTensor {
    fn name(&self) -> String {
        format!("flat {}", self.dim)
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn metric(&self, _x: &[T]) -> Mat<T> {
        identity(self.dim)
    }
    fn christoffel(&self, _x: &[T]) -> Vec<Mat<T>> {
        vec![vec![vec![T::zero(); self.dim]; self.dim]; self.dim]
    }
}

/// Unit round sphere in the stereographic chart centred at the north pole:
/// `g = 4 / (1 + |p|²)² I`.
#[derive(Debug, Clone, Copy, Default)]
pub struct StereographicSphereTensor;

impl<T: Real> MetricTensorField<T> for StereographicSphereTensor {
    fn name(&self) -> String {
        "sphere".into()
    }
    fn dim(&self) -> usize {
        2
    }
    fn metric(&self, x: &[T]) -> Mat<T> {
        let q = T::one() + x[0] * x[0] + x[1] * x[1];
        let f = T::lit(4.0) / (q * q);
        vec![vec![f, T::zero()], vec![T::zero(), f]]
    }
    fn christoffel(&self, x: &[T]) -> Vec<Mat<T>> {
        let q = T::one() + x[0] * x[0] + x[1] * x[1];
        let dphi = [-T::lit(2.0) * x[0] / q, -T::lit(2.0) * x[1] / q];
        let mut gamma = vec![vec![vec![T::zero(); 2]; 2]; 2];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut v = T::zero();
                    if i == k {
                        v += dphi[j];
                    }
                    if j == k {
                        v += dphi[i];
                    }
                    if i == j {
                        v -= dphi[k];
                    }
                    gamma[k][i][j] = v;
                }
            }
        }
        gamma
    }
}

/// A chart with a geodesic exponential and its inverse.
pub trait ExpChart<T: Real>: Send + Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn metric_at(&self, x: &[T]) -> Mat<T>;
    fn exp(&self, x: &[T], v: &[T]) -> Vec<T>;
    fn log(&self, x: &[T], y: &[T]) -> Result<Vec<T>>;
    /// Largest distance from a base point at which log is trusted.
    fn injectivity_bound(&self) -> T;
    fn origin(&self) -> Vec<T> {
        vec![T::zero(); self.dim()]
    }

    fn tangent_norm(&self, x: &[T], v: &[T]) -> T {
        bilinear(&self.metric_at(x), v, v).max(T::zero()).sqrt()
    }

    /// Geodesic distance, `|log_x y|_{g_x}` unless overridden.
    fn distance(&self, x: &[T], y: &[T]) -> T {
        match self.log(x, y) {
            Ok(v) => self.tangent_norm(x, &v),
            Err(_) => T::infinity(),
        }
    }
}

/// Numerical integration settings for geodesics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeConfig {
    /// RK4 steps per unit of initial speed.
    pub steps_per_unit: f64,
    pub newton_tol: f64,
    pub newton_iters: usize,
}

impl Default for OdeConfig {
    fn default() -> Self {
        OdeConfig {
            steps_per_unit: 40.0,
            newton_tol: 1e-13,
            newton_iters: 60,
        }
    }
}

/// Riemannian chart with exp by RK4 and log by damped Newton shooting.
pub struct NumericExpChart<F> {
    pub field: F,
    pub ode: OdeConfig,
    pub bound: f64,
}

impl<F> NumericExpChart<F> {
    pub fn new(field: F, bound: f64) -> Self {
        NumericExpChart {
            field,
            ode: OdeConfig::default(),
            bound,
        }
    }
}

fn accel<T: Real, F: MetricTensorField<T>>(field: &F, x: &[T], v: &[T]) -> Vec<T> {
    {
        let g = field.christoffel(x);
        let n = x.len();
        (0..n)
            .map(|k| {
                let mut s = T::zero();
                for i in 0..n {
                    for j in 0..n {
                        s += g[k][i][j] * v[i] * v[j];
                    }
                }
                -s
            })
            .collect()
    }
}

impl<T: Real, F: MetricTensorField<T>> ExpChart<T> for NumericExpChart<F> {
    fn name(&self) -> String {
        format!("riemannian({})", self.field.name())
    }
    fn dim(&self) -> usize {
        self.field.dim()
    }
    fn metric_at(&self, x: &[T]) -> Mat<T> {
        self.field.metric(x)
    }
    fn injectivity_bound(&self) -> T {
        T::lit(self.bound)
    }

    fn exp(&self, x: &[T], v: &[T]) -> Vec<T> {
        let speed = self.tangent_norm(x, v).as_f64();
        let steps = (self.ode.steps_per_unit * speed).ceil().max(1.0) as usize;
        let h = T::one() / T::of(steps);
        let half = T::lit(0.5);
        let mut p = x.to_vec();
        let mut q = v.to_vec();
        let comb = |a: &[T], s: T, b: &[T]| -> Vec<T> {
            a.iter().zip(b).map(|(&u, &w)| u + s * w).collect()
        };
        for _ in 0..steps {
            let k1x = q.clone();
            let k1v = accel(&self.field, &p, &q);
            let p2 = comb(&p, half * h, &k1x);
            let q2 = comb(&q, half * h, &k1v);
            let k2x = q2.clone();
            let k2v = accel(&self.field, &p2, &q2);
            let p3 = comb(&p, half * h, &k2x);
            let q3 = comb(&q, half * h, &k2v);
            let k3x = q3.clone();
            let k3v = accel(&self.field, &p3, &q3);
            let p4 = comb(&p, h, &k3x);
            let q4 = comb(&q, h, &k3v);
            let k4x = q4.clone();
            let k4v = accel(&self.field, &p4, &q4);
            let six = T::lit(6.0);
            for i in 0..p.len() {
                p[i] += h / six * (k1x[i] + T::lit(2.0) * (k2x[i] + k3x[i]) + k4x[i]);
                q[i] += h / six * (k1v[i] + T::lit(2.0) * (k2v[i] + k3v[i]) + k4v[i]);
            }
        }
        p
    }

    fn log(&self, x: &[T], y: &[T]) -> Result<Vec<T>> {
        let f = |v: &[T]| -> Option<Vec<T>> { Some(sub(&self.exp(x, v), y)) };
        let mut v = sub(y, x);
        let mut r = f(&v).expect("total");
        let tol = T::lit(self.ode.newton_tol) * (T::one() + norm(y));
        let mut lambda = T::lit(1e-12);
        for _ in 0..self.ode.newton_iters {
            let rn = norm(&r);
            if rn <= tol {
                return Ok(v);
            }
            let jac = fd_jacobian(&f, &v, &r, T::lit(1e-7)).ok_or(Error::NoLog {
                residual: rn.as_f64(),
            })?;
            let mut accepted = false;
            for _ in 0..30 {
                let Some(dv) = damped_step(&jac, &r, lambda) else {
                    lambda *= T::lit(10.0);
                    continue;
                };
                let cand: Vec<T> = v.iter().zip(&dv).map(|(&a, &b)| a + b).collect();
                let rc = f(&cand).expect("total");
                if norm(&rc) < rn {
                    v = cand;
                    r = rc;
                    lambda = (lambda * T::lit(0.1)).max(T::lit(1e-15));
                    accepted = true;
                    break;
                }
                lambda = (lambda * T::lit(10.0)).max(T::lit(1e-12));
            }
            if !accepted {
                break;
            }
        }
        let rn = norm(&r);
        if rn <= tol * T::lit(1e3) {
            Ok(v)
        } else {
            Err(Error::NoLog {
                residual: rn.as_f64(),
            })
        }
    }
}

/// Unit sphere in the stereographic chart with closed-form great circles.
#[derive(Debug, Clone, Copy)]
pub struct SphereChart {
    pub bound: f64,
}

impl Default for SphereChart {
    fn default() -> Self {
        SphereChart { bound: 2.5 }
    }
}

fn to_sphere<T: Real>(p: &[T]) -> [T; 3] {
    let q = T::one() + p[0] * p[0] + p[1] * p[1];
    let two = T::lit(2.0);
    [
        two * p[0] / q,
        two * p[1] / q,
        (T::one() - p[0] * p[0] - p[1] * p[1]) / q,
    ]
}

fn from_sphere<T: Real>(s: [T; 3]) -> Vec<T> {
    let d = T::one() + s[2];
    vec![s[0] / d, s[1] / d]
}

/// Tangent frame `∂P/∂p_1, ∂P/∂p_2` at chart point `p`.
fn frame<T: Real>(p: &[T]) -> [[T; 3]; 2] {
    let q = T::one() + p[0] * p[0] + p[1] * p[1];
    let two = T::lit(2.0);
    let q2 = q * q;
    let (a, b) = (p[0], p[1]);
    [
        [
            two * (q - two * a * a) / q2,
            -two * two * a * b / q2,
            -two * two * a / q2,
        ],
        [
            -two * two * a * b / q2,
            two * (q - two * b * b) / q2,
            -two * two * b / q2,
        ],
    ]
}

fn d3<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl SphereChart {
    /// Great-circle angle between chart points.
    pub fn angle<T: Real>(&self, x: &[T], y: &[T]) -> T {
        let (a, b) = (to_sphere(x), to_sphere(y));
        let c = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        d3(&c, &c).sqrt().atan2(d3(&a, &b))
    }
}

impl<T: Real> ExpChart<T> for SphereChart {
    fn name(&self) -> String {
        "sphere".into()
    }
    fn dim(&self) -> usize {
        2
    }
    fn metric_at(&self, x: &[T]) -> Mat<T> {
        MetricTensorField::<T>::metric(&StereographicSphereTensor, x)
    }
    fn injectivity_bound(&self) -> T {
        T::lit(self.bound)
    }

    fn distance(&self, x: &[T], y: &[T]) -> T {
        self.angle(x, y)
    }

    fn exp(&self, x: &[T], v: &[T]) -> Vec<T> {
        let p = to_sphere(x);
        let f = frame(x);
        let w = [
            f[0][0] * v[0] + f[1][0] * v[1],
            f[0][1] * v[0] + f[1][1] * v[1],
            f[0][2] * v[0] + f[1][2] * v[1],
        ];
        let t = d3(&w, &w).sqrt();
        if t == T::zero() {
            return x.to_vec();
        }
        let (s, c) = t.sin_cos();
        from_sphere([
            p[0] * c + w[0] / t * s,
            p[1] * c + w[1] / t * s,
            p[2] * c + w[2] / t * s,
        ])
    }

    fn log(&self, x: &[T], y: &[T]) -> Result<Vec<T>> {
        let p = to_sphere(x);
        let q = to_sphere(y);
        let cosang = d3(&p, &q);
        let perp = [
            q[0] - cosang * p[0],
            q[1] - cosang * p[1],
            q[2] - cosang * p[2],
        ];
        let sn = d3(&perp, &perp).sqrt();
        let ang = sn.atan2(cosang);
        if ang > T::lit(self.bound) {
            return Err(Error::NoLog {
                residual: ang.as_f64(),
            });
        }
        if sn == T::zero() {
            return Ok(vec![T::zero(), T::zero()]);
        }
        let w = [perp[0] / sn * ang, perp[1] / sn * ang, perp[2] / sn * ang];
        let f = frame(x);
        let lam2 = d3(&f[0], &f[0]);
        Ok(vec![d3(&w, &f[0]) / lam2, d3(&w, &f[1]) / lam2])
    }
}

/// Dilation structure `δ^x_ε y = exp_x(ε log_x y)` with `d(x,y) = |log_x y|_{g_x}`.
pub struct ExpSpace<C> {
    pub chart: C,
}

impl<C> ExpSpace<C> {
    pub fn new(chart: C) -> Self {
        ExpSpace { chart }
    }
}

impl ExpSpace<SphereChart> {
    pub fn sphere() -> Self {
        ExpSpace::new(SphereChart::default())
    }
}

impl<T: Real, C: ExpChart<T>> DilationStructure<T> for ExpSpace<C> {
    fn name(&self) -> String {
        self.chart.name()
    }
    fn dim(&self) -> usize {
        self.chart.dim()
    }
    fn dist(&self, x: &[T], y: &[T]) -> T {
        self.chart.distance(x, y)
    }
    fn dilate_raw(&self, x: &[T], eps: T, y: &[T]) -> Vec<T> {
        match self.chart.log(x, y) {
            Ok(v) => self
                .chart
                .exp(x, &v.iter().map(|&a| a * eps).collect::<Vec<T>>()),
            Err(_) => vec![T::nan(); x.len()],
        }
    }
    fn domain_radius(&self, _x: &[T]) -> T {
        self.chart.injectivity_bound()
    }
    fn origin(&self) -> Vec<T> {
        self.chart.origin()
    }
    fn dil(&self, x: &[T], eps: T, y: &[T]) -> Result<Vec<T>> {
        if !(eps > T::zero()) || !eps.is_finite() {
            return Err(Error::OutOfDomain(format!("dilation coefficient {eps}")));
        }
        let v = self
            .chart
            .log(x, y)
            .map_err(|e| Error::OutOfDomain(e.to_string()))?;
        let r = self.chart.injectivity_bound();
        let d = self.chart.tangent_norm(x, &v);
        if !(d <= r) || !(d * eps <= r) {
            return Err(Error::OutOfDomain(format!(
                "distance {} or its dilation exceeds radius {r}",
                d
            )));
        }
        Ok(self
            .chart
            .exp(x, &v.iter().map(|&a| a * eps).collect::<Vec<T>>()))
    }
}

/// Great-circle distance between stereographic chart points.
pub fn sphere_distance<T: Real>(x: &[T], y: &[T]) -> T {
    SphereChart::default().angle(x, y)
}
