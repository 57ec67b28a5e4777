use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve, Mat};
use crate::scalar::Real;
use crate::spaces::CarnotGroup;

use super::{integrate_horizontal, HorizontalControlCurve};

/// Settings for [`cc_distance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CcConfig<T: Real> {
    /// Cell counts, refined in order with warm starts.
    pub cells: Vec<usize>,
    pub starts: usize,
    pub seed: u64,
    /// Required max-norm endpoint error of the witness.
    pub endpoint_tol: T,
    pub initial_penalty: T,
    pub max_doublings: usize,
    pub lm_iters: usize,
}

impl<T: Real> Default for CcConfig<T> {
    fn default() -> Self {
        CcConfig {
            cells: vec![8, 16, 32],
            starts: 8,
            seed: 0,
            endpoint_tol: T::lit(1e-8),
            initial_penalty: T::lit(100.0),
            max_doublings: 40,
            lm_iters: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TraceRow<T: Real> {
    pub cells: usize,
    /// Outer penalty round; `endpoint_error` is measured for the target
    /// rescaled to unit gauge.
    pub iteration: usize,
    pub penalty: T,
    pub length: T,
    pub endpoint_error: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CcResult<T: Real> {
    /// Length of the witness; an upper bound for the CC distance when certified.
    pub value: T,
    pub witness: HorizontalControlCurve<T>,
    pub endpoint: Vec<T>,
    pub endpoint_error: T,
    /// The witness meets the endpoint tolerance.
    pub certified: bool,
    /// Multistart that produced the witness.
    pub start: usize,
    /// Best value of every start, in start order.
    pub start_values: Vec<T>,
    pub trace: Vec<TraceRow<T>>,
}

impl<T: Real> CcResult<T> {
    /// `cells,iteration,penalty,length,endpoint_error`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("cells,iteration,penalty,length,endpoint_error\n");
        for r in &self.trace {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.cells,
                r.iteration,
                r.penalty.as_f64(),
                r.length.as_f64(),
                r.endpoint_error.as_f64()
            ));
        }
        out
    }
}

struct Problem<'a, T: Real> {
    group: &'a CarnotGroup<T>,
    target: Vec<T>,
    m: usize,
}

impl<T: Real> Problem<'_, T> {
    fn endpoint(&self, u: &[T], n: usize) -> Vec<T> {
        let dt = T::one() / T::of(n);
        let mut p = vec![T::zero(); self.group.dim()];
        for cell in u.chunks(self.m) {
            let step: Vec<T> = cell.iter().map(|&c| c * dt).collect();
            p = self.group.multiply(&p, &self.group.horizontal(&step));
        }
        p
    }

    fn residual(&self, u: &[T], n: usize) -> Vec<T> {
        self.shifted_residual(u, n, &self.target)
    }

    fn shifted_residual(&self, u: &[T], n: usize, aim: &[T]) -> Vec<T> {
        self.endpoint(u, n)
            .iter()
            .zip(aim)
            .map(|(a, b)| *a - *b)
            .collect()
    }

    /// Central-difference Jacobian of the endpoint map, `dim × N`.
    ///
    /// Prefix and suffix products are shared, so each column costs two
    /// group products.
    fn jacobian(&self, u: &[T], n: usize) -> Mat<T> {
        let g = self.group;
        let k = g.dim();
        let dt = T::one() / T::of(n);
        let steps: Vec<Vec<T>> = u
            .chunks(self.m)
            .map(|c| g.horizontal(&c.iter().map(|&v| v * dt).collect::<Vec<_>>()))
            .collect();
        let mut prefix = vec![vec![T::zero(); k]];
        for h in &steps {
            let last = prefix.last().expect("nonempty");
            prefix.push(g.multiply(last, h));
        }
        let mut suffix = vec![vec![T::zero(); k]; n + 1];
        for c in (0..n).rev() {
            suffix[c] = g.multiply(&steps[c], &suffix[c + 1]);
        }
        let mut jac = vec![vec![T::zero(); u.len()]; k];
        for c in 0..n {
            for i in 0..self.m {
                let idx = c * self.m + i;
                let h = T::lit(1e-6) * (T::one() + u[idx].abs());
                let eval = |delta: T| {
                    let mut cell = u[c * self.m..(c + 1) * self.m].to_vec();
                    cell[i] += delta;
                    let step = g.horizontal(&cell.iter().map(|&v| v * dt).collect::<Vec<_>>());
                    g.multiply(&g.multiply(&prefix[c], &step), &suffix[c + 1])
                };
                let fp = eval(h);
                let fm = eval(-h);
                for r in 0..k {
                    jac[r][idx] = (fp[r] - fm[r]) / (h + h);
                }
            }
        }
        jac
    }

    fn objective(&self, u: &[T], n: usize, w: T, aim: &[T]) -> T {
        let dt = T::one() / T::of(n);
        let e: T = u.iter().map(|&c| c * c).sum::<T>() * dt;
        let r: T = self
            .shifted_residual(u, n, aim)
            .iter()
            .map(|&c| c * c)
            .sum();
        e + w * r
    }
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, c| m.max(c.abs()))
}

/// `(a I + w AᵀA)⁻¹ g` through the `dim × dim` system of the Woodbury identity.
fn woodbury<T: Real>(jac: &Mat<T>, a: T, w: T, g: &[T]) -> Option<Vec<T>> {
    let k = jac.len();
    let mut small = vec![vec![T::zero(); k]; k];
    for i in 0..k {
        for j in 0..k {
            small[i][j] = jac[i].iter().zip(&jac[j]).map(|(&p, &q)| p * q).sum();
        }
        small[i][i] += a / w;
    }
    let ag: Vec<T> = jac
        .iter()
        .map(|row| row.iter().zip(g).map(|(&p, &q)| p * q).sum())
        .collect();
    let y = solve(&small, &ag)?;
    Some(
        (0..g.len())
            .map(|c| (g[c] - (0..k).map(|r| jac[r][c] * y[r]).sum::<T>()) / a)
            .collect(),
    )
}

/// Levenberg-Marquardt on `Δt |u|² + w |F(u) - aim|²`.
fn minimize_penalized<T: Real>(
    p: &Problem<'_, T>,
    u: &mut Vec<T>,
    n: usize,
    w: T,
    aim: &[T],
    iters: usize,
) {
    let dt = T::one() / T::of(n);
    let mut lambda = T::lit(1e-3);
    let mut f = p.objective(u, n, w, aim);
    for _ in 0..iters {
        let jac = p.jacobian(u, n);
        let r = p.shifted_residual(u, n, aim);
        // gradient / 2
        let grad: Vec<T> = (0..u.len())
            .map(|c| dt * u[c] + w * (0..r.len()).map(|k| jac[k][c] * r[k]).sum::<T>())
            .collect();
        let mut improved = false;
        for _ in 0..12 {
            let Some(step) = woodbury(&jac, dt + lambda, w, &grad) else {
                lambda *= T::lit(10.0);
                continue;
            };
            let trial: Vec<T> = u.iter().zip(&step).map(|(&a, &b)| a - b).collect();
            let ft = p.objective(&trial, n, w, aim);
            if ft < f {
                let small = max_abs(&step) <= T::lit(1e-13) * (T::one() + max_abs(u));
                *u = trial;
                f = ft;
                lambda = (lambda / T::lit(3.0)).max(T::lit(1e-12));
                improved = true;
                if small {
                    return;
                }
                break;
            }
            lambda *= T::lit(4.0);
        }
        if !improved {
            return;
        }
    }
}

/// Minimum-norm Newton steps onto `F(u) = y`.
fn project<T: Real>(p: &Problem<'_, T>, u: &mut Vec<T>, n: usize) {
    let scale = T::one() + max_abs(&p.target);
    for _ in 0..30 {
        let r = p.residual(u, n);
        if max_abs(&r) <= T::lit(1e-14) * scale {
            return;
        }
        let jac = p.jacobian(u, n);
        let k = jac.len();
        let mut jjt = vec![vec![T::zero(); k]; k];
        for i in 0..k {
            for j in 0..k {
                jjt[i][j] = jac[i].iter().zip(&jac[j]).map(|(&a, &b)| a * b).sum();
            }
        }
        let Some(y) = solve(&jjt, &r) else { return };
        let before = max_abs(&r);
        let trial: Vec<T> = (0..u.len())
            .map(|c| u[c] - (0..k).map(|i| jac[i][c] * y[i]).sum::<T>())
            .collect();
        if max_abs(&p.residual(&trial, n)) >= before {
            return;
        }
        *u = trial;
    }
}

struct StartOutcome<T: Real> {
    u: Vec<T>,
    error: T,
    length: T,
    trace: Vec<TraceRow<T>>,
}

fn run_start<T: Real>(p: &Problem<'_, T>, cfg: &CcConfig<T>, start: usize) -> StartOutcome<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(start as u64);
    let m = p.m;
    let n0 = cfg.cells[0];
    let scale = p.group.gauge_norm(&p.target);
    let horizontal: Vec<T> = p.target[..m].to_vec();
    let mut u: Vec<T> = (0..n0 * m)
        .map(|i| {
            let jitter = T::lit(rng.gen_range(-1.0..1.0)) * scale * T::lit(2.0);
            if start == 0 {
                horizontal[i % m] + jitter * T::lit(0.01)
            } else {
                jitter
            }
        })
        .collect();
    // feasibility must dominate the energy of a witness from the start
    let size: T = p.target.iter().map(|&c| c * c).sum();
    let mut w = cfg.initial_penalty * scale * scale / size;
    // multiplier shift of the augmented penalty
    let mut aim = p.target.clone();
    let mut last_err = T::infinity();
    let mut trace = Vec::new();
    let mut n = n0;
    let mut it = 0;
    for (stage, &cells) in cfg.cells.iter().enumerate() {
        if stage > 0 {
            let mut finer = Vec::with_capacity(cells * m);
            let rep = cells / n;
            for cell in u.chunks(m) {
                for _ in 0..rep.max(1) {
                    finer.extend_from_slice(cell);
                }
            }
            u = finer;
            n = u.len() / m;
        }
        for _ in 0..cfg.max_doublings {
            minimize_penalized(p, &mut u, n, w, &aim, cfg.lm_iters);
            let r = p.residual(&u, n);
            let err = max_abs(&r);
            it += 1;
            trace.push(TraceRow {
                cells: n,
                iteration: it,
                penalty: w,
                length: length_of(&u, n, m),
                endpoint_error: err,
            });
            if err < cfg.endpoint_tol {
                break;
            }
            for (a, d) in aim.iter_mut().zip(&r) {
                *a -= *d;
            }
            if err > T::lit(0.25) * last_err {
                w *= T::lit(2.0);
            }
            last_err = err;
        }
    }
    project(p, &mut u, n);
    let error = max_abs(&p.residual(&u, n));
    let length = length_of(&u, n, m);
    trace.push(TraceRow {
        cells: n,
        iteration: it + 1,
        penalty: w,
        length,
        endpoint_error: error,
    });
    StartOutcome {
        u,
        error,
        length,
        trace,
    }
}

fn length_of<T: Real>(u: &[T], n: usize, m: usize) -> T {
    let dt = T::one() / T::of(n);
    u.chunks(m)
        .map(|c| c.iter().map(|&v| v * v).sum::<T>().sqrt() * dt)
        .sum()
}

/// CC distance from `x` to `y` as the shortest horizontal control curve
/// found by penalized energy minimization.
///
/// Starts run in parallel; each has its own ChaCha stream derived from
/// `cfg.seed`, and the reduction picks the shortest certified witness with
/// ties broken by start index.
pub fn cc_distance<T: Real>(
    group: &CarnotGroup<T>,
    x: &[T],
    y: &[T],
    cfg: &CcConfig<T>,
) -> Result<CcResult<T>> {
    if cfg.cells.is_empty() || cfg.cells[0] == 0 || cfg.starts == 0 {
        return Err(Error::MalformedInput(
            "need at least one cell count and one start".into(),
        ));
    }
    if cfg
        .cells
        .windows(2)
        .any(|w| w[1] % w[0] != 0 || w[1] <= w[0])
    {
        return Err(Error::MalformedInput(
            "cell counts must be increasing multiples".into(),
        ));
    }
    if x.len() != group.dim() || y.len() != group.dim() {
        return Err(Error::MalformedInput(
            "point dimension does not match the group".into(),
        ));
    }
    let target = group.left_quotient(x, y);
    let m = group.horizontal_dim();
    if group.gauge_norm(&target) == T::zero() {
        let n = cfg.cells[cfg.cells.len() - 1];
        let witness = HorizontalControlCurve::new(x.to_vec(), vec![vec![T::zero(); m]; n])?;
        return Ok(CcResult {
            value: T::zero(),
            witness,
            endpoint: y.to_vec(),
            endpoint_error: T::zero(),
            certified: true,
            start: 0,
            start_values: vec![T::zero(); cfg.starts],
            trace: Vec::new(),
        });
    }
    // solve at unit gauge; the cone property makes the result scale back exactly
    let s = group.gauge_norm(&target);
    let p = Problem {
        group,
        target: group.dilate(s.recip(), &target),
        m,
    };
    let outcomes: Vec<StartOutcome<T>> = (0..cfg.starts)
        .into_par_iter()
        .map(|s| run_start(&p, cfg, s))
        .collect();
    let ok = |o: &StartOutcome<T>| o.error < cfg.endpoint_tol;
    let best = (0..outcomes.len())
        .min_by(|&a, &b| {
            let (oa, ob) = (&outcomes[a], &outcomes[b]);
            let ka = (!ok(oa), if ok(oa) { oa.length } else { oa.error });
            let kb = (!ok(ob), if ok(ob) { ob.length } else { ob.error });
            ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("at least one start");
    let start_values = outcomes
        .iter()
        .map(|o| if ok(o) { o.length * s } else { T::infinity() })
        .collect();
    let o = &outcomes[best];
    let controls: Vec<Vec<T>> =
        o.u.chunks(m)
            .map(|c| c.iter().map(|&v| v * s).collect())
            .collect();
    let witness = HorizontalControlCurve::new(x.to_vec(), controls)?;
    let (endpoint, value) = integrate_horizontal(group, &witness);
    let endpoint_error = endpoint
        .iter()
        .zip(y)
        .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()));
    Ok(CcResult {
        value,
        certified: endpoint_error < cfg.endpoint_tol,
        witness,
        endpoint,
        endpoint_error,
        start: best,
        start_values,
        trace: o
            .trace
            .iter()
            .map(|r| TraceRow {
                length: r.length * s,
                ..r.clone()
            })
            .collect(),
    })
}
