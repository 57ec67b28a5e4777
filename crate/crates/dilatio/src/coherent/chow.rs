use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{psi_word, CoherentProjection, WordProgram};
use crate::convergence::coord_gap;
use crate::error::{Error, Result};
use crate::linalg::{damped_step, fd_jacobian, zeros, Mat};
use crate::metric::{variation_length, PolylineCurve};
use crate::scalar::{euclid, norm, Real};
use crate::spaces::Gauge;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ChowConfig<T: Real> {
    /// Maximal number of letters `N`.
    pub letters: usize,
    /// Forward-verified endpoint error required for acceptance.
    pub accept: T,
    pub max_iter: usize,
    pub starts: usize,
    pub seed: u64,
    /// Samples per segment of the short curve.
    pub curve_samples: usize,
}

impl<T: Real> Default for ChowConfig<T> {
    fn default() -> Self {
        ChowConfig {
            letters: 4,
            accept: T::lit(1e-6),
            max_iter: 200,
            starts: 4,
            seed: 0,
            curve_samples: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ChowSolution<T: Real> {
    pub base: Vec<T>,
    pub target: Vec<T>,
    pub eps: T,
    pub letters: Vec<Vec<T>>,
    /// `Ψ¹ … Ψ^{N+1}` from the forward evaluation.
    pub trajectory: Vec<Vec<T>>,
    pub endpoint_error: T,
    /// `(δ^x_ε d̄)(Ψ^k, Ψ^{k+1})`
    pub segment_lengths: Vec<T>,
    /// `(δ^x_ε d̄)(x, z)`
    pub eta: T,
    /// `max segment / η^{1/m}` with `m` the step.
    pub f_ratio: T,
    pub n_used: usize,
    pub short_curve: PolylineCurve<T>,
}

impl<T: Real> ChowSolution<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    /// Short curve as `t, x0, x1, ...` rows.
    pub fn curve_csv(&self) -> String {
        let n = self.base.len();
        let mut out = String::from("t");
        for i in 0..n {
            out.push_str(&format!(",x{i}"));
        }
        out.push('\n');
        for (t, p) in self.short_curve.knots.iter().zip(&self.short_curve.samples) {
            out.push_str(&t.as_f64().to_string());
            for v in p {
                out.push_str(&format!(",{}", v.as_f64()));
            }
            out.push('\n');
        }
        out
    }
}

fn product<T: Real>(p: &CoherentProjection<T>, moves: &[Vec<T>]) -> Vec<T> {
    let g = &p.group;
    moves.iter().fold(vec![T::zero(); g.dim()], |acc, h| {
        g.multiply(&acc, &g.horizontal(h))
    })
}

/// Closed form on Heisenberg-shaped groups: one horizontal move, then a
/// triangle `a, b, -a-b` enclosing the vertical part.
fn heisenberg_moves<T: Real>(kappa: T, g: &[T]) -> Vec<Vec<T>> {
    let mut moves = Vec::new();
    if g[0] != T::zero() || g[1] != T::zero() {
        moves.push(vec![g[0], g[1]]);
    }
    if g[2] != T::zero() {
        let s = (T::lit(2.0) * g[2].abs() / kappa.abs()).sqrt();
        let sign = g[2].signum() * kappa.signum();
        moves.push(vec![s, T::zero()]);
        moves.push(vec![T::zero(), s * sign]);
        moves.push(vec![-s, -s * sign]);
    }
    moves
}

/// Exact Jacobian of the Heisenberg forward map in the move coordinates.
fn heisenberg_jacobian<T: Real>(kappa: T, moves: &[T]) -> Mat<T> {
    let n = moves.len() / 2;
    let mut jac = zeros(3, 2 * n);
    let total = (
        moves.iter().step_by(2).copied().sum::<T>(),
        moves.iter().skip(1).step_by(2).copied().sum::<T>(),
    );
    let mut before = (T::zero(), T::zero());
    let half = T::lit(0.5) * kappa;
    for k in 0..n {
        let (a, b) = (moves[2 * k], moves[2 * k + 1]);
        let after = (total.0 - before.0 - a, total.1 - before.1 - b);
        jac[0][2 * k] = T::one();
        jac[1][2 * k + 1] = T::one();
        jac[2][2 * k] = half * (after.1 - before.1);
        jac[2][2 * k + 1] = half * (before.0 - after.0);
        before = (before.0 + a, before.1 + b);
    }
    jac
}

fn solve_moves<T: Real>(
    p: &CoherentProjection<T>,
    g: &[T],
    cfg: &ChowConfig<T>,
) -> Result<Vec<Vec<T>>> {
    let kappa = match p.group.gauge {
        Gauge::Koranyi { kappa } => Some(kappa),
        Gauge::Max { .. } => None,
    };
    if let Some(k) = kappa {
        let moves = heisenberg_moves(k, g);
        if moves.len() <= cfg.letters {
            return Ok(moves);
        }
    }
    if p.group.step() == 1 && cfg.letters >= 1 {
        return Ok(vec![g.to_vec()]);
    }

    let r = p.group.horizontal_dim();
    let n = cfg.letters;
    let forward = |v: &[T]| -> Option<Vec<T>> {
        let moves: Vec<Vec<T>> = v.chunks(r).map(|c| c.to_vec()).collect();
        Some(crate::scalar::sub(&product(p, &moves), g))
    };
    let scale = p.group.gauge_norm(g).max(T::lit(1e-12));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best = (T::infinity(), Vec::new());
    for _ in 0..cfg.starts.max(1) {
        let mut v: Vec<T> = (0..n * r)
            .map(|_| scale * T::lit(rng.gen_range(-1.0..1.0)))
            .collect();
        let mut res = forward(&v).expect("total");
        let mut lambda = T::lit(1e-3) * scale * scale;
        for _ in 0..cfg.max_iter {
            let err = norm(&res);
            if err < T::lit(1e-14) * (T::one() + scale) {
                break;
            }
            let jac = match kappa {
                Some(k) => heisenberg_jacobian(k, &v),
                None => match fd_jacobian(&forward, &v, &res, T::lit(1e-7)) {
                    Some(j) => j,
                    None => break,
                },
            };
            let Some(step) = damped_step(&jac, &res, lambda) else {
                break;
            };
            let trial: Vec<T> = v.iter().zip(&step).map(|(&a, &b)| a + b).collect();
            let tres = forward(&trial).expect("total");
            if norm(&tres) < err {
                v = trial;
                res = tres;
                lambda *= T::lit(0.3);
            } else {
                lambda *= T::lit(4.0);
            }
        }
        let err = norm(&res);
        if err < best.0 {
            best = (err, v);
        }
    }
    if !(best.0 <= cfg.accept) {
        return Err(Error::Stagnation {
            residual: best.0.as_f64(),
        });
    }
    Ok(best.1.chunks(r).map(|c| c.to_vec()).collect())
}

/// Letters `y_1 … y_n` with `Ψ^{n+1}_{ε∅}(x y_1 … y_n) = z`, `n <= N`.
///
/// Solved at unit scale for `δ^x_ε z` (closed form plus damped least
/// squares) and rescaled by `δ^x_{1/ε}`; accepted only after forward
/// evaluation of the word.
pub fn chow_connect<T: Real>(
    p: &CoherentProjection<T>,
    x: &[T],
    z: &[T],
    eps: T,
    cfg: &ChowConfig<T>,
) -> Result<ChowSolution<T>> {
    let g = &p.group;
    let zs = p.dil(x, eps, z)?;
    let target = g.left_quotient(x, &zs);
    let moves: Vec<Vec<T>> = solve_moves(p, &target, cfg)?
        .into_iter()
        .filter(|h| h.iter().any(|&v| v != T::zero()))
        .collect();

    let mut unit = vec![x.to_vec()];
    for h in &moves {
        let last = unit.last().expect("non-empty");
        unit.push(g.multiply(last, &g.horizontal(h)));
    }
    let letters = unit[1..]
        .iter()
        .map(|q| p.dil(x, T::one() / eps, q))
        .collect::<Result<Vec<_>>>()?;
    let prog = WordProgram::new(x.to_vec(), eps, letters.clone());
    let trajectory = psi_word(p, &prog)?;
    let end = trajectory.last().expect("non-empty");
    let endpoint_error = coord_gap(end, z);
    if !(endpoint_error <= cfg.accept) {
        return Err(Error::Stagnation {
            residual: endpoint_error.as_f64(),
        });
    }

    let mut segment_lengths = Vec::with_capacity(moves.len());
    for w in trajectory.windows(2) {
        segment_lengths.push(euclid(&p.dil(x, eps, &w[0])?, &p.dil(x, eps, &w[1])?) / eps);
    }
    let eta = euclid(x, &zs) / eps;
    let m = T::of(g.step());
    let seg_max = segment_lengths.iter().copied().fold(T::zero(), T::max);
    let f_ratio = if eta > T::zero() {
        seg_max / eta.powf(T::one() / m)
    } else {
        T::zero()
    };
    let short_curve = assemble_short_curve(p, &trajectory, cfg.curve_samples)?;
    Ok(ChowSolution {
        base: x.to_vec(),
        target: z.to_vec(),
        eps,
        n_used: moves.len(),
        letters,
        trajectory,
        endpoint_error,
        segment_lengths,
        eta,
        f_ratio,
        short_curve,
    })
}

/// Concatenation of `t ↦ δ̄^{Ψ^k}_t Ψ^{k+1}`, segment `k` on `[k, k+1]`.
fn assemble_short_curve<T: Real>(
    p: &CoherentProjection<T>,
    traj: &[Vec<T>],
    per: usize,
) -> Result<PolylineCurve<T>> {
    let per = per.max(1);
    let mut knots = vec![T::zero()];
    let mut samples = vec![traj[0].clone()];
    for (k, w) in traj.windows(2).enumerate() {
        for j in 1..=per {
            let t = T::of(j) / T::of(per);
            knots.push(T::of(k) + t);
            samples.push(p.bar_dil(&w[0], t, &w[1])?);
        }
    }
    PolylineCurve::new(knots, samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SegmentRatios<T: Real> {
    pub segment: usize,
    /// `(a, l̄(t ∈ [0,a] ↦ δ̄_t) / d̄(start, δ̄_a end))`
    pub ratios: Vec<(T, T)>,
    /// `max |ratio − 1|` over `a <= 0.1`.
    pub small_deviation: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ConditionB<T: Real> {
    pub segments: Vec<SegmentRatios<T>>,
    pub tolerance: T,
    pub pass: bool,
}

/// Short curve of the solution and the ratio of background length to
/// chord along each dilation flow, for `a = 2^0 … 2^-10`.
pub fn short_curve_and_cond_b<T: Real>(
    p: &CoherentProjection<T>,
    sol: &ChowSolution<T>,
    tolerance: T,
) -> Result<(PolylineCurve<T>, ConditionB<T>)> {
    let pieces = 64;
    let mut segments = Vec::new();
    for (k, w) in sol.trajectory.windows(2).enumerate() {
        if p.bar_dist(&w[0], &w[1]) == T::zero() {
            continue;
        }
        let mut ratios = Vec::new();
        let mut small = T::zero();
        for j in 0..=10 {
            let a = T::lit(0.5f64.powi(j));
            let mut pts = vec![w[0].clone()];
            for i in 1..=pieces {
                pts.push(p.bar_dil(&w[0], a * T::of(i) / T::of(pieces), &w[1])?);
            }
            let chord = p.bar_dist(&pts[0], &pts[pieces]);
            let curve = PolylineCurve::uniform(pts)?;
            let r = variation_length(&curve, |u, v| p.bar_dist(u, v)) / chord;
            if a <= T::lit(0.1) {
                small = small.max((r - T::one()).abs());
            }
            ratios.push((a, r));
        }
        segments.push(SegmentRatios {
            segment: k,
            ratios,
            small_deviation: small,
        });
    }
    let pass = segments.iter().all(|s| s.small_deviation <= tolerance);
    Ok((
        sol.short_curve.clone(),
        ConditionB {
            segments,
            tolerance,
            pass,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ConditionA<T: Real> {
    /// `(ε, max (1/ε) d̄(δ^x_ε u, δ^x_ε v) / d̄(u, v))`
    pub per_eps: Vec<(T, T)>,
    /// Fitted `L(K)`: the largest ratio.
    pub lipschitz: T,
    /// Relative spread of the ratios on the three smallest scales.
    pub tail_spread: T,
    pub stable: bool,
}

/// Lipschitz ratios of the induced dilations against `d̄` on a sample.
pub fn condition_a<T: Real>(
    p: &CoherentProjection<T>,
    x: &[T],
    sample: &[Vec<T>],
    eps: &[T],
) -> Result<ConditionA<T>> {
    if eps.len() < 3 {
        return Err(Error::MalformedInput(
            "condition (A) needs at least 3 scales".into(),
        ));
    }
    let mut per_eps = Vec::with_capacity(eps.len());
    for &e in eps {
        let img = sample
            .iter()
            .map(|u| p.dil(x, e, u))
            .collect::<Result<Vec<_>>>()?;
        let mut worst = T::zero();
        for i in 0..sample.len() {
            for j in i + 1..sample.len() {
                let d = p.bar_dist(&sample[i], &sample[j]);
                if d > T::zero() {
                    worst = worst.max(p.bar_dist(&img[i], &img[j]) / e / d);
                }
            }
        }
        per_eps.push((e, worst));
    }
    let lipschitz = per_eps.iter().map(|r| r.1).fold(T::zero(), T::max);
    let tail: Vec<T> = per_eps[per_eps.len() - 3..].iter().map(|r| r.1).collect();
    let hi = tail.iter().copied().fold(T::zero(), T::max);
    let lo = tail.iter().copied().fold(T::infinity(), T::min);
    let tail_spread = if hi > T::zero() {
        (hi - lo) / hi
    } else {
        T::zero()
    };
    Ok(ConditionA {
        per_eps,
        lipschitz,
        tail_spread,
        stable: lipschitz.is_finite() && tail_spread <= T::lit(0.1),
    })
}
