use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CoherentProjection;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Base point, scale, weights and letters of a `Ψ` word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WordProgram<T: Real> {
    pub base: Vec<T>,
    pub eps: T,
    /// Empty for the unweighted recursion with `Q^·`.
    #[serde(default)]
    pub weights: Vec<T>,
    pub letters: Vec<Vec<T>>,
    /// Nesting radius in `δ̄^x_ε d̄`; unchecked when absent.
    #[serde(default)]
    pub rho: Option<T>,
}

impl<T: Real> WordProgram<T> {
    pub fn new(base: Vec<T>, eps: T, letters: Vec<Vec<T>>) -> Self {
        WordProgram {
            base,
            eps,
            weights: Vec::new(),
            letters,
            rho: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::MalformedInput(e.to_string()))
    }
}

/// Trajectory `Ψ¹ … Ψ^{p+1}` of the word.
///
/// `Ψ^{k+1} = δ^x_{1/ε} Q_{w_k}^{δ^x_ε Ψ^k} δ^x_ε q_k`, with the limit
/// projection in place of `Q_{w_k}` when there are no weights.
pub fn psi_word<T: Real>(p: &CoherentProjection<T>, prog: &WordProgram<T>) -> Result<Vec<Vec<T>>> {
    let eps = prog.eps;
    if !(eps > T::zero() && eps <= T::one()) {
        return Err(Error::MalformedInput(format!(
            "word scale {eps} is not in (0, 1]"
        )));
    }
    if !prog.weights.is_empty() {
        if prog.weights.len() < prog.letters.len() {
            return Err(Error::MalformedInput(format!(
                "{} weights for {} letters",
                prog.weights.len(),
                prog.letters.len()
            )));
        }
        if prog
            .weights
            .iter()
            .any(|&w| !(w > T::zero() && w <= T::one()))
        {
            return Err(Error::MalformedInput("weights must lie in (0, 1]".into()));
        }
    }
    let x = &prog.base;
    let mut traj = vec![x.clone()];
    for (k, q) in prog.letters.iter().enumerate() {
        let prev = &traj[k];
        if let Some(rho) = prog.rho {
            let d = p.scaled_bar_dist(x, eps, q, prev)?;
            if !(d <= rho) {
                return Err(Error::Nesting { step: k + 1 });
            }
        }
        let at = p.dil(x, eps, prev)?;
        let w = prog.weights.get(k).copied().unwrap_or(T::zero());
        let moved = p.q(&at, w, &p.dil(x, eps, q)?)?;
        traj.push(p.dil(x, T::one() / eps, &moved)?);
    }
    Ok(traj)
}

/// Fitted nesting radius at a base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NestingRadius<T: Real> {
    pub rho: T,
    pub letters: usize,
    pub words: usize,
    pub iterations: usize,
}

/// Largest `ρ` (by bisection on `(0, domain]`) such that sampled words
/// whose letters stay within `ρ` of the running point keep every letter
/// and every `Ψ` point within `domain` of `x`.
///
/// The same random directions are reused for every `ρ`, so the test is
/// monotone in `ρ`.
pub fn nesting_radius<T: Real>(
    p: &CoherentProjection<T>,
    x: &[T],
    eps: T,
    letters: usize,
    words: usize,
    seed: u64,
) -> Result<NestingRadius<T>> {
    let n = p.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Vec<(Vec<T>, T)>> = (0..words)
        .map(|_| {
            (0..letters)
                .map(|_| {
                    let mut d: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
                    let m = crate::scalar::norm(&d);
                    for v in &mut d {
                        *v /= m;
                    }
                    (d, T::lit(rng.gen_range(0.0..1.0)))
                })
                .collect()
        })
        .collect();

    let fits = |rho: T| -> bool {
        for word in &draws {
            let mut prog = WordProgram::new(x.to_vec(), eps, Vec::new());
            let mut prev = x.to_vec();
            for (dir, f) in word {
                // letter at scaled distance ρ·f from the running point
                let Ok(at) = p.bar_dil(x, eps, &prev) else {
                    return false;
                };
                let shifted: Vec<T> = at
                    .iter()
                    .zip(dir)
                    .map(|(&a, &d)| a + eps * rho * *f * d)
                    .collect();
                let Ok(q) = p.bar_dil(x, T::one() / eps, &shifted) else {
                    return false;
                };
                if !(p.bar_dist(x, &q) <= p.domain) {
                    return false;
                }
                prog.letters.push(q);
                match psi_word(p, &prog) {
                    Ok(t) => prev = t.last().cloned().expect("non-empty trajectory"),
                    Err(_) => return false,
                }
                if !(p.bar_dist(x, &prev) <= p.domain) {
                    return false;
                }
            }
        }
        true
    };

    let (mut lo, mut hi) = (T::zero(), p.domain);
    let mut iterations = 0;
    if fits(hi) {
        lo = hi;
    } else {
        while iterations < 40 && hi - lo > T::lit(1e-6) * p.domain {
            let mid = (lo + hi) * T::lit(0.5);
            if fits(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
        }
    }
    if !(lo > T::zero()) {
        return Err(Error::Nesting { step: 1 });
    }
    Ok(NestingRadius {
        rho: lo,
        letters,
        words,
        iterations,
    })
}
