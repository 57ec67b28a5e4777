//! Extraction of limits ε → 0 from samples on a geometric grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Grid and stopping rule for [`extract_limit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LimitConfig<T: Real> {
    /// Strictly decreasing positive scales.
    pub grid: Vec<T>,
    /// Cauchy tolerance on successive gaps.
    pub tolerance: T,
    /// Number of trailing gaps inspected by the Cauchy test.
    pub tail: usize,
}

impl<T: Real> Default for LimitConfig<T> {
    fn default() -> Self {
        Self::dyadic(2, 16)
    }
}

impl<T: Real> LimitConfig<T> {
    /// Grid `2^-k` for `k = from..=to`.
    pub fn dyadic(from: i32, to: i32) -> Self {
        LimitConfig {
            grid: (from..=to).map(|k| T::lit(2f64.powi(-k))).collect(),
            tolerance: T::lit(1e-6),
            tail: 4,
        }
    }

    pub fn with_tolerance(mut self, tol: T) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.len() < 3 {
            return Err(Error::MalformedInput("grid needs at least 3 scales".into()));
        }
        if self
            .grid
            .iter()
            .any(|&e| !(e > T::zero()) || !e.is_finite())
        {
            return Err(Error::MalformedInput("grid scales must be positive".into()));
        }
        if self.grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::MalformedInput(
                "grid must be strictly decreasing".into(),
            ));
        }
        Ok(())
    }
}

/// Evaluations of an ε-indexed family and the extracted limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ConvergenceReport<T: Real> {
    pub eps: Vec<T>,
    /// `None` where the sampler failed.
    pub values: Vec<Option<Vec<T>>>,
    pub limit: Option<Vec<T>>,
    pub cauchy_ok: bool,
    /// Median log-log rate of successive gaps; `None` when the gaps vanish.
    pub rate: Option<T>,
    /// Orders of the Richardson steps applied, in sequence.
    pub richardson: Vec<u32>,
    /// Largest gap on the inspected tail.
    pub tail_gap: T,
    /// Diameter of all evaluated values.
    pub spread: T,
    /// Grid index of the value taken as limit.
    pub limit_index: Option<usize>,
    pub failures: Vec<(usize, String)>,
    pub partial: bool,
}

impl<T: Real> ConvergenceReport<T> {
    pub fn limit_scalar(&self) -> Option<T> {
        self.limit.as_ref().map(|v| v[0])
    }

    /// Limit when the family is Cauchy.
    pub fn converged(&self) -> Option<&[T]> {
        if self.cauchy_ok {
            self.limit.as_deref()
        } else {
            None
        }
    }

    /// One row per ε: `eps, v0, v1, ..., ok`.
    pub fn to_csv(&self) -> String {
        let width = self
            .values
            .iter()
            .flatten()
            .map(|v| v.len())
            .max()
            .unwrap_or(0);
        let mut out = String::from("eps");
        for i in 0..width {
            out.push_str(&format!(",v{i}"));
        }
        out.push_str(",ok\n");
        for (e, v) in self.eps.iter().zip(&self.values) {
            out.push_str(&format!("{}", e.as_f64()));
            match v {
                Some(v) => {
                    for x in v {
                        out.push_str(&format!(",{}", x.as_f64()));
                    }
                    out.push_str(",1\n");
                }
                None => {
                    for _ in 0..width {
                        out.push(',');
                    }
                    out.push_str(",0\n");
                }
            }
        }
        out
    }
}

/// Max-norm coordinate gap, the default metric for point-valued limits.
///
/// Richardson steps act on coordinates, so point sequences are compared
/// in coordinates as well.
pub fn coord_gap<T: Real>(a: &[T], b: &[T]) -> T {
    crate::scalar::max_abs_diff(a, b)
}

/// Samples `sampler` on the grid and extracts the limit.
///
/// Gaps are measured with `metric`. When the fitted rate is within 0.2 of
/// an integer `p >= 1`, a Richardson step of order `p` is applied to the
/// sequence before the Cauchy test; while the extrapolated sequence still
/// shows a rate of at least `p + 0.8`, a step of order `p + 1` follows (at
/// most three steps). If the gaps reach a floating point floor
/// and then grow, the tail is taken just before the growth.
pub fn extract_limit<T, F, D>(
    mut sampler: F,
    cfg: &LimitConfig<T>,
    metric: D,
) -> Result<ConvergenceReport<T>>
where
    T: Real,
    F: FnMut(T) -> Result<Vec<T>>,
    D: Fn(&[T], &[T]) -> T,
{
    cfg.validate()?;
    let mut values = Vec::with_capacity(cfg.grid.len());
    let mut failures = Vec::new();
    for (i, &e) in cfg.grid.iter().enumerate() {
        match sampler(e) {
            Ok(v) if v.iter().all(|x| x.is_finite()) => values.push(Some(v)),
            Ok(_) => {
                failures.push((i, "non-finite value".to_string()));
                values.push(None);
            }
            Err(err) => {
                failures.push((i, err.to_string()));
                values.push(None);
            }
        }
    }
    Ok(analyze(cfg, values, failures, &metric))
}

/// Scalar convenience wrapper around [`extract_limit`].
pub fn extract_scalar_limit<T, F>(
    mut sampler: F,
    cfg: &LimitConfig<T>,
) -> Result<ConvergenceReport<T>>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    extract_limit(
        |e| sampler(e).map(|v| vec![v]),
        cfg,
        |a, b| (a[0] - b[0]).abs(),
    )
}

fn analyze<T: Real, D: Fn(&[T], &[T]) -> T>(
    cfg: &LimitConfig<T>,
    values: Vec<Option<Vec<T>>>,
    failures: Vec<(usize, String)>,
    metric: &D,
) -> ConvergenceReport<T> {
    // longest run of successful evaluations ending at the smallest scale
    let mut start = values.len();
    while start > 0 && values[start - 1].is_some() {
        start -= 1;
    }
    let idx: Vec<usize> = (start..values.len()).collect();
    let seq: Vec<&Vec<T>> = idx.iter().map(|&i| values[i].as_ref().unwrap()).collect();
    let eps: Vec<T> = idx.iter().map(|&i| cfg.grid[i]).collect();

    let mut spread = T::zero();
    let ok_vals: Vec<&Vec<T>> = values.iter().flatten().collect();
    for a in 0..ok_vals.len() {
        for b in a + 1..ok_vals.len() {
            spread = spread.max(metric(ok_vals[a], ok_vals[b]));
        }
    }

    let mut report = ConvergenceReport {
        eps: cfg.grid.clone(),
        values: values.clone(),
        limit: None,
        cauchy_ok: false,
        rate: None,
        richardson: Vec::new(),
        tail_gap: T::infinity(),
        spread,
        limit_index: None,
        partial: !failures.is_empty(),
        failures,
    };
    if seq.len() < 3 {
        if let Some(last) = seq.last() {
            report.limit = Some((*last).clone());
            report.limit_index = idx.last().copied();
        }
        return report;
    }

    let scale = seq
        .iter()
        .map(|v| v.iter().fold(T::zero(), |m, x| m.max(x.abs())))
        .fold(T::zero(), T::max);
    let floor = T::lit(64.0) * T::epsilon() * (T::one() + scale);

    let mut work: Vec<Vec<T>> = seq.iter().map(|v| (*v).clone()).collect();
    let mut weps = eps.clone();
    let mut offset = 0usize;
    for stage in 0..3 {
        if work.len() < 3 {
            break;
        }
        let gaps: Vec<T> = work.windows(2).map(|w| metric(&w[0], &w[1])).collect();
        let rate = fitted_rate(&gaps, &weps, floor);
        if stage == 0 {
            report.rate = rate;
        }
        let Some(r) = rate else { break };
        let p = match report.richardson.last().copied() {
            // first step: the rate must be close to an integer
            None => {
                let p = r.round();
                if !(p >= T::one() && (r - p).abs() <= T::lit(0.2)) {
                    break;
                }
                p.to_u32().unwrap_or(1)
            }
            // later steps remove the next order; mixed higher orders
            // make the fitted rate overshoot it
            Some(last) => {
                if !(r >= T::of(last as usize) + T::lit(0.8)) {
                    break;
                }
                last + 1
            }
        };
        let mut out = Vec::with_capacity(work.len() - 1);
        for k in 1..work.len() {
            let ratio = (weps[k - 1] / weps[k]).powi(p as i32);
            let denom = ratio - T::one();
            out.push(
                work[k]
                    .iter()
                    .zip(work[k - 1].iter())
                    .map(|(&a, &b)| a + (a - b) / denom)
                    .collect(),
            );
        }
        work = out;
        weps.remove(0);
        offset += 1;
        report.richardson.push(p);
    }

    if work.len() < 2 {
        report.limit = work.last().cloned();
        report.limit_index = Some(idx[idx.len() - 1]);
        return report;
    }
    let wgaps: Vec<T> = work.windows(2).map(|w| metric(&w[0], &w[1])).collect();
    let (end, noisy) = floor_index(&wgaps);
    // a rounding-dominated family is tested on the gaps after its floor
    let (from, to) = if noisy {
        (end, (end + cfg.tail.max(1) - 1).min(wgaps.len() - 1))
    } else {
        ((end + 1).saturating_sub(cfg.tail.max(1)), end)
    };
    let tail_gap = wgaps[from..=to].iter().copied().fold(T::zero(), T::max);
    report.tail_gap = tail_gap;
    report.cauchy_ok = tail_gap < cfg.tolerance;
    report.limit = Some(work[end + 1].clone());
    report.limit_index = Some(idx[end + 1 + offset]);
    report
}

/// Rate of the gaps up to the floating point floor: the median of the
/// successive log-log slopes, which tolerates a noisy gap or two.
fn fitted_rate<T: Real>(gaps: &[T], eps: &[T], floor: T) -> Option<T> {
    let (end, _) = floor_index(gaps);
    let lo = end.saturating_sub(6);
    if gaps[lo..=end].iter().all(|&g| g <= floor) {
        return None;
    }
    let tiny = T::lit(1e-300);
    let mut slopes: Vec<T> = (lo + 1..=end)
        .filter(|&k| gaps[k] > tiny && gaps[k - 1] > tiny)
        .map(|k| (gaps[k - 1] / gaps[k]).ln() / (eps[k - 1] / eps[k]).ln())
        .collect();
    if slopes.is_empty() {
        return None;
    }
    slopes.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let m = slopes.len();
    Some(if m % 2 == 1 {
        slopes[m / 2]
    } else {
        (slopes[m / 2 - 1] + slopes[m / 2]) * T::lit(0.5)
    })
}

/// Index of the gap where the sequence stops improving.
///
/// Searches the second half of the gap list for its minimum; a clean
/// monotone sequence returns the last index. When the gaps typically
/// grow from one scale to the next (rounding amplified at small scales
/// swamps an exactly constant family), the minimum over the first half
/// is taken instead and the second value is `true`.
fn floor_index<T: Real>(gaps: &[T]) -> (usize, bool) {
    let n = gaps.len();
    let half = n / 2;
    let mut growth: Vec<T> = (1..n)
        .filter(|&k| gaps[k] > T::zero() && gaps[k - 1] > T::zero())
        .map(|k| (gaps[k] / gaps[k - 1]).ln())
        .collect();
    if growth.len() >= 3 && half > 0 {
        growth.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        if growth[growth.len() / 2] > T::lit(2f64.ln()) {
            return (
                (0..half).fold(0, |m, k| if gaps[k] < gaps[m] { k } else { m }),
                true,
            );
        }
    }
    let mut best = n - 1;
    for k in (half..n).rev() {
        if gaps[k] < gaps[best] * T::lit(0.5) {
            best = k;
        }
    }
    (best, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_index_prefers_last_on_monotone() {
        let g = [1.0, 0.5, 0.25, 0.125, 0.0625];
        assert_eq!(floor_index(&g), (4, false));
        let g = [1e-3, 1e-5, 1e-9, 1e-12, 1e-8, 1e-6];
        assert_eq!(floor_index(&g), (3, false));
        let g = [1e-16, 1e-17, 1e-15, 1e-12, 1e-10, 1e-9, 1e-8, 0.0];
        assert_eq!(floor_index(&g), (1, true));
    }
}
