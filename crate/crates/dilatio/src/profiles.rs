//! Metric profiles at a point and their distortion from the tangent cone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convergence::LimitConfig;
use crate::dilation::{sample_ball, DilationStructure, TangentModel};
use crate::error::{Error, Result};
use crate::scalar::{linear_fit, Real};
use crate::spaces::ExpChart;

/// Distortions below this count as zero.
pub const FLAT_TOLERANCE: f64 = 1e-9;

/// Rescaled distance tables `(1/ε) d(δ^x_ε u, δ^x_ε v)` on a fixed sample
/// of the unit ball at `base`, together with the tangent table `d^x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ProfileSeries<T: Real> {
    pub base: Vec<T>,
    /// `sample[0]` is the base point.
    pub sample: Vec<Vec<T>>,
    pub eps: Vec<T>,
    pub matrices: Vec<Vec<Vec<T>>>,
    pub tangent: Vec<Vec<T>>,
}

impl<T: Real> ProfileSeries<T> {
    /// Distortion at every scale, in the order of `eps`.
    pub fn distortions(&self) -> Vec<T> {
        (0..self.eps.len())
            .map(|k| max_gap(&self.matrices[k], &self.tangent))
            .collect()
    }

    /// `eps,distortion` rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        // writing to a Vec cannot fail
        w.write_record(["eps", "distortion"]).unwrap();
        for (e, d) in self.eps.iter().zip(self.distortions()) {
            w.write_record([e.as_f64().to_string(), d.as_f64().to_string()])
                .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

fn max_gap<T: Real>(a: &[Vec<T>], b: &[Vec<T>]) -> T {
    let mut m = T::zero();
    for (ra, rb) in a.iter().zip(b) {
        for (&p, &q) in ra.iter().zip(rb) {
            m = m.max((p - q).abs());
        }
    }
    m
}

fn table<T: Real, F: Fn(usize, usize) -> Result<T> + Sync>(n: usize, f: F) -> Result<Vec<Vec<T>>> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let vals: Vec<T> = pairs
        .par_iter()
        .map(|&(i, j)| f(i, j))
        .collect::<Result<_>>()?;
    let mut m = vec![vec![T::zero(); n]; n];
    for (&(i, j), &d) in pairs.iter().zip(&vals) {
        m[i][j] = d;
        m[j][i] = d;
    }
    Ok(m)
}

/// Samples `n` points of the unit ball at `x` (the first is `x` itself)
/// and fills the rescaled and tangent tables.
pub fn sample_profile<T: Real, S: DilationStructure<T> + ?Sized>(
    s: &S,
    x: &[T],
    n: usize,
    eps: &[T],
    seed: u64,
) -> Result<ProfileSeries<T>> {
    sample_profile_with(s, x, n, eps, seed, &LimitConfig::default())
}

/// [`sample_profile`] with an explicit grid for the tangent limits.
pub fn sample_profile_with<T: Real, S: DilationStructure<T> + ?Sized>(
    s: &S,
    x: &[T],
    n: usize,
    eps: &[T],
    seed: u64,
    cfg: &LimitConfig<T>,
) -> Result<ProfileSeries<T>> {
    if n < 4 {
        return Err(Error::MalformedInput(format!(
            "profile needs n >= 4, got {n}"
        )));
    }
    if eps.is_empty() || eps.iter().any(|&e| !(e > T::zero() && e <= T::one())) {
        return Err(Error::MalformedInput(
            "profile scales must lie in (0, 1]".into(),
        ));
    }
    if s.domain_radius(x) < T::one() {
        return Err(Error::OutOfDomain(format!(
            "domain radius {} is smaller than the unit ball",
            s.domain_radius(x)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = vec![x.to_vec()];
    sample.extend(sample_ball(s, x, T::one(), n - 1, &mut rng)?);
    profile_of_sample(s, x, sample, eps, cfg)
}

/// Profile tables on a given sample; `x` is prepended when missing.
pub fn profile_of_sample<T: Real, S: DilationStructure<T> + ?Sized>(
    s: &S,
    x: &[T],
    mut sample: Vec<Vec<T>>,
    eps: &[T],
    cfg: &LimitConfig<T>,
) -> Result<ProfileSeries<T>> {
    if sample.first().is_none_or(|p| p.as_slice() != x) {
        sample.insert(0, x.to_vec());
    }
    let n = sample.len();
    let model = TangentModel::new(s, x.to_vec(), cfg.clone());
    let tangent = table(n, |i, j| model.dist(&sample[i], &sample[j]))?;
    let matrices = eps
        .par_iter()
        .map(|&e| {
            let pts: Vec<Vec<T>> = sample
                .iter()
                .map(|u| s.dil(x, e, u))
                .collect::<Result<_>>()?;
            let mut m = vec![vec![T::zero(); n]; n];
            for i in 0..n {
                for j in i + 1..n {
                    let d = s.dist(&pts[i], &pts[j]) / e;
                    m[i][j] = d;
                    m[j][i] = d;
                }
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProfileSeries {
        base: x.to_vec(),
        sample,
        eps: eps.to_vec(),
        matrices,
        tangent,
    })
}

/// `max |(δ,ε)(u,v) − d^x(u,v)|` over the sample.
///
/// The identity correspondence makes this an upper bound for the pointed
/// GH distance between the rescaled sample and its tangent image.
pub fn profile_distortion<T: Real>(series: &ProfileSeries<T>, eps: T) -> Result<T> {
    let k = series
        .eps
        .iter()
        .position(|&e| e == eps)
        .ok_or_else(|| Error::MalformedInput(format!("scale {eps} is not in the series")))?;
    Ok(max_gap(&series.matrices[k], &series.tangent))
}

/// Power law fit `distortion ≈ M ε^β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CurvEstimate<T: Real> {
    /// `None` when flat.
    pub slope: Option<T>,
    /// `None` when flat.
    pub curvature: Option<T>,
    pub r2: Option<T>,
    pub flat: bool,
    pub distortions: Vec<T>,
    pub warning: Option<String>,
}

/// Least squares slope of `log distortion` against `log ε` on the three
/// smallest scales.
pub fn curvdim_estimate<T: Real>(series: &ProfileSeries<T>) -> Result<CurvEstimate<T>> {
    let n = series.eps.len();
    if n < 4 {
        return Err(Error::MalformedInput(format!(
            "curvdim needs at least 4 scales, got {n}"
        )));
    }
    let hi = series.eps.iter().copied().fold(T::zero(), T::max);
    let lo = series.eps.iter().copied().fold(T::infinity(), T::min);
    if hi / lo < T::lit(4.0) {
        return Err(Error::MalformedInput(format!(
            "scales {lo}..{hi} span less than two dyadic steps"
        )));
    }
    let dist = series.distortions();
    if dist.iter().all(|&d| d < T::lit(FLAT_TOLERANCE)) {
        return Ok(CurvEstimate {
            slope: None,
            curvature: None,
            r2: None,
            flat: true,
            distortions: dist,
            warning: None,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        series.eps[a]
            .partial_cmp(&series.eps[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut warning = None;
    let pick: Vec<usize> = order.iter().copied().take(3).collect();
    if pick.iter().any(|&k| !(dist[k] > T::zero())) {
        return Ok(CurvEstimate {
            slope: None,
            curvature: None,
            r2: None,
            flat: false,
            distortions: dist,
            warning: Some("zero distortion on a fitted scale".into()),
        });
    }
    let lx: Vec<T> = pick.iter().map(|&k| series.eps[k].ln()).collect();
    let ly: Vec<T> = pick.iter().map(|&k| dist[k].ln()).collect();
    let (slope, icept) =
        linear_fit(&lx, &ly).ok_or_else(|| Error::MalformedInput("repeated scales".into()))?;
    let my = ly.iter().copied().sum::<T>() / T::of(ly.len());
    let ss_tot = ly.iter().map(|&y| (y - my) * (y - my)).sum::<T>();
    let ss_res = lx
        .iter()
        .zip(&ly)
        .map(|(&a, &b)| {
            let r = b - (icept + slope * a);
            r * r
        })
        .sum::<T>();
    let r2 = if ss_tot > T::zero() {
        T::one() - ss_res / ss_tot
    } else {
        T::one()
    };
    let monotone = order.windows(2).all(|w| dist[w[0]] <= dist[w[1]]);
    if !monotone || r2 < T::lit(0.99) {
        warning = Some(format!(
            "poor fit: r² = {}, monotone = {monotone}",
            r2.as_f64()
        ));
    }
    Ok(CurvEstimate {
        slope: Some(slope),
        curvature: Some(icept.exp()),
        r2: Some(r2),
        flat: false,
        distortions: dist,
        warning,
    })
}

/// Sectional curvature at the base from the fitted curvature `M`:
/// `K = 6 M / max (|u|²|v|² − ⟨u,v⟩²) / d^x(u,v)` with `u, v` the chart
/// logarithms of the sample.
pub fn sectional_curvature<T: Real, C: ExpChart<T>>(
    chart: &C,
    series: &ProfileSeries<T>,
    est: &CurvEstimate<T>,
) -> Result<T> {
    let m = est
        .curvature
        .ok_or_else(|| Error::Inapplicable("no curvature fitted".into()))?;
    let x = &series.base;
    let g = chart.metric_at(x);
    let logs: Vec<Vec<T>> = series
        .sample
        .iter()
        .map(|p| chart.log(x, p))
        .collect::<Result<_>>()?;
    let ip = |a: &[T], b: &[T]| {
        let mut s = T::zero();
        for i in 0..a.len() {
            for j in 0..b.len() {
                s += a[i] * g[i][j] * b[j];
            }
        }
        s
    };
    let mut best = T::zero();
    for i in 0..logs.len() {
        for j in i + 1..logs.len() {
            let d = series.tangent[i][j];
            if !(d > T::zero()) {
                continue;
            }
            let (u, v) = (&logs[i], &logs[j]);
            let area = ip(u, u) * ip(v, v) - ip(u, v) * ip(u, v);
            best = best.max(area / d);
        }
    }
    if !(best > T::zero()) {
        return Err(Error::Inapplicable("sample spans no plane".into()));
    }
    Ok(T::lit(6.0) * m / best)
}
