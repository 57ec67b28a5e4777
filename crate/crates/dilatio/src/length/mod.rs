//! Rescaled lengths, horizontal curves and CC distances.

mod optimizer;

pub use optimizer::{cc_distance, CcConfig, CcResult, TraceRow};

use serde::{Deserialize, Serialize};

use crate::convergence::{extract_scalar_limit, ConvergenceReport, LimitConfig};
use crate::dilation::{derivative_and_rnp_scan, tangent_distance, DilationStructure};
use crate::error::{Error, Result};
use crate::metric::{reparameterize_unit_speed, variation_length, Curve, PolylineCurve};
use crate::scalar::{linear_fit, norm, Real};
use crate::spaces::CarnotGroup;

/// Piecewise constant horizontal controls on `[0, 1]`, one per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct HorizontalControlCurve<T: Real> {
    pub base: Vec<T>,
    pub controls: Vec<Vec<T>>,
}

impl<T: Real> HorizontalControlCurve<T> {
    pub fn new(base: Vec<T>, controls: Vec<Vec<T>>) -> Result<Self> {
        if controls.is_empty() {
            return Err(Error::MalformedInput(
                "at least one cell is required".into(),
            ));
        }
        let m = controls[0].len();
        if controls.iter().any(|c| c.len() != m) {
            return Err(Error::MalformedInput("controls of mixed width".into()));
        }
        if controls
            .iter()
            .flatten()
            .chain(&base)
            .any(|v| !v.is_finite())
        {
            return Err(Error::MalformedInput("non-finite control or base".into()));
        }
        Ok(HorizontalControlCurve { base, controls })
    }

    pub fn cells(&self) -> usize {
        self.controls.len()
    }

    /// `Σ |u_k| Δt`.
    pub fn length(&self) -> T {
        let dt = T::one() / T::of(self.cells());
        self.controls.iter().map(|u| norm(u) * dt).sum()
    }

    /// Splits every cell in two; the traced curve is unchanged.
    pub fn subdivide(&self) -> Self {
        let controls = self
            .controls
            .iter()
            .flat_map(|u| [u.clone(), u.clone()])
            .collect();
        HorizontalControlCurve {
            base: self.base.clone(),
            controls,
        }
    }

    /// The same curve run backwards from `end`.
    pub fn reversed(&self, end: Vec<T>) -> Self {
        let controls = self
            .controls
            .iter()
            .rev()
            .map(|u| u.iter().map(|&c| -c).collect())
            .collect();
        HorizontalControlCurve {
            base: end,
            controls,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("controls serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s).map_err(|e| Error::MalformedInput(e.to_string()))?;
        Self::new(c.base, c.controls)
    }
}

/// Endpoint and length of a horizontal control curve.
///
/// Each cell is an exact group step `p ← p · exp(u Δt)`.
pub fn integrate_horizontal<T: Real>(
    group: &CarnotGroup<T>,
    hc: &HorizontalControlCurve<T>,
) -> (Vec<T>, T) {
    let dt = T::one() / T::of(hc.cells());
    let mut p = hc.base.clone();
    for u in &hc.controls {
        let step: Vec<T> = u.iter().map(|&c| c * dt).collect();
        p = group.multiply(&p, &group.horizontal(&step));
    }
    (p, hc.length())
}

/// Polyline through `sub` points per cell of the traced curve.
pub fn horizontal_polyline<T: Real>(
    group: &CarnotGroup<T>,
    hc: &HorizontalControlCurve<T>,
    sub: usize,
) -> Result<PolylineCurve<T>> {
    let sub = sub.max(1);
    let n = hc.cells();
    let dt = T::one() / T::of(n * sub);
    let mut p = hc.base.clone();
    let mut samples = vec![p.clone()];
    for u in &hc.controls {
        let step: Vec<T> = u.iter().map(|&c| c * dt).collect();
        let h = group.horizontal(&step);
        for _ in 0..sub {
            p = group.multiply(&p, &h);
            samples.push(p.clone());
        }
    }
    PolylineCurve::uniform(samples)
}

/// `l^x_ε(c)` at one scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LengthSample<T: Real> {
    pub eps: T,
    pub value: T,
}

/// `(1/ε)` times the variation of the pointwise dilated polyline `δ^x_ε c`.
pub fn rescaled_length<T: Real, S: DilationStructure<T> + ?Sized>(
    s: &S,
    x: &[T],
    eps: T,
    curve: &PolylineCurve<T>,
) -> Result<LengthSample<T>> {
    let dilated = dilate_curve(s, x, eps, curve)?;
    Ok(LengthSample {
        eps,
        value: variation_length(&dilated, |a, b| s.dist(a, b)) / eps,
    })
}

fn dilate_curve<T: Real, S: DilationStructure<T> + ?Sized>(
    s: &S,
    x: &[T],
    eps: T,
    curve: &PolylineCurve<T>,
) -> Result<PolylineCurve<T>> {
    let samples = curve
        .samples
        .iter()
        .map(|p| s.dil(x, eps, p))
        .collect::<Result<Vec<_>>>()?;
    PolylineCurve::new(curve.knots.clone(), samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LengthRepresentation<T: Real> {
    pub variation: T,
    /// Midpoint quadrature of `t ↦ d^{c(t)}(c(t), ċ(t))`.
    pub quadrature: Option<T>,
    pub relative_gap: Option<T>,
    pub applicable: bool,
    /// Quadrature nodes where no derivative was found.
    pub nonderivable: Vec<T>,
}

/// Compares the variation of `curve` with the integral of the tangent norm
/// of its derivative, using `per_piece` midpoint nodes on every piece.
pub fn length_representation_check<T: Real, S: DilationStructure<T> + ?Sized>(
    s: &S,
    curve: &PolylineCurve<T>,
    per_piece: usize,
    cfg: &LimitConfig<T>,
    tol: T,
) -> Result<LengthRepresentation<T>> {
    if curve.len() < 2 {
        return Err(Error::DegenerateCurve("a curve needs two samples".into()));
    }
    let variation = variation_length(curve, |a, b| s.dist(a, b));
    let per = per_piece.max(1);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for w in curve.knots.windows(2) {
        let h = (w[1] - w[0]) / T::of(per);
        for j in 0..per {
            nodes.push(w[0] + h * (T::of(j) + T::lit(0.5)));
            weights.push(h);
        }
    }
    let scan = derivative_and_rnp_scan(s, curve, &nodes, cfg, tol)?;
    let nonderivable: Vec<T> = scan
        .samples
        .iter()
        .filter(|d| !d.derivable())
        .map(|d| d.t)
        .collect();
    if !nonderivable.is_empty() {
        return Ok(LengthRepresentation {
            variation,
            quadrature: None,
            relative_gap: None,
            applicable: false,
            nonderivable,
        });
    }
    let mut total = T::zero();
    for (d, &w) in scan.samples.iter().zip(&weights) {
        let ct = curve.eval(d.t);
        let v = d
            .velocity
            .as_ref()
            .expect("derivable samples carry a velocity");
        let td = tangent_distance(s, &ct, &ct, v, cfg)?;
        let val = td
            .value
            .ok_or_else(|| Error::Inapplicable(format!("d^c(t) not Cauchy at t = {}", d.t)))?;
        total += w * val;
    }
    let gap = (total - variation).abs() / variation.max(T::min_positive_value());
    Ok(LengthRepresentation {
        variation,
        quadrature: Some(total),
        relative_gap: Some(gap),
        applicable: true,
        nonderivable,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TemperedReport<T: Real> {
    pub c_low: T,
    pub c_high: T,
    /// `(ε, min ratio, max ratio)` over the sample.
    pub per_eps: Vec<(T, T, T)>,
    /// Log-log slopes of the extremes on the smallest ε decade.
    pub slope_low: T,
    pub slope_high: T,
    /// `φ_d(x, u)` per sample pair, first point.
    pub phi: Vec<T>,
    /// Pairs dropped because `u = v` or `d̄^x(u,v)` did not converge.
    pub excluded: usize,
    pub pass: bool,
}

/// Fits `c ≤ (1/ε) d(δ̄^x_ε u, δ̄^x_ε v) / d̄^x(u,v) ≤ C` over `pairs`.
///
/// `d` supplies the distance under test and `background` supplies
/// `(d̄, δ̄)`. The check passes when both extremes are finite, positive
/// and flat (|slope| < 0.1) on the smallest decade of the grid.
pub fn tempered_check<T, S, R>(
    d: &S,
    background: &R,
    x: &[T],
    pairs: &[(Vec<T>, Vec<T>)],
    cfg: &LimitConfig<T>,
) -> Result<TemperedReport<T>>
where
    T: Real,
    S: DilationStructure<T> + ?Sized,
    R: DilationStructure<T> + ?Sized,
{
    cfg.validate()?;
    let mut kept = Vec::new();
    let mut excluded = 0;
    for (u, v) in pairs {
        if background.dist(u, v) <= T::lit(1e-12) {
            excluded += 1;
            continue;
        }
        match tangent_distance(background, x, u, v, cfg)?.value {
            Some(t) if t > T::zero() => kept.push((u, v, t)),
            _ => excluded += 1,
        }
    }
    let mut per_eps = Vec::new();
    for &e in &cfg.grid {
        let (mut lo, mut hi) = (T::infinity(), T::zero());
        for (u, v, t) in &kept {
            let a = background.dil(x, e, u)?;
            let b = background.dil(x, e, v)?;
            let r = d.dist(&a, &b) / e / *t;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        per_eps.push((e, lo, hi));
    }
    let c_low = per_eps.iter().map(|p| p.1).fold(T::infinity(), T::min);
    let c_high = per_eps.iter().map(|p| p.2).fold(T::zero(), T::max);

    let e_min = cfg.grid[cfg.grid.len() - 1];
    let decade: Vec<&(T, T, T)> = per_eps
        .iter()
        .filter(|p| p.0 <= e_min * T::lit(10.0))
        .collect();
    let lx: Vec<T> = decade.iter().map(|p| p.0.ln()).collect();
    let slope = |ys: Vec<T>| linear_fit(&lx, &ys).map_or(T::nan(), |f| f.0);
    let slope_low = slope(decade.iter().map(|p| p.1.ln()).collect());
    let slope_high = slope(decade.iter().map(|p| p.2.ln()).collect());

    let tail: Vec<T> = cfg.grid.iter().rev().take(2).copied().collect();
    let mut phi = Vec::new();
    for (u, _, _) in &kept {
        let mut m = T::zero();
        for &e in &tail {
            m = m.max(d.dist(x, &background.dil(x, e, u)?) / e);
        }
        phi.push(m);
    }

    let flat = |s: T| s.abs() < T::lit(0.1);
    let pass = !kept.is_empty()
        && c_low > T::zero()
        && c_high.is_finite()
        && flat(slope_low)
        && flat(slope_high);
    Ok(TemperedReport {
        c_low,
        c_high,
        per_eps,
        slope_low,
        slope_high,
        phi,
        excluded,
        pass,
    })
}

/// Constant family `ε ↦ l^x_ε(c)` for one test curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RecoverySample<T: Real> {
    pub curve: usize,
    pub values: Vec<LengthSample<T>>,
    /// `l^x(c)`: variation of the curve in `d^x`.
    pub candidate: T,
    pub limit: ConvergenceReport<T>,
    /// `|lim l^x_ε(c) - l^x(c)|`, when the family converges.
    pub slack: Option<T>,
    /// Sign of `l^x_ε(c)` change from the largest to the smallest scale.
    pub trend: i8,
    /// Largest step against the trend.
    pub monotone_violation: T,
}

/// A family `c_ε → c` compared against `l^x(c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LiminfSample<T: Real> {
    pub family: usize,
    pub values: Vec<LengthSample<T>>,
    pub limit_value: T,
    /// Minimum of `l^x_ε(c_ε)` over the second half of the scales.
    pub tail_min: T,
    /// `max(0, l^x(c) - tail_min)`.
    pub slack: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GammaReport<T: Real> {
    pub eps: Vec<T>,
    pub recovery: Vec<RecoverySample<T>>,
    pub liminf: Vec<LiminfSample<T>>,
    /// Dilated curves that broke `Lip ≤ 2 l` and were reparameterized.
    pub reparameterized: usize,
}

impl<T: Real> GammaReport<T> {
    pub fn max_slack(&self) -> T {
        self.recovery
            .iter()
            .map(|r| r.slack.unwrap_or(T::infinity()))
            .chain(self.liminf.iter().map(|l| l.slack))
            .fold(T::zero(), T::max)
    }
}

/// Variation of `curve` in the tangent distance `d^x`.
pub fn tangent_length<T: Real, S: DilationStructure<T> + ?Sized>(
    s: &S,
    x: &[T],
    curve: &PolylineCurve<T>,
    cfg: &LimitConfig<T>,
) -> Result<T> {
    let mut total = T::zero();
    for w in curve.samples.windows(2) {
        let td = tangent_distance(s, x, &w[0], &w[1], cfg)?;
        total += td
            .value
            .ok_or_else(|| Error::Inapplicable("d^x is not Cauchy on a curve piece".into()))?;
    }
    Ok(total)
}

fn lipschitz<T: Real, D: Fn(&[T], &[T]) -> T>(c: &PolylineCurve<T>, dist: D) -> T {
    let (a, b) = c.domain();
    let span = b - a;
    c.samples
        .windows(2)
        .zip(c.knots.windows(2))
        .map(|(p, k)| dist(&p[0], &p[1]) / ((k[1] - k[0]) / span))
        .fold(T::zero(), T::max)
}

/// `l^x_ε(c)` with the parameterization gauge `Lip(δ^x_ε c) ≤ 2 l_d(δ^x_ε c)`
/// on `[0,1]`; the flag reports a unit-speed reparameterization.
fn selected_length<T: Real, S: DilationStructure<T> + ?Sized>(
    s: &S,
    x: &[T],
    eps: T,
    curve: &PolylineCurve<T>,
) -> Result<(LengthSample<T>, bool)> {
    let dist = |a: &[T], b: &[T]| s.dist(a, b);
    let dilated = dilate_curve(s, x, eps, curve)?;
    let l = variation_length(&dilated, dist);
    let mut fixed = false;
    if l > T::zero() && lipschitz(&dilated, dist) > T::lit(2.0) * l {
        let unit = reparameterize_unit_speed(&dilated, dist)?;
        debug_assert!(lipschitz(&unit, dist) <= T::lit(2.0) * l);
        fixed = true;
    }
    Ok((
        LengthSample {
            eps,
            value: l / eps,
        },
        fixed,
    ))
}

/// Desk-scale Γ-convergence evidence for `l^x_ε → l^x` at `x`.
///
/// `tests` are evaluated as constant families (recovery side); each entry
/// of `families` pairs curves `c_ε` (one per scale) with their limit `c`
/// (liminf side).
pub fn gamma_diagnostic<T: Real, S: DilationStructure<T> + ?Sized>(
    s: &S,
    x: &[T],
    tests: &[PolylineCurve<T>],
    families: &[(Vec<PolylineCurve<T>>, PolylineCurve<T>)],
    eps: &[T],
    cfg: &LimitConfig<T>,
) -> Result<GammaReport<T>> {
    let grid = LimitConfig {
        grid: eps.to_vec(),
        ..cfg.clone()
    };
    grid.validate()?;
    let mut reparameterized = 0;
    let mut recovery = Vec::new();
    for (i, c) in tests.iter().enumerate() {
        let mut values = Vec::new();
        for &e in eps {
            let (v, fixed) = selected_length(s, x, e, c)?;
            reparameterized += fixed as usize;
            values.push(v);
        }
        let mut k = 0;
        let limit = extract_scalar_limit(
            |_| {
                k += 1;
                Ok(values[k - 1].value)
            },
            &grid,
        )?;
        let candidate = tangent_length(s, x, c, cfg)?;
        let slack = limit.converged().map(|l| (l[0] - candidate).abs());
        let first = values[0].value;
        let last = values[values.len() - 1].value;
        let trend: i8 = if last > first {
            1
        } else if last < first {
            -1
        } else {
            0
        };
        let dir = T::lit(trend as f64);
        let monotone_violation = values
            .windows(2)
            .map(|w| -dir * (w[1].value - w[0].value))
            .fold(T::zero(), T::max);
        recovery.push(RecoverySample {
            curve: i,
            values,
            candidate,
            limit,
            slack,
            trend,
            monotone_violation,
        });
    }
    let mut liminf = Vec::new();
    for (i, (fam, lim)) in families.iter().enumerate() {
        if fam.len() != eps.len() {
            return Err(Error::MalformedInput(format!(
                "family {i} has {} curves for {} scales",
                fam.len(),
                eps.len()
            )));
        }
        let mut values = Vec::new();
        for (c, &e) in fam.iter().zip(eps) {
            let (v, fixed) = selected_length(s, x, e, c)?;
            reparameterized += fixed as usize;
            values.push(v);
        }
        let limit_value = tangent_length(s, x, lim, cfg)?;
        let tail_min = values[values.len() / 2..]
            .iter()
            .map(|v| v.value)
            .fold(T::infinity(), T::min);
        liminf.push(LiminfSample {
            family: i,
            values,
            limit_value,
            tail_min,
            slack: (limit_value - tail_min).max(T::zero()),
        });
    }
    Ok(GammaReport {
        eps: eps.to_vec(),
        recovery,
        liminf,
        reparameterized,
    })
}
