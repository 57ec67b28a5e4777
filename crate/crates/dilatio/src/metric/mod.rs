//! Metric-space primitives: finite spaces, curves, lengths and the trivial groupoid.

mod curve;
mod finite;
mod groupoid;

pub use curve::{
    metric_derivative, reparameterize_unit_speed, variation_length, Curve, FnCurve, PolylineCurve,
};
pub use finite::{validate_metric, FiniteMetricSpace, ValidationReport, Violation};
pub use groupoid::{Arrow, TrivialGroupoidView};

/// Absolute tolerance used by metric-axiom checks.
pub const METRIC_TOL: f64 = 1e-12;
