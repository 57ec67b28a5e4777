//! Metric spaces with dilations.
//!
//! The library is generic over the scalar type through [`Real`]; the
//! aliases at the crate root fix it to `f64`.

// `!(a <= b)` is deliberate: it is true for NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod coherent;
pub mod convergence;
pub mod dilation;
pub mod error;
pub mod gh;
pub mod length;
pub mod linalg;
pub mod metric;
pub mod profiles;
pub mod scalar;
pub mod spaces;

pub use convergence::{extract_limit, extract_scalar_limit};
pub use error::{Error, Result};
pub use scalar::Real;

pub type ConvergenceReport = convergence::ConvergenceReport<f64>;
pub type LimitConfig = convergence::LimitConfig<f64>;
pub type FiniteMetricSpace = metric::FiniteMetricSpace<f64>;
pub type PolylineCurve = metric::PolylineCurve<f64>;
pub type CarnotGroup = spaces::CarnotGroup<f64>;
pub type CarnotSpace = spaces::CarnotSpace<f64>;
pub type Euclidean = spaces::Euclidean<f64>;
pub type NonstandardPlane = spaces::NonstandardPlane<f64>;
pub type AxiomReport = dilation::AxiomReport<f64>;
pub type GhResult = gh::GhResult<f64>;
pub type HorizontalControlCurve = length::HorizontalControlCurve<f64>;
pub type CcConfig = length::CcConfig<f64>;
pub type CcResult = length::CcResult<f64>;
/// Boxed `f64` dilation structure as returned by [`spaces::construct_space`].
pub type Space = Box<dyn dilation::DilationStructure<f64>>;
pub type CoherentProjection = coherent::CoherentProjection<f64>;
pub type WordProgram = coherent::WordProgram<f64>;
pub type ChowSolution = coherent::ChowSolution<f64>;
pub type ProfileSeries = profiles::ProfileSeries<f64>;
pub type CurvEstimate = profiles::CurvEstimate<f64>;
