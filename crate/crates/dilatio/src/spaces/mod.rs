//! Built-in dilation structures.

mod carnot;
mod euclidean;
mod nonstandard;
mod riemann;
mod snowflake;
mod spec;

pub use carnot::{BracketTable, CarnotGroup, CarnotSpace, Gauge};
pub use euclidean::Euclidean;
pub use nonstandard::NonstandardPlane;
pub use riemann::{
    sphere_distance, ExpChart, ExpSpace, FlatTensor, MetricTensorField, NumericExpChart, OdeConfig,
    SphereChart, StereographicSphereTensor,
};
pub use snowflake::Snowflake;
pub use spec::{construct_space, SpaceSpec, TensorSpec};
