//! Delay-coordinate reconstruction of dynamical systems from scalar
//! observations: example systems and samplers, perturbed observables and
//! delay maps, dimension estimators, prediction-error functionals, and
//! conditional-measure slices, plus a scenario harness tying them together.

pub mod dimension;
pub mod error;
pub mod harness;
pub mod metric;
pub mod observables;
pub mod prediction;
pub mod rng;
pub mod slices;
pub mod systems;

pub use error::{LabError, Result};
pub use metric::Metric;
