//! Empirical conditional measures along the fibers of a delay map.

pub mod injectivity;
pub mod pushforward;
pub mod slice;

pub use injectivity::{
    default_probe_radii, delay_lipschitz, empirical_lipschitz, injectivity_probe, Collision, InjectivityReport, MAX_STORED_COLLISIONS,
};
pub use pushforward::{
    pushforward_density_diagnostic, pushforward_local_dimension, pushforward_local_dimension_with, reconstruction_ladder, DensityLevel, DensityOptions, DensityReport,
    LocalDimensionPair,
};
pub use slice::{
    disintegration_check, geometric_slice, image_slice_spread, slice_dimension, stabilized, DisintegrationReport,
    SliceEstimate, SliceSidecar, MIN_SLICE_MEMBERS,
};
