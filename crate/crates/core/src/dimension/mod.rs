//! Dimension estimators and the neighbor index they share.

pub mod estimators;
pub mod fit;
pub mod index;
pub mod ladder;

pub use estimators::{
    ball_masses, box_counting_dimension, correlation_dimension, correlation_dimension_with, correlation_profile,
    correlation_sum, energy, hausdorff_proxies, index_cloud, information_dimension, local_dimension,
    local_dimension_with, local_potential, quantile, DimensionEstimate, EnergyEstimate, HausdorffProxies, Method,
};
pub use fit::{least_squares, LinearFit};
pub use index::NeighborIndex;
pub use ladder::{default_ladder, diameter, LadderOptions, ScaleLadder};
