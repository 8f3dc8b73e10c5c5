//! Perturbed observables, delay-coordinate maps and observation matrices.

pub mod basis;
pub mod delay;
pub mod matrix;
pub mod observable;

pub use basis::{probe_basis, BasisSpec, MonomialBasis};
pub use delay::{delay_map, DelayMap};
pub use matrix::{
    interpolate_on_orbit, kernel_restricted_norm, numerical_rank, observation_matrix, singular_values,
    transversality_report, Interpolation, TransversalityReport,
};
pub use observable::{sample_alpha, BaseObservable, Chart, Observable, ObservableSpec, Probes, Scratch};

/// Free-function form of [`Observable::perturb`].
pub fn perturb(h: &Observable, alpha: &[f64]) -> crate::Result<Observable> {
    h.perturb(alpha)
}
