//! Prediction-error functionals on reconstructed pairs `(φ(x), φ(Tx))`.

pub mod cloud;
pub mod functionals;

pub use cloud::{EmbeddedCloud, EmbeddingProvenance};
pub use functionals::{
    aggregate_verdict, chi, chi_over, curves_from_profiles, default_delta_ladder, default_epsilon_ladder, delta_ladder, exceedance,
    exceedance_scan, fs_predict, predictability_verdict, scaling_exponent, scan_queries, sigma, sigma_over,
    sigma_profiles, weighted_mean, weighted_spread, EpsilonLadderOptions, Exceedance, ExceedanceCurve, Forecast, ScalingFit, ScanOptions, Verdict,
    VerdictRule,
};
