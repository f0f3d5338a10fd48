//! Gossip matrices, delay extensions and their spectral analysis.

mod bounds;
mod matrix;
mod spectral;

pub use bounds::{delay_mixing_bound, DelayMixingBound};
pub use matrix::{DelaySpec, GossipMatrix, RelayChain, Violation, ROW_SUM_TOLERANCE};
pub use spectral::{
    contraction_factor, correction_factors, delayed_stationary_weights, deviation_frobenius_sq,
    minimal_tau_g, spectral_norm_sq, stationary_weights, Contraction, SpectralInfo,
    DEFAULT_TAU_CAP, STATIONARY_MAX_ITERATIONS, STATIONARY_TOLERANCE,
};
