//! Period estimation and hidden-component reconstruction for noisy,
//! arbitrary-length one-dimensional signals.
//!
//! The pipeline is:
//!
//! 1. [`period_finder`] estimates the composite period by minimizing the
//!    mean column variance of the `⌊N/P⌋ × P` data matrix over assumed
//!    periods `P`, either exhaustively or with a randomized subsampling
//!    estimator that runs in linear time.
//! 2. [`ramanujan`] folds the signal at the estimated period, projects it
//!    onto the Ramanujan subspaces `S_q` for every divisor `q`, and
//!    rebuilds hidden components with the DC level split equally.
//! 3. [`svd_baseline`] provides the `σ1/σ2` comparison estimator.
//!
//! [`signal`] holds the synthetic generators, [`experiments`] the
//! hit-miss, runtime and reconstruction studies, and [`csvio`] the file
//! formats shared with the command-line front end.

pub mod csvio;
pub mod error;
pub mod experiments;
pub mod period_finder;
pub mod ramanujan;
pub mod rng;
pub mod signal;
pub mod svd_baseline;

pub use error::{Error, Result};
pub use period_finder::{
    build_data_matrix, column_variance_mean, detect_dips, estimate_period_montecarlo,
    estimate_period_mvpf, subsampled_variance, variance_profile, DataMatrix, DipRecord, Method,
    MonteCarloParams, PeriodEstimate, VarianceProfile,
};
pub use ramanujan::{
    build_basis, decompose, divisors, euler_totient, mobius, normalized_strengths,
    ramanujan_sum, reconstruct_components, redistribute_dc, ComponentSet, Decomposition,
    RamanujanBasis,
};
pub use signal::{GroundTruth, Signal, Waveform};
pub use svd_baseline::{estimate_period_svd, svd_spectrum, SvdConfig, SvdSpectrum};

/// Version tag written into every JSON document this crate emits.
pub const SCHEMA_VERSION: u32 = 1;

/// Seed used whenever the caller does not supply one.
pub const DEFAULT_SEED: u64 = 0x5EED_1DEA;
