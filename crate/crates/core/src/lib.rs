//! Exact fluctuation theory of the single-letter d-tilted information sum
//! `J_n(D)` for a stationary binary Markov source under Hamming distortion.
//!
//! The centred sum `J_n(D) - n mu_D` equals `-ell (N_n - n pi1)` where `N_n`
//! counts visits to state 1, so its whole law comes from the occupation
//! count of a two-state chain:
//!
//! * [`chain`]: chain parameters, autocovariance, sampling.
//! * [`tilt`]: Blahut–Arimoto operating point and `j(x, D)`.
//! * [`exact`]: exact PMF/PGF of `N_n`, law of `J_n`, variance, cumulants.
//! * [`cgf`]: finite-n and limiting CGFs, Perron root, rate function,
//!   saddlepoint tails.
//! * [`montecarlo`]: simulation and Kolmogorov distances.
//! * [`oracle`]: brute-force path enumeration used as ground truth.
//! * [`cli`]: the `dtilt` command-line front end.

pub mod cgf;
pub mod chain;
pub mod cli;
pub mod error;
pub mod exact;
pub mod montecarlo;
mod numeric;
pub mod oracle;
pub mod tilt;

pub use chain::{
    derive_chain, indicator_autocov, sample_trajectory, ChainParams, State, Trajectory,
};
pub use error::{Error, Result};
pub use exact::{
    centered_cumulants, jn_law, occupation_pgf, occupation_pmf, variance_correction,
    variance_exact, JnLaw, OccupationPmf, VarianceMethod,
};
pub use tilt::{
    ba_fixed_point_iterate, ba_operating_point, binary_entropy, jtilt, tilted_stats,
    BAOperatingPoint, DistortionLevel, TiltedStats,
};
