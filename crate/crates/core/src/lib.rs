//! Bayesian low-rank matrix factorization with symmetry-aware priors.
//!
//! The model factors a partially observed matrix as `X = A Bᵀ` with
//! independent Gaussian priors on the columns of `A` and `B` and Gaussian
//! observation noise. The crate provides:
//!
//! - [`model`]: priors, observations, states and the log-posterior with its gradient,
//! - [`symmetry`]: precision-product partitions, admissible invariance transforms and
//!   the rank certificate that decides whether prior means break every invariance,
//! - [`samplers`]: a blocked Gibbs sampler and an HMC sampler,
//! - [`diagnostics`]: autocorrelation, integrated autocorrelation time, RMSE and
//!   multi-chain aggregation.

pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod samplers;
pub mod symmetry;

pub use error::{Error, Result};
pub use model::{FactorModel, FactorState, NoiseTerm, Observation, ObservationSet};

/// Deterministic per-chain generator.
pub type ChainRng = rand_chacha::ChaCha8Rng;
