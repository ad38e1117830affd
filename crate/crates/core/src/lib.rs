//! Restricted isometry constants, sparse submatrix norms and tail experiments
//! for random matrices with independent isotropic log-concave rows.
//!
//! * [`sampler`]: isotropic log-concave laws with splittable randomness.
//! * [`metrics`]: δ_m, Γ_{k,m}, projection suprema, order statistics, k′, λ.
//! * [`tails`]: σ_X(p), survival curves, bound evaluation, constant fitting.
//! * [`recovery`]: basis pursuit and RIP ensembles.
//! * [`xp`]: configuration-driven experiments with reproducible output.

pub mod combin;
pub mod error;
pub mod matrix;
pub mod metrics;
pub mod recovery;
pub mod rng;
pub mod sampler;
pub mod tails;
pub mod xp;

pub use error::{Error, Result};
pub use matrix::{operator_norm, Matrix};
pub use rng::RandomStream;
pub use sampler::{isotropic_scale, sample_matrix, sample_vector, DistributionSpec, Kind};
