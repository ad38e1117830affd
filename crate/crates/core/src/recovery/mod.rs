//! ℓ1-minimization recovery and RIP-constant ensembles.

pub mod experiment;
pub mod solver;

pub use experiment::{
    delta_m_ensemble, quantile, random_sparse_signal, recovery_experiment, DeltaEnsemble, DeltaMethod, RecoveryReport,
    RecoveryTrial, SUCCESS_TOL,
};
pub use solver::{basis_pursuit, DEFAULT_TOL};
