//! Exact and heuristic sparse-submatrix quantities: δ_m, Γ_{k,m}, projection
//! suprema, order statistics and the thresholds k′ and λ.

pub mod delta;
pub mod gamma;
pub mod order;
pub mod thresholds;

pub use delta::{delta_m_exact, delta_m_exact_with_cap, delta_m_sampled, DeltaReport, Side, DEFAULT_DELTA_CAP};
pub use gamma::{
    gamma_km, gamma_km_exact, gamma_km_exact_with_cap, gamma_km_heuristic, gamma_km_heuristic_warm,
    GammaCertificate, GammaMethod, DEFAULT_GAMMA_CAP,
};
pub use order::{decreasing_rearrangement, order_statistic, top_m_energy};
pub use thresholds::{k_prime, lambda_threshold, self_consistent_k, KPrime, ScanOptions};
