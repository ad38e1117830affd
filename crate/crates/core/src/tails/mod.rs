//! Monte Carlo estimates of σ_X(p) and tail curves, plus closed-form
//! evaluation of every probability bound and constant fitting against them.

pub mod bounds;
pub mod curve;
pub mod fit;
pub mod sigma;

pub use bounds::{evaluate_bound, m0_scan, BoundId, BoundQuery, BoundValue};
pub use curve::{
    clopper_pearson, default_t_grid, sample_statistic, survival_curve, tail_curve, TailCurve, TailStatistic,
};
pub use fit::{fit_constant, FitResult};
pub use sigma::{
    paouris_ratio, sigma_closed_form, sigma_estimate, sigma_inverse, PaourisRatio, SearchMode, SigmaEstimate,
    SigmaInverse, SigmaMethod, SigmaProfile, DEFAULT_P_GRID,
};
