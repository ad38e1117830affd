//! Configuration-driven experiments with deterministic on-disk artifacts.

pub mod config;
pub mod run;
pub mod selftest;

pub use config::{
    BoundSection, ExperimentConfig, ExperimentKind, Grids, MethodKind, Options, Output, Sizes, StatisticKind,
    ENV_OUT, ENV_WORKERS,
};
pub use run::{curve_csv, curve_dat, manifest, run, RunReport, TOOL, VERSION};
pub use selftest::{selftest, Check, Tag};
