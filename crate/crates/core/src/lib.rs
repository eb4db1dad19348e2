//! Calibration metrics for predictions scored against soft (probabilistic)
//! labels, plus a seeded simulation harness built on a two-Gaussian
//! generative model whose posterior is known in closed form.
//!
//! - [`binning`]: equal-width bins, SMECE, ECE, Brier score, reliability points.
//! - [`generative`]: the analytic posterior, a density-ratio oracle, dataset sampling.
//! - [`models`]: the five reference predictors.
//! - [`experiments`]: Monte Carlo runners and pairwise ranking accuracy.
//! - [`io`]: file formats and the command implementations behind the CLI.

pub mod binning;
pub mod error;
pub mod experiments;
pub mod generative;
pub mod io;
pub mod models;

pub use binning::{
    assign_bin, brier, ece, reliability_points, smece, summarize_bins, BinSummary, Binning,
    CalibrationReport, EvalSample, ReliabilityPoint, ReliabilityTarget, UpperEdge,
};
pub use error::{Error, Result};
pub use experiments::{ExperimentConfig, ExperimentResult, Metric, Parallelism};
pub use generative::{posterior, posterior_oracle, GaussianPair, GenerativeConfig, HardMode};
pub use models::{ModelKind, ModelSpec};
