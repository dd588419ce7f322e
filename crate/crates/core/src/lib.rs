//! Outlier detection by cascaded self-representation.
//!
//! Every point is written as an elastic-net combination of the other points
//! ([`solver`]). The coefficients define a directed graph, and the averaged
//! random walk on it ([`walk`]) gives each point a probability: walkers drain
//! out of outliers and into inliers. [`cascade`] repeats this on the
//! reconstruction residuals and fuses the stage scores. [`eval`] computes
//! AUC/F1 against ground truth, and [`baselines`] has the ℓ1-norm and
//! single-stage reference detectors.
//!
//! ```no_run
//! use odcsr_core::{generate_synthetic, normalize_columns, run_cascade, CascadeConfig, SyntheticSpec};
//!
//! let synth = generate_synthetic(&SyntheticSpec {
//!     ambient_dim: 50,
//!     num_subspaces: 3,
//!     subspace_dim: 4,
//!     inliers_per_subspace: 64,
//!     num_outliers: 34,
//!     noise_sigma: 0.01,
//!     rng_seed: 1,
//! })?;
//! let x = normalize_columns(&synth.data).data;
//! let result = run_cascade(&x, &CascadeConfig::default())?;
//! println!("{:?}", result.fused_scores.as_slice());
//! # Ok::<(), odcsr_core::Error>(())
//! ```

pub mod baselines;
pub mod cascade;
pub mod data;
mod error;
pub mod eval;
pub mod io;
pub mod solver;
pub mod walk;

pub use baselines::{l1_preset, l1_thresholding_scores, rgraph_preset, L1Scores};
pub use cascade::{fuse_scores, reconstruct, residual, run_cascade, CascadeConfig, CascadeResult, Fusion, StageResult};
pub use data::{
    generate_synthetic, normalize_columns, DataMatrix, Label, LabelVector, Normalized, SyntheticData, SyntheticSpec,
};
pub use error::{Error, Result};
pub use eval::{auc, f1_at_count, Confusion, EvalReport, Polarity};
pub use solver::{
    effective_gamma, solve_all, solve_column, ColumnSolution, ElasticNetConfig, GammaMode, SelfExpression,
    SelfRepresentation, SparseColumn,
};
pub use walk::{averaged_walk, build_transition, classify, ScoreVector, TransitionMatrix};
