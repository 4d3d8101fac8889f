//! Centrality-oriented causal inference with statistical depth functions.
//!
//! Treatment trajectories are ordered by a functional depth (modified band,
//! Fraiman–Muniz or extremal depth). Units with low depth form the
//! counterfactual group C, the rest the factual group F. Outcome vectors are
//! ranked by projection depth in the pooled sample and the groups are
//! compared through the rank sum over C, against random splits of the same
//! size. Short series are densified by replicating them around a deepest
//! regression line.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the usual double-precision instantiation.

pub mod data;
pub mod error;
pub mod functional;
pub mod multivariate;
pub mod pipeline;
pub mod rank_tests;
pub mod regression;
pub mod report;
pub mod scalar;
pub mod stats;

pub use data::{
    aggregate_h, load_curves, load_outcomes, load_subsidies, write_curves, DepthMethod, DepthVector, FunctionalSample,
    MultivariateSample, SubsidyRecord, UnitId,
};
pub use error::{Error, Result};
pub use functional::{
    causal_strength, extremal_depth, fm_depth, functional_depth, functional_median, mbd, median_difference,
    MedianDifference,
};
pub use multivariate::{depth_ranks, projection_depth, DirectionKind, DirectionSet};
pub use pipeline::{
    depth_split, outlyingness_split, run_baseline, run_once, run_pipeline, split_groups, CausalReport, GroupSplit,
    PipelineConfig, Replication, SplitMode,
};
pub use rank_tests::{permutation_pvalue, wilcoxon_sum, WilcoxonResult};
pub use regression::{deepest_line, regression_depth, replicate_series, sigma_hat, LinearFit, ScaleEstimator};
pub use scalar::Scalar;
pub use stats::RandomStream;

pub type FunctionalSample64 = FunctionalSample<f64>;
pub type FunctionalSample32 = FunctionalSample<f32>;
pub type MultivariateSample64 = MultivariateSample<f64>;
pub type MultivariateSample32 = MultivariateSample<f32>;
pub type DepthVector64 = DepthVector<f64>;
pub type DepthVector32 = DepthVector<f32>;
pub type LinearFit64 = LinearFit<f64>;
pub type WilcoxonResult64 = WilcoxonResult<f64>;
pub type CausalReport64 = CausalReport<f64>;
pub type DirectionSet64 = DirectionSet<f64>;
pub type MedianDifference64 = MedianDifference<f64>;
