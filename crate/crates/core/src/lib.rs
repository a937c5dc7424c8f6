//! Tree-structured Parzen estimator with every control parameter behind a
//! named, swappable strategy.
//!
//! Strategies (splitting rules, weighting rules, bandwidth heuristics,
//! benchmark functions, presets) live in static registries and are picked by
//! name from a [`TpeConfig`]. A [`Study`] runs the ask/tell loop;
//! [`harness`] batches studies and computes rank and quantile analyses.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandwidth;
pub mod benchmarks;
pub mod config;
pub mod error;
pub mod harness;
pub mod kde;
pub mod kernels;
pub mod normal;
pub mod record;
pub mod registry;
pub mod sampler;
pub mod space;
pub mod splitting;
pub mod weighting;

pub use config::{preset, TpeConfig};
pub use error::{Error, Result};
pub use record::{StudyResult, TrialRecord};
pub use sampler::{Evaluation, Observation, Study, TpeModel};
pub use space::{Configuration, ParamDomain, ParamSpec, ParamValue, SearchSpace};
