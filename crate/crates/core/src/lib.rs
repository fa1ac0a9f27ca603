//! Conditional-average improvement of deterministic estimators, exercised on
//! material-modeling pipelines.
//!
//! The core idea: given any initial estimator of a physical quantity and a
//! statistic that is *sufficient* for that quantity (the truth is constant on
//! the statistic's level sets), averaging the estimator over each level set
//! can never increase the mean squared error. The [`rb`] module implements
//! the binned empirical form of that average together with its quadrature
//! form over rotation orbits; [`mechanics`], [`oracles`] and [`datagen`]
//! supply the tensor algebra, analytic ground truths and dataset builders
//! used by the example experiments in [`experiments`]; [`nnet`] provides the
//! small deterministic networks serving as initial estimators.

pub mod datagen;
pub mod error;
pub mod experiments;
pub mod mechanics;
pub mod nnet;
pub mod oracles;
pub mod rb;

pub use error::{Error, Result};
