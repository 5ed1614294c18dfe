//! Tabular regression toolkit for birth-weight style cohorts.
//!
//! The pipeline runs exploratory diagnostics ([`dataset`]), completes missing
//! cells with KNN for discrete columns and chained-equation PMM for continuous
//! columns ([`imputation`]), ranks features with twelve supervised selectors
//! and a consensus ([`selectors`]), fits eight regression families
//! ([`models`]) and scores every selector x model pair with grid-searched
//! k-fold cross-validation plus a hold-out split ([`evaluation`]).
//! [`synthgen`] produces cohorts with planted ground truth for verification.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod imputation;
pub mod linalg;
pub mod models;
pub mod rng;
pub mod selectors;
pub mod synthgen;

pub use error::{Error, Result};
