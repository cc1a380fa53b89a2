//! Experiment pipelines, file formats and model bundles around `kedmd-core`.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod svg;
