//! File formats, synthetic fixtures and the command layer around
//! `alphaforge-core`.
//!
//! The `alphaforge` binary is a thin argument parser over [`commands`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod fixture;
pub mod io;

pub use commands::{CommandError, Overrides};
pub use config::RunConfig;
