//! Command-line driver, file formats and experiment harness for
//! data-driven poroelasticity, built on [`ddporo_core`].
//!
//! * [`config`] – versioned JSON run configurations with field-path errors;
//! * [`formats`] – dataset CSV/manifest, VTK field files, logs and summaries;
//! * [`experiments`] – runs, error studies, traction monitors and timings;
//! * [`cli`] – the `ddporo` command line.

#![warn(missing_docs)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod experiments;
pub mod formats;

pub use config::{ProblemConfig, ProblemKind, Setup};
