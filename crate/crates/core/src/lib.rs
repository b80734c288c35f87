//! Data-driven poroelasticity.
//!
//! This crate contains everything needed to solve coupled solid–fluid
//! (Biot) problems where one or both constitutive relations are replaced by
//! a discrete set of material measurements:
//!
//! * [`tensor`] – symmetric second/fourth-order tensors in Kelvin notation
//!   and symmetric-positive-definite factorizations;
//! * [`phase`] – solid and fluid phase-space points, energy-like metrics and
//!   the Euclidean embedding that preserves their ordering;
//! * [`dataset`] – grid generation, law sampling and porosity-labelled
//!   dataset families;
//! * [`nns`] – exact nearest-neighbour search (k-d tree and brute force);
//! * [`fem`] – quadrilateral/hexahedral meshes, shape functions, quadrature
//!   and degree-of-freedom maps;
//! * [`linalg`] – banded LU factorization with reverse Cuthill–McKee
//!   ordering;
//! * [`constitutive`] – Hooke, Darcy and hyperelastic laws with Borja
//!   calibration;
//! * [`solver`] – the data-driven fixed-point scheme in its fully
//!   data-driven and two hybrid forms, plus the model-based reference;
//! * [`analytic`] – closed-form benchmark solutions and error measures;
//! * [`problems`] – ready-made benchmark set-ups.
//!
//! The crate is `no_std` (with `alloc`); enable the `std` feature for
//! [`std::error::Error`] integration in downstream binaries.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![warn(missing_docs)]
// NaN-rejecting checks are written `!(x > 0.0)` on purpose, and index loops
// mirror the component formulas of the tensor and FEM kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod analytic;
pub mod constitutive;
pub mod dataset;
mod error;
pub mod fem;
pub mod linalg;
pub(crate) mod math;
pub mod nns;
pub mod phase;
pub mod problems;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
