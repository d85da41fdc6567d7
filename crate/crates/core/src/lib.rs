//! Nehari-manifold computations for a singular, sign-changing fractional
//! elliptic system on an interval.
//!
//! The crate discretizes the X0 energy norm with piecewise-linear elements,
//! projects direction pairs onto the two branches of the Nehari manifold
//! through the fiber-map root structure, minimizes the energy on each branch,
//! and checks the explicit constants and inequalities that govern the
//! two-solution picture.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod fiber;
pub mod form;
pub mod harness;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod thresholds;
pub mod verify;

pub use error::{Error, Result};
pub use form::{assemble_form, GagliardoForm};
pub use problem::{
    validate_params, GridFunction, GridPair, GridSpec, ProblemSpec, ValidatedProblem, WeightSpec,
};
