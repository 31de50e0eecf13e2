//! Numerical toolkit for linking-based minimax critical point theory on
//! finite-dimensional Hilbert spaces.

// `!(a <= b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod deformation;
pub mod ekeland;
pub mod exec;
pub mod functional;
pub mod geometry;
pub mod minimax;
pub mod report;
pub mod space;

pub use exec::Exec;
pub use functional::{Functional, TestFunctional};
pub use space::{Decomposition, SetDescriptor, Vector};
