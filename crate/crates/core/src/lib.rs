//! Minimum-compliance topology optimization on structured grids with a
//! self-supporting (overhang) constraint for additive manufacturing.
//!
//! The unsupported elements of a design are found by a stencil sweep with an
//! overhang kernel; the constraint `U = sum rho_e^2` over those elements is
//! driven to zero by MMA alongside the usual SIMP volume constraint.

pub mod error;
pub mod export;
pub mod fem;
pub mod filters;
pub mod grid;
pub mod optimizer;
pub mod problem;
pub mod report;
pub mod support;

pub use error::{Error, Result};
