//! Robust location recovery from pairwise directions.
//!
//! [`solvers`] has ShapeFit, ShapeKick and LUD, all built on the ADMM
//! engine in [`admm`]. [`synth`] draws random instances, [`oracle`] is a
//! slow reference minimiser for small ones, and [`harness`] runs seeded
//! benchmark sweeps. The guide in `book/` covers the concepts.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod error;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod solvers;
pub mod synth;

pub use error::{Error, Result};
