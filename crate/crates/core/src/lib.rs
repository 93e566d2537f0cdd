// Negated float comparisons are used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod hilbert;
pub mod intertwine;
pub mod linalg;
pub mod moments;
pub mod report;
pub mod spectra;
pub mod vcs;

pub use error::{Error, Result};
