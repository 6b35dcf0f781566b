//! Spectral decimation on the Sierpinski gasket and exact counting of the
//! extreme sets of its Laplacian eigenfunctions.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod decimation;
pub mod eigenfunction;
pub mod error;
pub mod extrema;
pub mod gasket;
pub mod oracle;
pub mod projective;
pub mod regions;
pub mod spectrum;
pub mod verify;

pub use error::{Error, Result};
