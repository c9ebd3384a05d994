//! Electromagnetic Kirchhoff migration with planar arrays.
//!
//! The crate synthesizes passive (dipole source) and active (Born
//! scattering) array data in a homogeneous medium, forms vector and tensor
//! Kirchhoff migration images, and recovers the cross-range components of
//! polarization vectors and polarizability tensors.

// NaN-rejecting `!(x > 0.0)` checks and index loops over 3-vectors are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod emcore;
pub mod error;
pub mod forward;
pub mod imaging;
pub mod scene;

pub use error::{Error, Result};
