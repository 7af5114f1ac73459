//! Simulation of lossy Gaussian boson sampling.
//!
//! The output covariance is split into a pure part and classical
//! displacement noise, the pure part is written as a matrix product state
//! built directly from Gaussian matrix elements, and photon patterns are
//! drawn site by site from displaced copies of that state.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod decompose;
pub mod error;
pub mod estimate;
pub mod gaussian;
pub mod hafnian;
pub mod io;
pub mod linalg;
pub mod mps;
pub mod pipeline;
pub mod sampler;

pub use error::{Error, Result};
