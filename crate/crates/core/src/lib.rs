//! Numerical laboratory for the H∞ functional calculus of exponentially
//! stable, finite-dimensional semigroup generators.
//!
//! `g(A)` is built three independent ways (closed-form spectral/resolvent,
//! the convolution integral against the symbol's kernel, and read-off from
//! the Toeplitz output map on a sampled half-line), and the classical bounds
//! around admissible observation operators are checked numerically.

pub mod admissibility;
pub mod calculus;
pub mod cli;
pub mod error;
pub mod hardy;
pub mod numkernel;
pub mod quadrature;
pub mod semigroup;
pub mod symbols;
pub mod verifier;

pub use error::{Error, Result};
