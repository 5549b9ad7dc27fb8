//! Numerical laboratory for the asymptotic dynamics of bounded linear
//! operators and one-parameter semigroups.
//!
//! The crate works on two kinds of models: finite-dimensional operators
//! (dense, rotation, column-stochastic, direct sums) handled with dense
//! complex linear algebra, and weighted shifts acting exactly on finitely
//! supported sequences indexed by `Z`. On the second kind, unit-weight
//! shifts are genuine isometries of an infinite-dimensional space.

pub mod error;
pub mod linalg;
pub mod operator;
pub mod orbit;
pub mod sampling;
pub mod semigroup;
pub mod spectral;
pub mod supercyclic;
pub mod weyl;

pub use error::{Error, Result};
pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
