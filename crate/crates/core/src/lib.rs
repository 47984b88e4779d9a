//! Numerical laboratory for the p-adic hierarchical long-range φ⁴ model.
//!
//! Geometry ([`padic`], [`tree`], [`mobius`]), Gaussian fields
//! ([`gaussian`]), the exact hierarchical RG map ([`rg`]), tree-recursive
//! correlation functions ([`correlator`]), an MCMC oracle ([`sampler`]) and
//! the arithmetic-geometric-mean example ([`agm`]).

pub mod agm;
pub mod conformal;
pub mod correlator;
pub mod error;
pub mod gaussian;
pub mod mobius;
pub mod padic;
pub mod quadrature;
pub mod rg;
pub mod sampler;
pub mod tree;

pub use error::{Error, Result};
