//! Fredholm and 2-modified Fredholm determinants of semi-separable integral
//! kernels, with Jost functions and bound-state counts for matrix Schrödinger
//! operators on the line and half-line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kernel;
pub mod numerics;
pub mod quadrature;
pub mod reduction;
pub mod schrodinger;

pub use error::{Error, Result};
pub use kernel::{DiagonalConvention, OperatorFunction, SemiSeparableKernel};
pub use num_complex::Complex64;
pub use numerics::CMatrix;
pub use quadrature::{Envelope, Quadrature, Scheme, TruncationReport};
pub use reduction::{DetKind, DetResult, PropagatorRoute, Route, VolterraMethod, Which};
pub use schrodinger::{Domain, Potential, SpectralPoint};
