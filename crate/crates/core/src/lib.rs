//! Numerical toolkit for flag-kernel fractional integrals on mixed-homogeneous spaces.
//!
//! The core is generic over a floating scalar ([`scalar::Real`], implemented for `f32` and
//! `f64`) and, for exponent bookkeeping, over an exact scalar ([`scalar::ExactScalar`]).
//! The aliases below fix the common choices.

pub mod atoms;
pub mod domain;
pub mod error;
pub mod experiments;
pub mod exponents;
pub mod kernel;
pub mod quadrature;
pub mod rational;
pub mod scalar;

pub use error::{Error, Result};

/// Arbitrary-precision rational used for exponents.
pub type Rational = num_rational::BigRational;

pub type Exponents = exponents::ExponentConfig<Rational>;
pub type Kernel = kernel::FlagKernel<f64>;
pub type KernelF32 = kernel::FlagKernel<f32>;
pub type Point = kernel::PointPair<f64>;
pub type Atom = atoms::Atom<f64>;
