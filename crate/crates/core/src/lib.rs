//! Numerical laboratory for deep random-features models with one-bit
//! quantized hidden weights.
//!
//! The crate builds random-features networks with Gaussian or sign
//! (Rademacher) weights, trains the last layer to interpolation under the
//! implicit bias of (stochastic) mirror descent, predicts the asymptotic
//! test error through the Gaussian-equivalence covariance recursion and the
//! associated scalar saddle systems, and benchmarks a bit-packed inference
//! kernel against a dense baseline.
//!
//! All numerical code is generic over the scalar type through the [`Real`]
//! trait; `f64` is the working precision everywhere in the shipped
//! experiments and the crate root exports concrete `f64` aliases.

pub mod activation;
pub mod bitpack;
pub mod dataio;
pub mod error;
pub mod experiments;
pub mod gep;
pub mod interpolate;
pub mod linalg;
pub mod mirror;
pub mod quadrature;
pub mod real;
pub mod rf_model;
pub mod theory;

pub use activation::ActivationKind;
pub use error::{CoreError, Result};
pub use mirror::MirrorMap;
pub use real::Real;

/// Dense row-major matrix of reals.
pub type Matrix<T> = ndarray::Array2<T>;
/// Dense vector of reals.
pub type Vector<T> = ndarray::Array1<T>;

// Concrete working-precision aliases. Everything the experiments and the
// CLI touch runs at f64.
pub type Mat = Matrix<f64>;
pub type Vec64 = Vector<f64>;
pub type RfNetwork64 = rf_model::RfNetwork<f64>;
pub type PackedOneBit64 = bitpack::PackedOneBit<f64>;
pub type GepState64 = gep::GepState<f64>;
pub type TheoryInput64 = theory::TheoryInput<f64>;
pub type TheorySolution64 = theory::TheorySolution<f64>;
