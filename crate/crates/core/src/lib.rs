//! Thermodynamic formalism on subshifts of finite type, with a normal-form
//! calculus for Cuntz–Krieger algebras, KMS checks, Lyapunov spectra,
//! first-return inducing and one-dimensional Möbius examples.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod algebra;
pub mod cli;
pub mod error;
pub mod function;
pub mod geometry;
pub mod inducing;
pub mod kms;
pub mod measure;
pub mod rn_rep;
pub mod scalar;
pub mod spectrum;
pub mod symbolic;
pub mod transfer;

pub use error::{Error, Result};
pub use function::LocallyConstantFunction;
pub use measure::CylinderMeasure;
pub use scalar::Real;
pub use symbolic::{CylinderMetric, IncidenceSystem, Word};

/// Real potential with `f64` values.
pub type Potential = LocallyConstantFunction<f64>;
/// Complex-valued locally constant function.
pub type ComplexFunction = LocallyConstantFunction<num_complex::Complex64>;
/// Probability measure with `f64` masses.
pub type Measure = CylinderMeasure<f64>;
pub type Eigen = transfer::EigenData<f64>;
