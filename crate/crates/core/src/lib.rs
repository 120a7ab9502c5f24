//! Spectral-Galerkin solver for regularized anisotropic parabolic equations
//! with variable exponents on boxes, plus the numerics used to verify it.

pub mod basis;
pub mod domain;
pub mod exponents;
pub mod field_dsl;
pub mod funcspace;
pub mod monitor;
pub mod quadrature;
pub mod solver;
pub(crate) mod tensor;

pub use basis::{Derivative, EigenIndex, SineBasis, SpectralCoeffs};
pub use domain::{RectDomain, SampleGrid};
pub use exponents::{ExponentField, ExponentReport, ExtReal};
pub use field_dsl::FieldExpr;
pub use funcspace::GridFunction;
pub use quadrature::TensorGrid;
