//! Time-symmetric process matrices: operator algebra, local operations,
//! process validation and classification, outcome distributions and
//! causal-game scoring.

pub mod algebra;
pub mod distributions;
pub mod error;
pub mod inequalities;
pub mod operations;
pub mod processes;
pub mod report;
pub mod sampling;

pub use algebra::{
    decompose, make_basis, reconstruct, CoefficientTensor, HermitianBasis, HilbertFactor,
    LabeledOperator, Part,
};
pub use error::{Error, Result};
pub use report::{Check, ValidationReport};
