//! Invariant distributions of quasi-birth-and-death processes through
//! matrix-valued potential coefficients, and a matrix orthogonal polynomial
//! pipeline that produces such processes from a weight matrix.
//!
//! Every numeric routine is generic over [`Scalar`], implemented for exact
//! [`Rational`] arithmetic and for `f64`.

#![allow(clippy::needless_range_loop)]

pub mod family;
pub mod invariant;
pub mod matrix;
pub mod model;
pub mod model_file;
pub mod mop;
pub mod potential;
pub mod quadrature;
pub mod scalar;
pub mod tolerances;

pub use family::{
    classify, golden, normalize, reconstruct, Classification, FamilyError, FamilyParams, Normalization, Reconstruction,
};
pub use invariant::{
    brute_force_invariant, compare_with_oracle, invariant_vector, stationarity_residual, InvariantError,
    InvariantVector, Recurrence, Uniqueness,
};
pub use matrix::{LinalgError, Mat};
pub use model::{BlockTridiagonal, Kind, Level, LevelGenerator, LevelVector, ModelError};
pub use model_file::{parse_model, read_model, write_model, ModelFile, ModelFileError};
pub use mop::{MomentScalar, MopError, MopFamily, NormalizedFamily, WeightSpec};
pub use potential::{check_symmetry_conditions, potential_coefficients, PotentialError, PotentialSequence};
pub use scalar::{ratio, Rational, Scalar};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/scalars-and-matrices.md")]
    struct ScalarsAndMatrices;
    #[doc = include_str!("../../../book/src/models.md")]
    struct Models;
    #[doc = include_str!("../../../book/src/potential-coefficients.md")]
    struct PotentialCoefficients;
    #[doc = include_str!("../../../book/src/invariant-distribution.md")]
    struct InvariantDistribution;
    #[doc = include_str!("../../../book/src/orthogonal-polynomials.md")]
    struct OrthogonalPolynomials;
    #[doc = include_str!("../../../book/src/example-family.md")]
    struct ExampleFamily;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
