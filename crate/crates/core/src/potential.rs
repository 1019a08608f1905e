//! Matrix-valued potential coefficients.
//!
//! For a block-tridiagonal model with nonsingular up and down blocks, the
//! potential coefficients are the symmetric positive definite matrices
//!
//! ```text
//! Π_n = (C_1ᵀ C_2ᵀ ⋯ C_nᵀ)⁻¹ Π_0 (A_0 A_1 ⋯ A_{n-1}),
//! ```
//!
//! which satisfy `Π_n B_n = B_nᵀ Π_n` and `Π_n A_n = C_{n+1}ᵀ Π_{n+1}` when
//! `Π_0` comes from the weight matrix of the model. They are computed here by
//! the one-step form `Π_n = (C_nᵀ)⁻¹ Π_{n-1} A_{n-1}`.

use crate::matrix::{LinalgError, Mat};
use crate::model::{BlockTridiagonal, ModelError};
use crate::scalar::Scalar;
use crate::tolerances;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PotentialError {
    #[error("Π_0 must be symmetric positive definite")]
    InvalidSeed,
    #[error("C_{level} is singular")]
    SingularDownBlock { level: usize },
    #[error("Π_{level} is not symmetric (residual {residual}); Π_0 does not belong to this model")]
    Asymmetric { level: usize, residual: String },
    #[error("Π_{level} is not positive definite")]
    NotPositiveDefinite { level: usize },
    #[error("symmetrizer: {0}")]
    Factorization(LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `Π_0, Π_1, …` for a prefix of levels.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSequence<T> {
    pub pi0: Mat<T>,
    pub items: Vec<Mat<T>>,
}

impl<T: Scalar> PotentialSequence<T> {
    /// `Π_n`.
    pub fn get(&self, n: usize) -> &Mat<T> {
        if n == 0 {
            &self.pi0
        } else {
            &self.items[n - 1]
        }
    }

    /// Number of stored coefficients, `Π_0` included.
    pub fn len(&self) -> usize {
        self.items.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = &Mat<T>> {
        std::iter::once(&self.pi0).chain(&self.items)
    }
}

/// Computes `Π_1..Π_{n_max}` from `Π_0` and the up/down blocks of `model`.
///
/// Every computed `Π_n` must come out symmetric (exactly, or within `1e-11`
/// relative on floats) and positive definite; otherwise `pi0` is not the
/// seed that belongs to `model`.
pub fn potential_coefficients<T: Scalar>(
    model: &BlockTridiagonal<T>,
    pi0: &Mat<T>,
    n_max: usize,
) -> Result<PotentialSequence<T>, PotentialError> {
    if pi0.shape() != (model.phases(), model.phases()) || !pi0.is_positive_definite() {
        return Err(PotentialError::InvalidSeed);
    }
    if model.len() < n_max + 1 {
        return Err(ModelError::InsufficientLevels {
            needed: n_max + 1,
            available: model.len(),
        }
        .into());
    }
    let mut items: Vec<Mat<T>> = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let prev = items.last().unwrap_or(pi0);
        let ct_inv = model
            .c(n)
            .transpose()
            .inverse()
            .map_err(|_| PotentialError::SingularDownBlock { level: n })?;
        let next = &(&ct_inv * prev) * model.a(n - 1);
        let asym = next.max_abs_diff(&next.transpose());
        if !asym.is_negligible(&next.max_abs(), tolerances::SYMMETRY_REL) {
            return Err(PotentialError::Asymmetric {
                level: n,
                residual: asym.to_string(),
            });
        }
        if !next.is_positive_definite() {
            return Err(PotentialError::NotPositiveDefinite { level: n });
        }
        items.push(next);
    }
    Ok(PotentialSequence {
        pi0: pi0.clone(),
        items,
    })
}

/// Residuals of both symmetry conditions at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelConditions<T> {
    pub level: usize,
    /// max-entry of `Π_n B_n − B_nᵀ Π_n`
    pub diagonal: T,
    pub diagonal_ok: bool,
    /// max-entry of `Π_n A_n − C_{n+1}ᵀ Π_{n+1}`, when level `n+1` is covered
    pub off_diagonal: Option<T>,
    pub off_diagonal_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport<T> {
    pub levels: Vec<LevelConditions<T>>,
}

impl<T: Scalar> SymmetryReport<T> {
    pub fn passed(&self) -> bool {
        self.levels.iter().all(|l| l.diagonal_ok && l.off_diagonal_ok)
    }

    /// First level where either condition fails.
    pub fn first_failure(&self) -> Option<usize> {
        self.levels
            .iter()
            .find(|l| !(l.diagonal_ok && l.off_diagonal_ok))
            .map(|l| l.level)
    }

    pub fn max_residual(&self) -> T {
        self.levels
            .iter()
            .flat_map(|l| std::iter::once(&l.diagonal).chain(l.off_diagonal.as_ref()))
            .cloned()
            .fold(T::zero(), |m, v| if v > m { v } else { m })
    }
}

/// Evaluates `Π_n B_n = B_nᵀ Π_n` and `Π_n A_n = C_{n+1}ᵀ Π_{n+1}` on every
/// level covered by both `model` and `ps`.
pub fn check_symmetry_conditions<T: Scalar>(
    model: &BlockTridiagonal<T>,
    ps: &PotentialSequence<T>,
) -> SymmetryReport<T> {
    let count = ps.len().min(model.len());
    let levels = (0..count)
        .map(|n| {
            let pi = ps.get(n);
            let b = model.b(n);
            let lhs = pi * b;
            let diagonal = lhs.max_abs_diff(&(&b.transpose() * pi));
            let diagonal_ok = diagonal.is_negligible(&pi.max_abs(), tolerances::CONDITION_REL);
            let (off_diagonal, off_diagonal_ok) = if n + 1 < count && model.has_a(n) {
                let next = ps.get(n + 1);
                let r = (pi * model.a(n)).max_abs_diff(&(&model.c(n + 1).transpose() * next));
                let scale = {
                    let (x, y) = (pi.max_abs(), next.max_abs());
                    if x > y {
                        x
                    } else {
                        y
                    }
                };
                let ok = r.is_negligible(&scale, tolerances::CONDITION_REL);
                (Some(r), ok)
            } else {
                (None, true)
            };
            LevelConditions {
                level: n,
                diagonal,
                diagonal_ok,
                off_diagonal,
                off_diagonal_ok,
            }
        })
        .collect();
    SymmetryReport { levels }
}

/// One upper-triangular `R_n` with `R_nᵀ R_n = Π_n`. Any `U R_n` with `U`
/// orthogonal works as well; this picks the Cholesky factor.
pub fn symmetrizer(pi_n: &Mat<f64>) -> Result<Mat<f64>, PotentialError> {
    pi_n.cholesky().map_err(PotentialError::Factorization)
}
