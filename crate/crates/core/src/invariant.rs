//! Invariant measures of block-tridiagonal chains.
//!
//! Given potential coefficients `Π_n`, the row vector
//! `π = ((Π_0 e)ᵀ, (Π_1 e)ᵀ, …)` satisfies `πP = π` for a stochastic `P`
//! (or `π𝒜 = 0` for a generator). This module assembles `π`, measures how far
//! a vector is from stationarity, and provides an independent brute-force
//! stationary vector of a finite truncation to compare against.

use std::fmt;

use crate::matrix::{LinalgError, Mat};
use crate::model::{BlockTridiagonal, Kind, LevelVector, ModelError};
use crate::potential::PotentialSequence;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InvariantError {
    #[error("negative component at level {level}, phase {phase}: Π_{level} is not positive semi-definite")]
    NegativeComponent { level: usize, phase: usize },
    #[error("need {needed} blocks, have {available}")]
    InsufficientBlocks { needed: usize, available: usize },
    #[error("total mass of the truncated vector is zero")]
    ZeroMass,
    #[error("oracle truncation must be at least {min}, got {got}")]
    TruncationTooSmall { min: usize, got: usize },
    #[error("oracle linear solve failed: {0}")]
    Solver(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Recurrence class of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recurrence {
    PositiveRecurrent,
    NullRecurrent,
    Transient,
}

impl Recurrence {
    pub fn is_recurrent(self) -> bool {
        !matches!(self, Recurrence::Transient)
    }

    /// Recurrent chains have a unique invariant measure up to scale; for
    /// transient chains uniqueness is not known in general.
    pub fn uniqueness(self) -> Uniqueness {
        if self.is_recurrent() {
            Uniqueness::Unique
        } else {
            Uniqueness::Unknown
        }
    }
}

impl fmt::Display for Recurrence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Recurrence::PositiveRecurrent => "positive recurrent",
            Recurrence::NullRecurrent => "null recurrent",
            Recurrence::Transient => "transient",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Uniqueness {
    Unique,
    Unknown,
}

impl Uniqueness {
    /// Label for reports: `"the invariant distribution (unique)"` or
    /// `"an invariant distribution (uniqueness unknown)"`.
    pub fn label(self) -> &'static str {
        match self {
            Uniqueness::Unique => "the invariant distribution (unique)",
            Uniqueness::Unknown => "an invariant distribution (uniqueness unknown)",
        }
    }
}

/// `π` restricted to the levels covered by a [`PotentialSequence`].
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantVector<T> {
    vector: LevelVector<T>,
}

impl<T: Scalar> InvariantVector<T> {
    pub fn as_level_vector(&self) -> &LevelVector<T> {
        &self.vector
    }

    pub fn into_level_vector(self) -> LevelVector<T> {
        self.vector
    }

    pub fn blocks(&self) -> &[Vec<T>] {
        &self.vector.blocks
    }

    pub fn block(&self, n: usize) -> &[T] {
        self.vector.block(n)
    }

    pub fn len(&self) -> usize {
        self.vector.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vector.is_empty()
    }
}

/// Block `n` is `(Π_n e)ᵀ`.
pub fn invariant_vector<T: Scalar>(ps: &PotentialSequence<T>) -> Result<InvariantVector<T>, InvariantError> {
    let mut blocks = Vec::with_capacity(ps.len());
    for (level, pi) in ps.iter().enumerate() {
        let block = pi.row_sums();
        if let Some(phase) = block.iter().position(|v| v.is_negative()) {
            return Err(InvariantError::NegativeComponent { level, phase });
        }
        blocks.push(block);
    }
    Ok(InvariantVector {
        vector: LevelVector::new(blocks),
    })
}

/// Max-norm of `(vM)_k − v_k` (discrete) or `(vM)_k` (continuous) for
/// `k = 0..levels`.
pub fn stationarity_residual<T: Scalar>(
    model: &BlockTridiagonal<T>,
    v: &LevelVector<T>,
    levels: usize,
) -> Result<Vec<T>, InvariantError> {
    let applied = model.row_apply(v, levels)?;
    Ok(match model.kind() {
        Kind::Discrete => {
            let head = LevelVector::new(v.blocks[..levels].to_vec());
            applied.blockwise_max_abs_diff(&head)
        }
        Kind::Continuous => applied.blockwise_max_abs_diff(&LevelVector::zeros(levels, model.phases())),
    })
}

/// Residual of the identities behind stationarity, written in terms of the
/// potential coefficients:
///
/// - level 0: `eᵀ(Π_0 B_0 + Π_1 C_1) − (Π_0 e)ᵀ`
/// - level n: `eᵀ(Π_{n−1} A_{n−1} + Π_n B_n + Π_{n+1} C_{n+1}) − (Π_n e)ᵀ`
///
/// For generators the target is zero instead of `(Π_n e)ᵀ`.
pub fn potential_identity_residuals<T: Scalar>(model: &BlockTridiagonal<T>, ps: &PotentialSequence<T>) -> Vec<T> {
    let count = ps.len().min(model.len()).saturating_sub(1);
    let ones = vec![T::one(); model.phases()];
    (0..count)
        .map(|n| {
            let mut total = &(ps.get(n) * model.b(n)) + &(ps.get(n + 1) * model.c(n + 1));
            if n > 0 {
                total = &total + &(ps.get(n - 1) * model.a(n - 1));
            }
            let lhs = total.vec_mul(&ones);
            let target = match model.kind() {
                Kind::Discrete => ps.get(n).row_sums(),
                Kind::Continuous => vec![T::zero(); model.phases()],
            };
            lhs.iter()
                .zip(&target)
                .map(|(a, b)| (a.clone() - b.clone()).abs())
                .fold(T::zero(), |m, v| if v > m { v } else { m })
        })
        .collect()
}

/// Stationary row vector of the lumped truncation on levels `0..=l`.
///
/// Solves `x (P − I) = 0` with one balance equation traded for `Σx = 1`.
/// The flattened result has `(l+1)·N` entries, ordered level-major.
pub fn brute_force_invariant<T: Scalar>(model: &BlockTridiagonal<T>, l: usize) -> Result<Vec<T>, InvariantError> {
    if l < 2 {
        return Err(InvariantError::TruncationTooSmall { min: 2, got: l });
    }
    let p = model.truncate_lumped(l)?;
    let size = p.rows();
    let mut system = Mat::from_fn(size, size, |i, j| {
        let v = p.get(j, i).clone();
        if i == j {
            v - T::one()
        } else {
            v
        }
    });
    // the balance equations are rank deficient by one; replace the last
    for j in 0..size {
        system.set(size - 1, j, T::one());
    }
    let mut rhs = vec![T::zero(); size];
    rhs[size - 1] = T::one();
    Ok(system.solve(&rhs)?)
}

/// `v` restricted to levels `0..=l`, divided by its total mass.
pub fn normalize_truncated<T: Scalar>(v: &LevelVector<T>, l: usize) -> Result<Vec<T>, InvariantError> {
    if v.len() < l + 1 {
        return Err(InvariantError::InsufficientBlocks {
            needed: l + 1,
            available: v.len(),
        });
    }
    let flat: Vec<T> = v.blocks[..=l].iter().flatten().cloned().collect();
    let mass = flat.iter().cloned().fold(T::zero(), |a, b| a + b);
    if mass.is_zero() {
        return Err(InvariantError::ZeroMass);
    }
    Ok(flat.into_iter().map(|x| x / mass.clone()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    /// Oracle blocks rescaled so that level 0, phase 1 matches `π`.
    pub rescaled: Vec<Vec<f64>>,
    /// Componentwise relative error against `π` per level.
    pub relative_errors: Vec<Vec<f64>>,
    pub max_relative_error: f64,
}

/// Compares levels `0..levels` of a flattened oracle vector with `π`.
pub fn compare_with_oracle<T: Scalar>(
    pi: &LevelVector<T>,
    oracle: &[T],
    levels: usize,
) -> Result<OracleComparison, InvariantError> {
    let phases = pi.blocks.first().map_or(0, Vec::len);
    let available = (oracle.len() / phases.max(1)).min(pi.len());
    if phases == 0 || available < levels {
        return Err(InvariantError::InsufficientBlocks {
            needed: levels,
            available,
        });
    }
    let anchor = oracle[0].to_f64();
    if anchor == 0.0 {
        return Err(InvariantError::ZeroMass);
    }
    let scale = pi.blocks[0][0].to_f64() / anchor;
    let mut rescaled = Vec::with_capacity(levels);
    let mut relative_errors = Vec::with_capacity(levels);
    let mut max_relative_error = 0.0f64;
    for n in 0..levels {
        let block: Vec<f64> = (0..phases).map(|j| oracle[n * phases + j].to_f64() * scale).collect();
        let errs: Vec<f64> = block
            .iter()
            .zip(&pi.blocks[n])
            .map(|(o, p)| {
                let p = p.to_f64();
                (o - p).abs() / p.abs()
            })
            .collect();
        max_relative_error = errs.iter().cloned().fold(max_relative_error, f64::max);
        rescaled.push(block);
        relative_errors.push(errs);
    }
    Ok(OracleComparison {
        rescaled,
        relative_errors,
        max_relative_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Level, LevelGenerator};
    use crate::potential::potential_coefficients;
    use crate::scalar::{ratio, Rational};
    use std::sync::Arc;

    fn walk(levels: usize) -> BlockTridiagonal<Rational> {
        let gen: LevelGenerator<Rational> = Arc::new(|n| {
            let one = |p, q| Mat::from_vec(1, 1, vec![ratio(p, q)]);
            if n == 0 {
                Level::new(one(1, 2), Some(one(1, 2)), None)
            } else {
                Level::new(one(0, 1), Some(one(1, 2)), Some(one(1, 2)))
            }
        });
        BlockTridiagonal::generated(1, Kind::Discrete, levels, gen).unwrap()
    }

    #[test]
    fn symmetric_walk_has_constant_measure() {
        let m = walk(10);
        let ps = potential_coefficients(&m, &Mat::identity(1), 9).unwrap();
        let pi = invariant_vector(&ps).unwrap();
        assert!(pi.blocks().iter().all(|b| b == &vec![ratio(1, 1)]));
        let res = stationarity_residual(&m, pi.as_level_vector(), 9).unwrap();
        assert!(res.iter().all(|r| *r == ratio(0, 1)));
        assert!(potential_identity_residuals(&m, &ps).iter().all(|r| *r == ratio(0, 1)));
    }

    #[test]
    fn perturbation_is_local() {
        let m = walk(10);
        let mut v = LevelVector::new(vec![vec![ratio(1, 1)]; 10]);
        v.blocks[3][0] = ratio(2, 1);
        let res = stationarity_residual(&m, &v, 9).unwrap();
        let nonzero: Vec<usize> = (0..9).filter(|&k| res[k] != ratio(0, 1)).collect();
        assert_eq!(nonzero, vec![2, 3, 4]);
    }

    #[test]
    fn brute_force_walk() {
        let m = walk(5);
        let x = brute_force_invariant(&m, 2).unwrap();
        assert_eq!(x, vec![ratio(1, 3); 3]);
        assert_eq!(
            brute_force_invariant(&m, 1).unwrap_err(),
            InvariantError::TruncationTooSmall { min: 2, got: 1 }
        );
    }

    #[test]
    fn normalization() {
        let v = LevelVector::new(vec![vec![ratio(5, 1)]; 6]);
        assert_eq!(normalize_truncated(&v, 3).unwrap(), vec![ratio(1, 4); 4]);
        let empty = LevelVector::<Rational>::new(vec![]);
        assert!(matches!(
            normalize_truncated(&empty, 0),
            Err(InvariantError::InsufficientBlocks { .. })
        ));
        let zero = LevelVector::<Rational>::zeros(2, 1);
        assert_eq!(normalize_truncated(&zero, 1).unwrap_err(), InvariantError::ZeroMass);
    }

    #[test]
    fn uniqueness_labels() {
        assert_eq!(Recurrence::NullRecurrent.uniqueness(), Uniqueness::Unique);
        assert_eq!(Recurrence::Transient.uniqueness(), Uniqueness::Unknown);
        assert!(Uniqueness::Unknown.label().contains("uniqueness unknown"));
    }

    #[test]
    fn oracle_comparison_rescales_at_level_zero() {
        let pi = LevelVector::new(vec![vec![2.0, 4.0], vec![6.0, 8.0]]);
        let oracle = [1.0, 2.0, 3.0, 4.2];
        let cmp = compare_with_oracle(&pi, &oracle, 2).unwrap();
        assert_eq!(cmp.rescaled[1], vec![6.0, 8.4]);
        assert!((cmp.max_relative_error - 0.05).abs() < 1e-12);
    }
}
