//! Block-tridiagonal quasi-birth-and-death models.
//!
//! A model stores a finite prefix of levels. Level `n` carries the diagonal
//! block `B_n`, the up block `A_n` (absent only at the last stored level when
//! the caller has no more data) and the down block `C_n` (absent at level 0).
//! Models built from a closed form also keep the generator, so more levels can
//! be materialized on demand with [`BlockTridiagonal::extended`].

use std::fmt;
use std::sync::Arc;

use crate::matrix::Mat;
use crate::scalar::Scalar;
use crate::tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// Transition probability matrix: rows sum to one.
    Discrete,
    /// Infinitesimal generator: rows sum to zero.
    Continuous,
}

impl Kind {
    fn row_target<T: Scalar>(self) -> T {
        match self {
            Kind::Discrete => T::one(),
            Kind::Continuous => T::zero(),
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Discrete => "discrete",
            Kind::Continuous => "continuous",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockName {
    A,
    B,
    C,
}

impl fmt::Display for BlockName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockName::A => "A",
            BlockName::B => "B",
            BlockName::C => "C",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("model needs at least one level")]
    Empty,
    #[error("phase count must be positive")]
    ZeroPhases,
    #[error("level {level}: block {block} is {shape:?}, expected {phases}x{phases}")]
    BlockShape {
        level: usize,
        block: BlockName,
        shape: (usize, usize),
        phases: usize,
    },
    #[error("level {level}: block {block} is missing")]
    MissingBlock { level: usize, block: BlockName },
    #[error("level 0 must not have a C block")]
    UnexpectedC,
    #[error("level {level}: negative entry in block {block} at row {row}, column {col}")]
    NegativeEntry {
        level: usize,
        block: BlockName,
        row: usize,
        col: usize,
    },
    #[error("level {level}: row {row} sums to {sum}, expected {target}")]
    RowSum {
        level: usize,
        row: usize,
        sum: String,
        target: String,
    },
    #[error("level {level}: block {block} is singular")]
    SingularBlock { level: usize, block: BlockName },
    #[error("{needed} levels required but only {available} available")]
    InsufficientLevels { needed: usize, available: usize },
    #[error("truncation level must be at least {min}, got {got}")]
    TruncationTooSmall { min: usize, got: usize },
    #[error("operation requires a discrete-time model")]
    NotDiscrete,
    #[error("vector block {index} has length {len}, expected {phases}")]
    VectorShape { index: usize, len: usize, phases: usize },
}

/// The blocks attached to one level.
#[derive(Debug, Clone, PartialEq)]
pub struct Level<T> {
    pub b: Mat<T>,
    pub a: Option<Mat<T>>,
    pub c: Option<Mat<T>>,
}

impl<T: Scalar> Level<T> {
    pub fn new(b: Mat<T>, a: Option<Mat<T>>, c: Option<Mat<T>>) -> Self {
        Self { b, a, c }
    }
}

/// Closed-form level source: `level(n)` must return level `n` with `A_n`
/// present and `C_n` present for `n >= 1`.
pub type LevelGenerator<T> = Arc<dyn Fn(usize) -> Level<T> + Send + Sync>;

#[derive(Clone)]
pub enum Provenance<T> {
    Literal,
    Generated(LevelGenerator<T>),
}

impl<T> fmt::Debug for Provenance<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Literal => f.write_str("Literal"),
            Provenance::Generated(_) => f.write_str("Generated(..)"),
        }
    }
}

/// A validated block-tridiagonal QBD model prefix.
#[derive(Debug, Clone)]
pub struct BlockTridiagonal<T> {
    phases: usize,
    kind: Kind,
    levels: Vec<Level<T>>,
    provenance: Provenance<T>,
}

impl<T: Scalar> BlockTridiagonal<T> {
    /// Validates and stores literal blocks.
    pub fn new(phases: usize, kind: Kind, levels: Vec<Level<T>>) -> Result<Self, ModelError> {
        validate(phases, kind, &levels, 0)?;
        Ok(Self {
            phases,
            kind,
            levels,
            provenance: Provenance::Literal,
        })
    }

    /// Materializes `count` levels from a closed form and validates them.
    pub fn generated(
        phases: usize,
        kind: Kind,
        count: usize,
        generator: LevelGenerator<T>,
    ) -> Result<Self, ModelError> {
        let levels: Vec<Level<T>> = (0..count).map(|n| generator(n)).collect();
        validate(phases, kind, &levels, 0)?;
        Ok(Self {
            phases,
            kind,
            levels,
            provenance: Provenance::Generated(generator),
        })
    }

    /// A copy with at least `count` levels; only generator-backed models can
    /// grow.
    pub fn extended(&self, count: usize) -> Result<Self, ModelError> {
        if count <= self.levels.len() {
            return Ok(self.clone());
        }
        let Provenance::Generated(generator) = &self.provenance else {
            return Err(ModelError::InsufficientLevels {
                needed: count,
                available: self.levels.len(),
            });
        };
        let start = self.levels.len();
        let mut levels = self.levels.clone();
        if levels.last().is_some_and(|l| l.a.is_none()) {
            levels.pop();
        }
        let first_new = levels.len();
        levels.extend((first_new..count).map(|n| generator(n)));
        validate(self.phases, self.kind, &levels, start.saturating_sub(1))?;
        Ok(Self {
            phases: self.phases,
            kind: self.kind,
            levels,
            provenance: self.provenance.clone(),
        })
    }

    pub fn phases(&self) -> usize {
        self.phases
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn provenance(&self) -> &Provenance<T> {
        &self.provenance
    }

    /// Number of stored levels.
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[Level<T>] {
        &self.levels
    }

    pub fn level(&self, n: usize) -> &Level<T> {
        &self.levels[n]
    }

    pub fn b(&self, n: usize) -> &Mat<T> {
        &self.levels[n].b
    }

    /// `A_n`; panics when absent.
    pub fn a(&self, n: usize) -> &Mat<T> {
        self.levels[n]
            .a
            .as_ref()
            .unwrap_or_else(|| panic!("A_{n} is not stored"))
    }

    /// `C_n`; panics when absent.
    pub fn c(&self, n: usize) -> &Mat<T> {
        self.levels[n]
            .c
            .as_ref()
            .unwrap_or_else(|| panic!("C_{n} is not stored"))
    }

    pub fn has_a(&self, n: usize) -> bool {
        self.levels.get(n).is_some_and(|l| l.a.is_some())
    }

    fn require_levels(&self, needed: usize) -> Result<(), ModelError> {
        if self.levels.len() < needed {
            Err(ModelError::InsufficientLevels {
                needed,
                available: self.levels.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Blocks `0..levels` of `v · M`.
    ///
    /// Block `k` is `v_{k-1} A_{k-1} + v_k B_k + v_{k+1} C_{k+1}`. The block at
    /// index `levels` would need data beyond the stored prefix and is not
    /// returned.
    pub fn row_apply(&self, v: &LevelVector<T>, levels: usize) -> Result<LevelVector<T>, ModelError> {
        self.require_levels(levels + 1)?;
        if v.len() < levels + 1 {
            return Err(ModelError::InsufficientLevels {
                needed: levels + 1,
                available: v.len(),
            });
        }
        v.check_shape(self.phases)?;
        let mut out = Vec::with_capacity(levels);
        for k in 0..levels {
            let mut block = self.b(k).vec_mul(&v.blocks[k]);
            if k > 0 {
                add_assign(&mut block, &self.a(k - 1).vec_mul(&v.blocks[k - 1]));
            }
            add_assign(&mut block, &self.c(k + 1).vec_mul(&v.blocks[k + 1]));
            out.push(block);
        }
        Ok(LevelVector { blocks: out })
    }

    /// Finite stochastic matrix on levels `0..=l`, with `A_l` folded into
    /// `B_l` so every row still sums to one.
    pub fn truncate_lumped(&self, l: usize) -> Result<Mat<T>, ModelError> {
        if self.kind != Kind::Discrete {
            return Err(ModelError::NotDiscrete);
        }
        if l < 1 {
            return Err(ModelError::TruncationTooSmall { min: 1, got: l });
        }
        self.require_levels(l + 1)?;
        if !self.has_a(l) {
            return Err(ModelError::MissingBlock {
                level: l,
                block: BlockName::A,
            });
        }
        let n = self.phases;
        let mut p = Mat::zeros((l + 1) * n, (l + 1) * n);
        let mut put = |bi: usize, bj: usize, m: &Mat<T>| {
            for i in 0..n {
                for j in 0..n {
                    p.set(bi * n + i, bj * n + j, m.get(i, j).clone());
                }
            }
        };
        for level in 0..=l {
            if level == l {
                put(level, level, &(self.b(l) + self.a(l)));
            } else {
                put(level, level, self.b(level));
                put(level, level + 1, self.a(level));
            }
            if level > 0 {
                put(level, level - 1, self.c(level));
            }
        }
        Ok(p)
    }
}

fn add_assign<T: Scalar>(acc: &mut [T], other: &[T]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a = a.clone() + b.clone();
    }
}

fn check_shape<T: Scalar>(phases: usize, level: usize, block: BlockName, m: &Mat<T>) -> Result<(), ModelError> {
    if m.shape() != (phases, phases) {
        return Err(ModelError::BlockShape {
            level,
            block,
            shape: m.shape(),
            phases,
        });
    }
    Ok(())
}

fn check_signs<T: Scalar>(kind: Kind, level: usize, block: BlockName, m: &Mat<T>) -> Result<(), ModelError> {
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let diagonal_of_generator = kind == Kind::Continuous && block == BlockName::B && i == j;
            if !diagonal_of_generator && m.get(i, j).is_negative() {
                return Err(ModelError::NegativeEntry {
                    level,
                    block,
                    row: i,
                    col: j,
                });
            }
        }
    }
    Ok(())
}

fn check_nonsingular<T: Scalar>(level: usize, block: BlockName, m: &Mat<T>) -> Result<(), ModelError> {
    m.inverse()
        .map(|_| ())
        .map_err(|_| ModelError::SingularBlock { level, block })
}

/// Checks levels `from..` of a prefix.
fn validate<T: Scalar>(phases: usize, kind: Kind, levels: &[Level<T>], from: usize) -> Result<(), ModelError> {
    if phases == 0 {
        return Err(ModelError::ZeroPhases);
    }
    if levels.is_empty() {
        return Err(ModelError::Empty);
    }
    let last = levels.len() - 1;
    let target: T = kind.row_target();
    for (n, level) in levels.iter().enumerate().skip(from) {
        check_shape(phases, n, BlockName::B, &level.b)?;
        check_signs(kind, n, BlockName::B, &level.b)?;
        match (&level.c, n) {
            (Some(_), 0) => return Err(ModelError::UnexpectedC),
            (None, n) if n > 0 => {
                return Err(ModelError::MissingBlock {
                    level: n,
                    block: BlockName::C,
                })
            }
            (Some(c), n) => {
                check_shape(phases, n, BlockName::C, c)?;
                check_signs(kind, n, BlockName::C, c)?;
                check_nonsingular(n, BlockName::C, c)?;
            }
            (None, _) => {}
        }
        match &level.a {
            Some(a) => {
                check_shape(phases, n, BlockName::A, a)?;
                check_signs(kind, n, BlockName::A, a)?;
                check_nonsingular(n, BlockName::A, a)?;
            }
            None if n < last => {
                return Err(ModelError::MissingBlock {
                    level: n,
                    block: BlockName::A,
                })
            }
            None => {}
        }
        // without A_n the row sums of the last level cannot be checked
        let Some(a) = &level.a else { continue };
        let mut total = &level.b + a;
        if let Some(c) = &level.c {
            total = &total + c;
        }
        for (row, sum) in total.row_sums().into_iter().enumerate() {
            let ok = if T::EXACT {
                sum == target
            } else {
                (sum.to_f64() - target.to_f64()).abs() <= tolerances::ROW_SUM_ABS
            };
            if !ok {
                return Err(ModelError::RowSum {
                    level: n,
                    row,
                    sum: sum.to_string(),
                    target: target.to_string(),
                });
            }
        }
    }
    Ok(())
}

/// A level-indexed row vector: one `N`-vector per level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelVector<T> {
    pub blocks: Vec<Vec<T>>,
}

impl<T: Scalar> LevelVector<T> {
    pub fn new(blocks: Vec<Vec<T>>) -> Self {
        Self { blocks }
    }

    pub fn zeros(levels: usize, phases: usize) -> Self {
        Self {
            blocks: vec![vec![T::zero(); phases]; levels],
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block(&self, n: usize) -> &[T] {
        &self.blocks[n]
    }

    pub fn check_shape(&self, phases: usize) -> Result<(), ModelError> {
        match self.blocks.iter().position(|b| b.len() != phases) {
            Some(index) => Err(ModelError::VectorShape {
                index,
                len: self.blocks[index].len(),
                phases,
            }),
            None => Ok(()),
        }
    }

    pub fn flatten(&self) -> Vec<T> {
        self.blocks.iter().flatten().cloned().collect()
    }

    /// Largest absolute entry of each block of `self - other`.
    pub fn blockwise_max_abs_diff(&self, other: &Self) -> Vec<T> {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x.clone() - y.clone()).abs())
                    .fold(T::zero(), |m, v| if v > m { v } else { m })
            })
            .collect()
    }
}
