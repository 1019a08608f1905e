//! A two-phase family built from the weight matrix
//!
//! ```text
//! W(x) = x^α (1−x)^β ⎡ k x² + β − k + 1     (β − k + 1)(1 − x)  ⎤
//!                    ⎣ (β − k + 1)(1 − x)  (β − k + 1)(1 − x)² ⎦
//! ```
//!
//! on `[0, 1]`, with `α, β > −1` and `0 < k < β + 1`. Conjugating its monic
//! orthogonal polynomials by the matrices `Δ_n` gives `Q_n` with
//! `Q_n(1) e = e`, so the recurrence blocks form a stochastic
//! block-tridiagonal matrix. For `α = β = 0`, `k = 1/2` the blocks, squared
//! norms and invariant blocks have closed forms, available in [`golden`].

use std::sync::Arc;

use crate::invariant::{Recurrence, Uniqueness};
use crate::matrix::Mat;
use crate::model::{BlockTridiagonal, Kind, Level, LevelGenerator, ModelError};
use crate::mop::{stochastic_normalize, MomentScalar, MopError, MopFamily, NormalizedFamily, Target, WeightSpec};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FamilyError {
    #[error("parameters out of range: need alpha > -1, beta > -1 and 0 < k < beta + 1")]
    Range,
    #[error("x must lie in [0, 1] and be representable for the chosen backend")]
    Point,
    #[error("zero denominator in {factor} at n = {n}")]
    ZeroDenominator { factor: &'static str, n: usize },
    #[error("C_n is defined for n >= 1")]
    NoDownBlockAtZero,
    #[error(transparent)]
    Mop(#[from] MopError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyParams<T> {
    pub alpha: T,
    pub beta: T,
    pub k: T,
}

impl<T: Scalar> FamilyParams<T> {
    pub fn new(alpha: T, beta: T, k: T) -> Result<Self, FamilyError> {
        let minus_one = -T::one();
        let ok = alpha > minus_one && beta > minus_one && k > T::zero() && k < beta.clone() + T::one();
        if !ok {
            return Err(FamilyError::Range);
        }
        Ok(Self { alpha, beta, k })
    }

    /// `α = β = 0`, `k = 1/2`.
    pub fn golden() -> Self {
        Self {
            alpha: T::zero(),
            beta: T::zero(),
            k: T::from_ratio(1, 2),
        }
    }

    pub fn is_golden(&self) -> bool {
        *self == Self::golden()
    }

    fn c(&self) -> T {
        self.beta.clone() - self.k.clone() + T::one()
    }

    pub fn weight_spec(&self) -> WeightSpec<T> {
        let c = self.c();
        let z = T::zero();
        let top_left = vec![c.clone(), z, self.k.clone()];
        let off = vec![c.clone(), -c.clone()];
        let bottom = vec![c.clone(), -(c.clone() + c.clone()), c];
        WeightSpec::new(
            self.alpha.clone(),
            self.beta.clone(),
            vec![vec![top_left, off.clone()], vec![off, bottom]],
        )
        .expect("validated parameters give a valid weight")
    }
}

/// `W(x)` at a point of `[0, 1]`.
pub fn weight_at<T: Scalar>(p: &FamilyParams<T>, x: &T) -> Result<Mat<T>, FamilyError> {
    if *x < T::zero() || *x > T::one() {
        return Err(FamilyError::Point);
    }
    p.weight_spec().eval(x).ok_or(FamilyError::Point)
}

fn nonzero<T: Scalar>(v: T, factor: &'static str, n: usize) -> Result<T, FamilyError> {
    if v.is_zero() {
        Err(FamilyError::ZeroDenominator { factor, n })
    } else {
        Ok(v)
    }
}

fn int<T: Scalar>(v: usize) -> T {
    T::from_i64(v as i64)
}

/// `a_n` and `b_n`, the row scalings of `Δ_n`.
pub fn row_scalings<T: Scalar>(p: &FamilyParams<T>, n: usize) -> Result<(T, T), FamilyError> {
    let (a, b, k) = (&p.alpha, &p.beta, &p.k);
    let nn: T = int(n);
    let ab = a.clone() + b.clone();
    let two: T = int(2);
    let three: T = int(3);
    // (α+β+n+3)_n / (β+2)_n as a product of ratios; the two factors
    // overflow f64 separately well before their quotient does
    let mut poch = T::one();
    for j in 0..n {
        let jj: T = int(j);
        let den = nonzero(b.clone() + two.clone() + jj.clone(), "(β+2)_n", n)?;
        poch = poch * (ab.clone() + nn.clone() + three.clone() + jj) / den;
    }
    let shared = poch * (nn.clone() * (ab.clone() + nn.clone() + two.clone()) + k.clone() * (a.clone() + T::one()));

    let a_den = nn.clone() * ab.clone() * ab.clone()
        + nn.clone() * (two.clone() * nn.clone() + int(5)) * ab.clone()
        + nn.clone() * (nn.clone() + two.clone()) * (nn.clone() + three.clone())
        + k.clone()
            * (two.clone() * a.clone() * b.clone() + two.clone() * b.clone() - k.clone() * (nn.clone() + two.clone())
                + a.clone() * a.clone()
                + int::<T>(5) * a.clone()
                - two.clone() * k.clone() * a.clone()
                - nn.clone() * nn.clone()
                + int(4));
    let a_den = nonzero(a_den, "denominator of a_n", n)?;
    let a_n = -(shared.clone() * (ab.clone() - k.clone() + nn.clone() + three.clone())) / a_den;

    let b_den = (nn.clone() * nn.clone() + two.clone() * nn.clone() * k.clone()) * ab
        + nn.clone() * (nn.clone() + int(5)) * k.clone()
        + k.clone() * k.clone() * (a.clone() - nn.clone() + T::one())
        + nn.clone() * nn.clone() * (nn.clone() + three);
    let b_den = nonzero(b_den, "denominator of b_n", n)?;
    let b_n = shared * (k.clone() + nn) / b_den;
    Ok((a_n, b_n))
}

/// `Δ_n`.
pub fn delta_n<T: Scalar>(p: &FamilyParams<T>, n: usize) -> Result<Mat<T>, FamilyError> {
    let (a, b, k) = (&p.alpha, &p.beta, &p.k);
    let nn: T = int(n);
    let (a_n, b_n) = row_scalings(p, n)?;
    let q = nn.clone() * nn.clone()
        + nn.clone() * (a.clone() + b.clone() + int(3))
        + k.clone() * (a.clone() + int::<T>(2) * b.clone() - int::<T>(2) * k.clone() + int(4));
    let d11 = nonzero(
        k.clone() * (a.clone() + b.clone() - k.clone() + nn.clone() + int(3)),
        "k(α+β−k+n+3)",
        n,
    )?;
    let d22 = nonzero((k.clone() + nn) * p.c(), "(k+n)(β−k+1)", n)?;
    Ok(Mat::from_vec(
        2,
        2,
        vec![-(a_n.clone() * q.clone()) / d11, a_n, b_n.clone(), -(b_n * q) / d22],
    ))
}

/// `Δ_0` written directly in terms of the parameters.
pub fn delta_0_closed<T: Scalar>(p: &FamilyParams<T>) -> Result<Mat<T>, FamilyError> {
    let (a, b, k) = (&p.alpha, &p.beta, &p.k);
    let two: T = int(2);
    let s = nonzero(
        a.clone() + two.clone() * b.clone() - two * k.clone() + int(4),
        "α+2β−2k+4",
        0,
    )?;
    let c = nonzero(p.c(), "β−k+1", 0)?;
    let top = -(a.clone() + b.clone() - k.clone() + int(3)) / s.clone();
    Ok(Mat::from_vec(2, 2, vec![T::one(), top, T::one(), -s / c]))
}

/// `Δ_0, …, Δ_{count−1}`.
pub fn deltas<T: Scalar>(p: &FamilyParams<T>, count: usize) -> Result<Vec<Mat<T>>, FamilyError> {
    (0..count).map(|n| delta_n(p, n)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct Classification {
    pub recurrence: Recurrence,
    pub uniqueness: Uniqueness,
}

/// Never positive recurrent; null recurrent for `−1 < β ≤ 0`, transient for
/// `β > 0`. Only `β` matters.
pub fn classify<T: Scalar>(p: &FamilyParams<T>) -> Classification {
    let recurrence = if p.beta > T::zero() {
        Recurrence::Transient
    } else {
        Recurrence::NullRecurrent
    };
    Classification {
        recurrence,
        uniqueness: recurrence.uniqueness(),
    }
}

/// Weight, monic family and `Δ_n`-normalized family for one parameter triple.
#[derive(Debug, Clone)]
pub struct Normalization<T> {
    pub params: FamilyParams<T>,
    pub weight: WeightSpec<T>,
    pub family: MopFamily<T>,
    pub normalized: NormalizedFamily<T>,
    /// `(‖Q_0‖²)⁻¹`
    pub pi0: Mat<T>,
}

impl<T: Scalar> Normalization<T> {
    /// The recurrence blocks as a validated discrete model. Rows always sum
    /// to one; entries can still be negative for some parameters (for
    /// instance `B_0[1][0] = −128/9849` at `α = 1`, `β = 2`, `k = 1/2`),
    /// which is reported as a model error.
    pub fn model(&self) -> Result<BlockTridiagonal<T>, FamilyError> {
        Ok(self.normalized.to_model(Kind::Discrete)?)
    }
}

/// Weight → monic family → `Δ_n` normalization for levels `0..=n_max`,
/// including `A_{n_max}`. No sign requirement on the blocks.
pub fn normalize<T: MomentScalar>(p: &FamilyParams<T>, n_max: usize) -> Result<Normalization<T>, FamilyError> {
    let weight = p.weight_spec();
    let family = T::monic_family(&weight, n_max)?;
    let lambdas = deltas(p, n_max + 2)?;
    let normalized = stochastic_normalize(&family, &lambdas, Target::Any)?;
    let pi0 = normalized.pi0()?;
    Ok(Normalization {
        params: p.clone(),
        weight,
        family,
        normalized,
        pi0,
    })
}

/// [`Normalization`] together with its validated model.
#[derive(Debug, Clone)]
pub struct Reconstruction<T> {
    pub params: FamilyParams<T>,
    pub weight: WeightSpec<T>,
    pub family: MopFamily<T>,
    pub normalized: NormalizedFamily<T>,
    pub model: BlockTridiagonal<T>,
    /// `(‖Q_0‖²)⁻¹`
    pub pi0: Mat<T>,
}

/// [`normalize`] followed by validation of the blocks as a stochastic model.
pub fn reconstruct<T: MomentScalar>(p: &FamilyParams<T>, n_max: usize) -> Result<Reconstruction<T>, FamilyError> {
    let n = normalize(p, n_max)?;
    let model = n.model()?;
    Ok(Reconstruction {
        params: n.params,
        weight: n.weight,
        family: n.family,
        normalized: n.normalized,
        model,
        pi0: n.pi0,
    })
}

/// Closed forms at `α = β = 0`, `k = 1/2`.
pub mod golden {
    use super::*;

    /// `scale · Π num_i(n) / Π den_j(n)`, every factor a polynomial with
    /// descending integer coefficients.
    #[derive(Debug, Clone, Copy)]
    pub struct RationalFunction {
        pub scale: (i64, i64),
        pub num: &'static [&'static [i64]],
        pub den: &'static [&'static [i64]],
    }

    fn horner<T: Scalar>(coeffs: &[i64], n: &T) -> T {
        coeffs
            .iter()
            .fold(T::zero(), |acc, &c| acc * n.clone() + T::from_i64(c))
    }

    impl RationalFunction {
        pub fn eval<T: Scalar>(&self, n: usize) -> T {
            let x = T::from_i64(n as i64);
            let num = self.num.iter().fold(T::one(), |acc, f| acc * horner(f, &x));
            let den = self.den.iter().fold(T::one(), |acc, f| acc * horner(f, &x));
            T::from_ratio(self.scale.0, self.scale.1) * num / den
        }

        /// Degree of numerator minus degree of denominator, and the ratio of
        /// leading coefficients (times the scale).
        pub fn leading(&self) -> (i64, (i64, i64)) {
            let deg = |fs: &[&[i64]]| fs.iter().map(|f| f.len() as i64 - 1).sum::<i64>();
            let lead = |fs: &[&[i64]]| fs.iter().map(|f| f[0]).product::<i64>();
            (
                deg(self.num) - deg(self.den),
                (self.scale.0 * lead(self.num), self.scale.1 * lead(self.den)),
            )
        }
    }

    const N: &[i64] = &[1, 0];
    const N1: &[i64] = &[1, 1];
    const N2: &[i64] = &[1, 2];
    const N3: &[i64] = &[1, 3];
    const TWO_N3: &[i64] = &[2, 3];
    const F1: &[i64] = &[2, 4, 1];
    const F2: &[i64] = &[2, 8, 7];
    const F3: &[i64] = &[4, 10, 3];
    const F4: &[i64] = &[4, 14, 9, 1];
    const G: &[i64] = &[4, 18, 17];
    const H: &[i64] = &[4, 26, 49, 28];
    const DA: &[i64] = &[16, 160, 572, 860, 463];
    const DB: &[i64] = &[16, 96, 188, 132, 31];
    const DC: &[i64] = &[16, 32, -4, -20, 7];
    const E: &[i64] = &[2, 0, -1];
    const K1: &[i64] = &[4, 2, -3];
    const K2: &[i64] = &[4, 2, -7, 2];
    const K3: &[i64] = &[8, 32, 36, 8, -5];

    pub const A: [[RationalFunction; 2]; 2] = [
        [
            RationalFunction {
                scale: (1, 2),
                num: &[N3, N3, F1, G, &[16, 128, 348, 368, 117]],
                den: &[N2, TWO_N3, F2, F3, DA],
            },
            RationalFunction {
                scale: (2, 1),
                num: &[N3, F1, &[2, 12, 17], H],
                den: &[N2, TWO_N3, F2, F3, DA],
            },
        ],
        [
            RationalFunction {
                scale: (2, 1),
                num: &[N3, N3, F1, F1, G],
                den: &[TWO_N3, F2, F4, DA],
            },
            RationalFunction {
                scale: (1, 2),
                num: &[N3, F1, H, &[16, 128, 348, 368, 125]],
                den: &[TWO_N3, F2, F4, DA],
            },
        ],
    ];

    pub const B: [[RationalFunction; 2]; 2] = [
        [
            RationalFunction {
                scale: (1, 1),
                num: &[&[32, 384, 1928, 5256, 8450, 8148, 4577, 1365, 163]],
                den: &[F1, F2, DB],
            },
            RationalFunction {
                scale: (1, 2),
                num: &[F4, &[32, 320, 1240, 2320, 2114, 834, 121]],
                den: &[N2, F1, F2, F3, DB],
            },
        ],
        [
            RationalFunction {
                scale: (1, 2),
                num: &[N2, F3, &[32, 256, 760, 1040, 674, 186, 13]],
                den: &[F1, F2, F4, DB],
            },
            RationalFunction {
                scale: (1, 1),
                num: &[&[2, 6, 3], &[4, 18, 21, 6], &[4, 18, 21, 3]],
                den: &[F1, F2, DB],
            },
        ],
    ];

    pub const C: [[RationalFunction; 2]; 2] = [
        [
            RationalFunction {
                scale: (1, 2),
                num: &[N, N1, K1, &[32, 192, 328, 32, -226, -4, 33]],
                den: &[N2, TWO_N3, E, F3, DC],
            },
            RationalFunction {
                scale: (1, 1),
                num: &[N, K2, K3],
                den: &[N2, TWO_N3, E, F3, DC],
            },
        ],
        [
            RationalFunction {
                scale: (1, 1),
                num: &[N, N1, K1, K3],
                den: &[TWO_N3, E, F4, DC],
            },
            RationalFunction {
                scale: (1, 2),
                num: &[N, K2, &[32, 192, 392, 288, -34, -132, -43]],
                den: &[TWO_N3, E, F4, DC],
            },
        ],
    ];

    const NORM_OFF: RationalFunction = RationalFunction {
        scale: (-1, 2),
        num: &[&[2, 1], &[2, 5], F1],
        den: &[N1, N2, N2, F3, F4],
    };

    pub const NORMS: [[RationalFunction; 2]; 2] = [
        [
            RationalFunction {
                scale: (1, 1),
                num: &[F1, &[16, 160, 628, 1212, 1173, 514, 79]],
                den: &[N1, TWO_N3, F3, F3, N2, N2, N2],
            },
            NORM_OFF,
        ],
        [
            NORM_OFF,
            RationalFunction {
                scale: (1, 1),
                num: &[F1, &[16, 128, 388, 564, 417, 152, 22]],
                den: &[N1, N2, TWO_N3, F4, F4],
            },
        ],
    ];

    /// The two components of `Π_n e`.
    pub const PI_BLOCK: [RationalFunction; 2] = [
        RationalFunction {
            scale: (2, 1),
            num: &[N1, N1, N2, N2, TWO_N3, F3, &[4, 14, 9]],
            den: &[F1, F2, DB],
        },
        RationalFunction {
            scale: (2, 1),
            num: &[N1, N2, TWO_N3, F4, &[4, 22, 33, 8]],
            den: &[F1, F2, DB],
        },
    ];

    fn matrix<T: Scalar>(table: &[[RationalFunction; 2]; 2], n: usize) -> Mat<T> {
        Mat::from_fn(2, 2, |i, j| table[i][j].eval(n))
    }

    #[derive(Debug, Clone, PartialEq)]
    pub struct GoldenBlocks<T> {
        pub a: Mat<T>,
        pub b: Mat<T>,
        /// `None` at `n = 0`.
        pub c: Option<Mat<T>>,
    }

    pub fn golden_blocks<T: Scalar>(n: usize) -> GoldenBlocks<T> {
        GoldenBlocks {
            a: matrix(&A, n),
            b: matrix(&B, n),
            c: (n > 0).then(|| matrix(&C, n)),
        }
    }

    pub fn golden_c<T: Scalar>(n: usize) -> Result<Mat<T>, FamilyError> {
        if n == 0 {
            Err(FamilyError::NoDownBlockAtZero)
        } else {
            Ok(matrix(&C, n))
        }
    }

    /// `‖Q_n‖²`
    pub fn golden_norms<T: Scalar>(n: usize) -> Mat<T> {
        matrix(&NORMS, n)
    }

    /// `Π_n e`
    pub fn golden_pi_block<T: Scalar>(n: usize) -> [T; 2] {
        [PI_BLOCK[0].eval(n), PI_BLOCK[1].eval(n)]
    }

    /// The golden chain as a generator-backed model with `levels` levels.
    pub fn golden_model<T: Scalar>(levels: usize) -> Result<BlockTridiagonal<T>, ModelError> {
        let generator: LevelGenerator<T> = Arc::new(|n| {
            let g = golden_blocks(n);
            Level::new(g.b, Some(g.a), g.c)
        });
        BlockTridiagonal::generated(2, Kind::Discrete, levels, generator)
    }

    /// Rows `(n, π₁ⁿ, π₂ⁿ)` for `n = 0..=levels`.
    pub fn figure_rows<T: Scalar>(levels: usize) -> Vec<(usize, T, T)> {
        (0..=levels)
            .map(|n| {
                let [p1, p2] = golden_pi_block(n);
                (n, p1, p2)
            })
            .collect()
    }
}
