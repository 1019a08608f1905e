//! Matrix-valued orthogonal polynomials on `[0, 1]`.
//!
//! Starting from a weight `W(x) = x^α (1−x)^β · M(x)` with `M` a symmetric
//! matrix polynomial, this module computes the moments `S_k = ∫ xᵏ W`, the
//! monic orthogonal family `P̂_n` through its three-term recurrence
//!
//! ```text
//! x P̂_n = P̂_{n+1} + β_n P̂_n + γ_n P̂_{n−1},
//! β_n = ⟨x P̂_n, P̂_n⟩ h_n⁻¹,   γ_n = h_n h_{n−1}⁻¹,   h_n = ⟨P̂_n, P̂_n⟩,
//! ```
//!
//! with `⟨P, R⟩ = ∫ P W Rᵀ`, and then conjugates the family with a
//! normalization sequence `Λ_n` to obtain `Q_n = Λ_n P̂_n Λ_0⁻¹` and the
//! recurrence blocks
//!
//! ```text
//! A_n = Λ_n Λ_{n+1}⁻¹,   B_n = Λ_n β_n Λ_n⁻¹,   C_n = Λ_n γ_n Λ_{n−1}⁻¹,
//! ‖Q_n‖² = Λ_n h_n Λ_nᵀ.
//! ```
//!
//! Two routes are available. [`monic_recurrence`] runs the block Chebyshev
//! algorithm on the moments, propagating the mixed moments `⟨P̂_n, xʲ I⟩`
//! through the recurrence; it is exact on rationals. [`DiscreteMeasure`]
//! evaluates `⟨P, R⟩` by Gauss–Jacobi quadrature on polynomial values at the
//! nodes (a discretized Stieltjes procedure), which is the stable route in
//! floating point.

use crate::matrix::{LinalgError, Mat};
use crate::model::{BlockTridiagonal, Kind, Level, ModelError};
use crate::quadrature::{order_for_degree, GaussJacobi, QuadratureError};
use crate::scalar::{beta_integral_exact, Rational, Scalar};
use crate::tolerances;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MopError {
    #[error("weight exponents must exceed -1")]
    ExponentRange,
    #[error("exact moments need nonnegative integer exponents")]
    ExactExponent,
    #[error("matrix polynomial part is not symmetric at entry ({0}, {1})")]
    AsymmetricWeight(usize, usize),
    #[error("weight is not positive definite at x = {0}")]
    NotPositiveDefinite(f64),
    #[error("weight polynomial has {got} rows/columns, expected {phases}")]
    WeightShape { phases: usize, got: usize },
    #[error("{needed} moments required, {available} supplied")]
    NotEnoughMoments { needed: usize, available: usize },
    #[error("norm matrix h_{0} is singular; the weight does not support this degree")]
    SingularNorm(usize),
    #[error("P̂_{degree} failed orthogonality verification (defect {defect:e})")]
    OrthogonalityFailure { degree: usize, defect: f64 },
    #[error("normalization matrix Λ_{0} is singular")]
    SingularNormalization(usize),
    #[error("{needed} normalization matrices required, {available} supplied")]
    NotEnoughNormalizations { needed: usize, available: usize },
    #[error("non-finite values at level {0}")]
    NonFinite(usize),
    #[error("A_{0} is singular")]
    SingularUpBlock(usize),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("normalized blocks are not a valid model: {0}")]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `W(x) = x^α (1−x)^β · M(x)` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec<T> {
    phases: usize,
    alpha: T,
    beta: T,
    /// `poly[i][j]` holds the ascending coefficients of `M_ij`.
    poly: Vec<Vec<Vec<T>>>,
}

impl<T: Scalar> WeightSpec<T> {
    pub fn new(alpha: T, beta: T, poly: Vec<Vec<Vec<T>>>) -> Result<Self, MopError> {
        let minus_one = -T::one();
        if !(alpha > minus_one && beta > minus_one) {
            return Err(MopError::ExponentRange);
        }
        let phases = poly.len();
        for row in &poly {
            if row.len() != phases {
                return Err(MopError::WeightShape { phases, got: row.len() });
            }
        }
        for i in 0..phases {
            for j in i + 1..phases {
                if trim(&poly[i][j]) != trim(&poly[j][i]) {
                    return Err(MopError::AsymmetricWeight(i, j));
                }
            }
        }
        Ok(Self {
            phases,
            alpha,
            beta,
            poly,
        })
    }

    pub fn phases(&self) -> usize {
        self.phases
    }

    pub fn alpha(&self) -> &T {
        &self.alpha
    }

    pub fn beta(&self) -> &T {
        &self.beta
    }

    pub fn poly_degree(&self) -> usize {
        self.poly
            .iter()
            .flatten()
            .map(|c| trim(c).len().saturating_sub(1))
            .max()
            .unwrap_or(0)
    }

    /// The matrix polynomial part `M(x)`.
    pub fn poly_at(&self, x: &T) -> Mat<T> {
        Mat::from_fn(self.phases, self.phases, |i, j| {
            self.poly[i][j]
                .iter()
                .rev()
                .fold(T::zero(), |acc, c| acc * x.clone() + c.clone())
        })
    }

    /// `W(x)`; `None` when the exact backend cannot represent `x^α (1−x)^β`.
    pub fn eval(&self, x: &T) -> Option<Mat<T>> {
        let left = x.pow_exponent(&self.alpha)?;
        let right = (T::one() - x.clone()).pow_exponent(&self.beta)?;
        Some(self.poly_at(x).scale(&(left * right)))
    }

    /// Conjugated weight `Λ W Λᵀ` as a new weight (same exponents).
    pub fn conjugated(&self, lambda: &Mat<T>) -> Self {
        let deg = self.poly_degree();
        let coeff_mat = |d: usize| {
            Mat::from_fn(self.phases, self.phases, |i, j| {
                self.poly[i][j].get(d).cloned().unwrap_or_else(T::zero)
            })
        };
        let mut poly = vec![vec![Vec::with_capacity(deg + 1); self.phases]; self.phases];
        for d in 0..=deg {
            let m = &(lambda * &coeff_mat(d)) * &lambda.transpose();
            for (i, row) in poly.iter_mut().enumerate() {
                for (j, entry) in row.iter_mut().enumerate() {
                    entry.push(m.get(i, j).clone());
                }
            }
        }
        Self {
            phases: self.phases,
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
            poly,
        }
    }
}

impl WeightSpec<f64> {
    /// Samples `M(x)` at `samples` interior points and requires each to be
    /// positive definite. The scalar factor is positive on `(0, 1)`.
    pub fn check_positive_definite(&self, samples: usize) -> Result<(), MopError> {
        for s in 1..=samples {
            let x = s as f64 / (samples + 1) as f64;
            if !self.poly_at(&x).is_positive_definite() {
                return Err(MopError::NotPositiveDefinite(x));
            }
        }
        Ok(())
    }
}

fn trim<T: Scalar>(c: &[T]) -> &[T] {
    let mut end = c.len();
    while end > 0 && c[end - 1].is_zero() {
        end -= 1;
    }
    &c[..end]
}

/// Scalars for which moments of a [`WeightSpec`] can be computed.
pub trait MomentScalar: Scalar {
    fn weight_moments(w: &WeightSpec<Self>, k_max: usize) -> Result<Vec<Mat<Self>>, MopError>;

    /// Monic family through degree `n_max` by the route suited to the backend.
    fn monic_family(w: &WeightSpec<Self>, n_max: usize) -> Result<MopFamily<Self>, MopError>;
}

impl MomentScalar for Rational {
    /// Exact Beta integrals `∫ xᵃ (1−x)ᵇ = a! b! / (a+b+1)!`.
    fn weight_moments(w: &WeightSpec<Self>, k_max: usize) -> Result<Vec<Mat<Self>>, MopError> {
        let a = w.alpha.as_nonneg_integer().ok_or(MopError::ExactExponent)?;
        let b = w.beta.as_nonneg_integer().ok_or(MopError::ExactExponent)?;
        Ok((0..=k_max)
            .map(|k| {
                Mat::from_fn(w.phases, w.phases, |i, j| {
                    w.poly[i][j]
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| !num_traits::Zero::is_zero(*c))
                        .fold(Rational::from_i64(0), |acc, (d, c)| {
                            acc + c.clone() * beta_integral_exact(a + k as u32 + d as u32, b)
                        })
                })
            })
            .collect())
    }

    /// Bilinear form over exact moments.
    fn monic_family(w: &WeightSpec<Self>, n_max: usize) -> Result<MopFamily<Self>, MopError> {
        monic_recurrence(&moments(w, 2 * n_max + 1)?, n_max)
    }
}

impl MomentScalar for f64 {
    /// Gauss–Jacobi quadrature sized to integrate `xᵏ M(x)` exactly.
    fn weight_moments(w: &WeightSpec<Self>, k_max: usize) -> Result<Vec<Mat<Self>>, MopError> {
        let rule = GaussJacobi::new(w.alpha, w.beta, order_for_degree(k_max + w.poly_degree()))?;
        let values: Vec<Mat<f64>> = rule.nodes.iter().map(|x| w.poly_at(x)).collect();
        Ok((0..=k_max)
            .map(|k| {
                let mut s = Mat::zeros(w.phases, w.phases);
                for ((x, wt), m) in rule.nodes.iter().zip(&rule.weights).zip(&values) {
                    s = &s + &m.scale(&(wt * x.powi(k as i32)));
                }
                s
            })
            .collect())
    }

    /// Discretized Stieltjes procedure.
    fn monic_family(w: &WeightSpec<Self>, n_max: usize) -> Result<MopFamily<Self>, MopError> {
        monic_recurrence_in(&DiscreteMeasure::new(w, n_max)?, n_max)
    }
}

/// `S_0 … S_{k_max}`.
pub fn moments<T: MomentScalar>(w: &WeightSpec<T>, k_max: usize) -> Result<Vec<Mat<T>>, MopError> {
    T::weight_moments(w, k_max)
}

/// Inner-product model used by the monic recurrence.
pub trait InnerProductSpace<T: Scalar> {
    type Poly: Clone;

    fn phases(&self) -> usize;

    /// The constant polynomial `I`.
    fn identity(&self) -> Self::Poly;

    fn zero(&self) -> Self::Poly;

    /// `x·p − b·p − g·q`
    fn three_term(&self, p: &Self::Poly, q: &Self::Poly, b: &Mat<T>, g: &Mat<T>) -> Self::Poly;

    /// `⟨p, r⟩ = ∫ p W rᵀ`
    fn inner(&self, p: &Self::Poly, r: &Self::Poly) -> Mat<T>;

    /// `⟨x p, r⟩`
    fn inner_x(&self, p: &Self::Poly, r: &Self::Poly) -> Mat<T>;

    /// Checks that `new` (of degree `lower.len()`) is orthogonal to every
    /// polynomial of lower degree. On failure returns the normalized defect.
    fn verify_orthogonal(&self, new: &Self::Poly, lower: &[Self::Poly]) -> Result<(), f64>;

    /// Removes components of `p` along `lower`, given their inverse squared norms.
    fn reorthogonalize(&self, p: Self::Poly, _lower: &[Self::Poly], _inv_norms: &[Mat<T>]) -> Self::Poly {
        p
    }

    /// Largest degree the space can handle, if bounded.
    fn max_degree(&self) -> Option<usize>;
}

/// Quadrature discretization of `⟨P, R⟩`: polynomials are carried as their
/// values at the Gauss–Jacobi nodes.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    phases: usize,
    nodes: Vec<f64>,
    /// `w_i · M(x_i)`
    masses: Vec<Mat<f64>>,
    max_degree: usize,
}

impl DiscreteMeasure {
    /// Rule exact for every inner product needed up to degree `n_max + 1`.
    pub fn new(w: &WeightSpec<f64>, n_max: usize) -> Result<Self, MopError> {
        let order = order_for_degree(2 * n_max + 2 + w.poly_degree());
        Self::with_order(w, order, n_max)
    }

    fn with_order(w: &WeightSpec<f64>, order: usize, max_degree: usize) -> Result<Self, MopError> {
        let rule = GaussJacobi::new(w.alpha, w.beta, order)?;
        let masses = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, wt)| w.poly_at(x).scale(wt))
            .collect();
        Ok(Self {
            phases: w.phases,
            nodes: rule.nodes,
            masses,
            max_degree,
        })
    }

    fn sum(&self, p: &[Mat<f64>], r: &[Mat<f64>], with_x: bool) -> Mat<f64> {
        let n = self.phases;
        let mut acc = vec![0.0; n * n];
        let mut pm = vec![0.0; n * n];
        for (i, m) in self.masses.iter().enumerate() {
            let (pe, me, re) = (p[i].entries(), m.entries(), r[i].entries());
            let s = if with_x { self.nodes[i] } else { 1.0 };
            for row in 0..n {
                for col in 0..n {
                    pm[row * n + col] = (0..n).map(|t| pe[row * n + t] * me[t * n + col]).sum::<f64>() * s;
                }
            }
            for row in 0..n {
                for col in 0..n {
                    acc[row * n + col] += (0..n).map(|t| pm[row * n + t] * re[col * n + t]).sum::<f64>();
                }
            }
        }
        Mat::from_vec(n, n, acc)
    }
}

impl InnerProductSpace<f64> for DiscreteMeasure {
    type Poly = Vec<Mat<f64>>;

    fn phases(&self) -> usize {
        self.phases
    }

    fn identity(&self) -> Vec<Mat<f64>> {
        vec![Mat::identity(self.phases); self.nodes.len()]
    }

    fn zero(&self) -> Vec<Mat<f64>> {
        vec![Mat::zeros(self.phases, self.phases); self.nodes.len()]
    }

    fn three_term(&self, p: &Vec<Mat<f64>>, q: &Vec<Mat<f64>>, b: &Mat<f64>, g: &Mat<f64>) -> Vec<Mat<f64>> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, x)| &(&p[i].scale(x) - &(b * &p[i])) - &(g * &q[i]))
            .collect()
    }

    fn inner(&self, p: &Vec<Mat<f64>>, r: &Vec<Mat<f64>>) -> Mat<f64> {
        self.sum(p, r, false)
    }

    fn inner_x(&self, p: &Vec<Mat<f64>>, r: &Vec<Mat<f64>>) -> Mat<f64> {
        self.sum(p, r, true)
    }

    fn verify_orthogonal(&self, new: &Vec<Mat<f64>>, lower: &[Vec<Mat<f64>>]) -> Result<(), f64> {
        let h = self.inner(new, new).max_abs();
        let mut worst = 0.0f64;
        for q in lower {
            let hq = self.inner(q, q).max_abs();
            let defect = self.inner(new, q).max_abs() / (h.sqrt() * hq.sqrt()).max(f64::MIN_POSITIVE);
            worst = worst.max(defect);
        }
        if worst > tolerances::MONIC_ORTHOGONALITY_REL {
            Err(worst)
        } else {
            Ok(())
        }
    }

    fn reorthogonalize(&self, mut p: Vec<Mat<f64>>, lower: &[Vec<Mat<f64>>], inv_norms: &[Mat<f64>]) -> Vec<Mat<f64>> {
        for (q, h_inv) in lower.iter().zip(inv_norms) {
            let coef = &self.inner(&p, q) * h_inv;
            for (pi, qi) in p.iter_mut().zip(q) {
                *pi = &*pi - &(&coef * qi);
            }
        }
        p
    }

    fn max_degree(&self) -> Option<usize> {
        Some(self.max_degree)
    }
}

/// Recurrence data of the monic family, levels `0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct MopFamily<T> {
    pub beta: Vec<Mat<T>>,
    /// `gamma[0]` is zero.
    pub gamma: Vec<Mat<T>>,
    /// `h_n = ⟨P̂_n, P̂_n⟩`
    pub norms: Vec<Mat<T>>,
}

impl<T: Scalar> MopFamily<T> {
    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn n_max(&self) -> usize {
        self.norms.len() - 1
    }
}

/// Builds `β_n, γ_n, h_n` for `n = 0..=n_max`, verifying every new monic
/// polynomial against all lower degrees.
pub fn monic_recurrence_in<T, S>(space: &S, n_max: usize) -> Result<MopFamily<T>, MopError>
where
    T: Scalar,
    S: InnerProductSpace<T>,
{
    if let Some(limit) = space.max_degree() {
        if n_max > limit {
            return Err(MopError::NotEnoughMoments {
                needed: 2 * n_max + 2,
                available: 2 * limit + 2,
            });
        }
    }
    let n = space.phases();
    let mut beta = Vec::with_capacity(n_max + 1);
    let mut gamma = Vec::with_capacity(n_max + 1);
    let mut norms: Vec<Mat<T>> = Vec::with_capacity(n_max + 1);
    let mut inv_norms: Vec<Mat<T>> = Vec::with_capacity(n_max + 1);
    let mut polys = vec![space.identity()];
    let mut prev = space.zero();
    for level in 0..=n_max {
        let p = polys.last().expect("P̂_0 present").clone();
        let h = space.inner(&p, &p);
        if !h.is_finite() {
            return Err(MopError::NonFinite(level));
        }
        let h_inv = h.inverse().map_err(|_| MopError::SingularNorm(level))?;
        let b = &space.inner_x(&p, &p) * &h_inv;
        let g = match inv_norms.last() {
            Some(h_prev_inv) => &h * h_prev_inv,
            None => Mat::zeros(n, n),
        };
        inv_norms.push(h_inv);
        let next = space.reorthogonalize(space.three_term(&p, &prev, &b, &g), &polys, &inv_norms);
        space
            .verify_orthogonal(&next, &polys)
            .map_err(|defect| MopError::OrthogonalityFailure {
                degree: level + 1,
                defect,
            })?;
        beta.push(b);
        gamma.push(g);
        norms.push(h);
        prev = p;
        polys.push(next);
    }
    Ok(MopFamily { beta, gamma, norms })
}

/// Monic recurrence from `S_0 … S_{2 n_max + 1}` by the block Chebyshev
/// algorithm. With `σ_{n,j} = ⟨P̂_n, xʲ I⟩` and `c_n` the `x^{n−1}`
/// coefficient of `P̂_n`:
///
/// ```text
/// h_n = σ_{n,n},   β_n = (σ_{n,n+1} + σ_{n,n} c_nᵀ) h_n⁻¹,
/// σ_{n+1,j} = σ_{n,j+1} − β_n σ_{n,j} − γ_n σ_{n−1,j}.
/// ```
///
/// `σ_{n+1,j}` for `j ≤ n` must vanish, which verifies each new degree.
pub fn monic_recurrence<T: Scalar>(moms: &[Mat<T>], n_max: usize) -> Result<MopFamily<T>, MopError> {
    let needed = 2 * n_max + 2;
    if moms.len() < needed {
        return Err(MopError::NotEnoughMoments {
            needed,
            available: moms.len(),
        });
    }
    let size = moms[0].rows();
    let zero = Mat::zeros(size, size);
    let mut beta = Vec::with_capacity(n_max + 1);
    let mut gamma = Vec::with_capacity(n_max + 1);
    let mut norms: Vec<Mat<T>> = Vec::with_capacity(n_max + 1);
    let mut sigma: Vec<Mat<T>> = moms[..needed].to_vec();
    let mut sigma_prev: Vec<Mat<T>> = vec![zero.clone(); needed];
    let mut lead = zero.clone();
    for n in 0..=n_max {
        let h = sigma[n].clone();
        if !h.is_finite() {
            return Err(MopError::NonFinite(n));
        }
        let h_inv = h.inverse().map_err(|_| MopError::SingularNorm(n))?;
        let b = &(&sigma[n + 1] + &(&h * &lead.transpose())) * &h_inv;
        let g = match norms.last() {
            Some(h_prev) => &h * &h_prev.inverse().map_err(|_| MopError::SingularNorm(n - 1))?,
            None => zero.clone(),
        };
        let count = needed - n - 1;
        let mut next = Vec::with_capacity(count);
        let mut worst = 0.0f64;
        for j in 0..count {
            let terms = [sigma[j + 1].clone(), &b * &sigma[j], &g * &sigma_prev[j]];
            let v = &(&terms[0] - &terms[1]) - &terms[2];
            if j <= n {
                let defect = v.max_abs();
                if T::EXACT {
                    if !defect.is_zero() {
                        return Err(MopError::OrthogonalityFailure {
                            degree: n + 1,
                            defect: defect.to_f64(),
                        });
                    }
                } else {
                    let magnitude: f64 = terms.iter().map(|t| t.max_abs().to_f64()).sum();
                    worst = worst.max(defect.to_f64() / magnitude.max(f64::MIN_POSITIVE));
                }
            }
            next.push(v);
        }
        if worst > tolerances::MONIC_ORTHOGONALITY_REL {
            return Err(MopError::OrthogonalityFailure {
                degree: n + 1,
                defect: worst,
            });
        }
        lead = &lead - &b;
        beta.push(b);
        gamma.push(g);
        norms.push(h);
        sigma_prev = std::mem::replace(&mut sigma, next);
    }
    Ok(MopFamily { beta, gamma, norms })
}

/// Recurrence blocks and squared norms of `Q_n = Λ_n P̂_n Λ_0⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedFamily<T> {
    /// `A_n`, one fewer than the other sequences when `Λ_{n_max+1}` was not
    /// supplied.
    pub a: Vec<Mat<T>>,
    pub b: Vec<Mat<T>>,
    /// `c[0]` is zero.
    pub c: Vec<Mat<T>>,
    /// `‖Q_n‖²`
    pub norms: Vec<Mat<T>>,
    pub lambda0: Mat<T>,
}

impl<T: Scalar> NormalizedFamily<T> {
    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    /// `Π_0 = (‖Q_0‖²)⁻¹ = (Λ_0 S_0 Λ_0ᵀ)⁻¹`.
    pub fn pi0(&self) -> Result<Mat<T>, MopError> {
        Ok(self.norms[0].inverse()?)
    }

    /// The block-tridiagonal model with these blocks (validated).
    pub fn to_model(&self, kind: Kind) -> Result<BlockTridiagonal<T>, MopError> {
        let levels = (0..self.len())
            .map(|n| {
                Level::new(
                    self.b[n].clone(),
                    self.a.get(n).cloned(),
                    (n > 0).then(|| self.c[n].clone()),
                )
            })
            .collect();
        Ok(BlockTridiagonal::new(self.lambda0.rows(), kind, levels)?)
    }
}

/// Whether [`stochastic_normalize`] should insist on a stochastic result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Any,
    Stochastic,
}

/// Conjugates the monic family by `lambdas`.
///
/// `lambdas` must cover levels `0..=n_max`; one extra matrix yields `A_{n_max}`.
pub fn stochastic_normalize<T: Scalar>(
    fam: &MopFamily<T>,
    lambdas: &[Mat<T>],
    target: Target,
) -> Result<NormalizedFamily<T>, MopError> {
    let levels = fam.len();
    if lambdas.len() < levels {
        return Err(MopError::NotEnoughNormalizations {
            needed: levels,
            available: lambdas.len(),
        });
    }
    let inverses = lambdas
        .iter()
        .take(levels + 1)
        .enumerate()
        .map(|(n, l)| l.inverse().map_err(|_| MopError::SingularNormalization(n)))
        .collect::<Result<Vec<_>, _>>()?;
    let n = lambdas[0].rows();
    let a = (0..levels)
        .filter(|&k| k + 1 < inverses.len())
        .map(|k| &lambdas[k] * &inverses[k + 1])
        .collect();
    let b = (0..levels)
        .map(|k| &(&lambdas[k] * &fam.beta[k]) * &inverses[k])
        .collect();
    let c = (0..levels)
        .map(|k| {
            if k == 0 {
                Mat::zeros(n, n)
            } else {
                &(&lambdas[k] * &fam.gamma[k]) * &inverses[k - 1]
            }
        })
        .collect();
    let norms = (0..levels)
        .map(|k| &(&lambdas[k] * &fam.norms[k]) * &lambdas[k].transpose())
        .collect();
    let out = NormalizedFamily {
        a,
        b,
        c,
        norms,
        lambda0: lambdas[0].clone(),
    };
    if target == Target::Stochastic {
        out.to_model(Kind::Discrete)?;
    }
    Ok(out)
}

/// `Q_0(x), …, Q_{n_max}(x)` from the forward recurrence
/// `Q_{n+1} = A_n⁻¹((x − B_n) Q_n − C_n Q_{n−1})`.
pub fn evaluate_q<T: Scalar>(fam: &NormalizedFamily<T>, x: &T, n_max: usize) -> Result<Vec<Mat<T>>, MopError> {
    if n_max > fam.a.len() {
        return Err(MopError::NotEnoughNormalizations {
            needed: n_max + 1,
            available: fam.a.len() + 1,
        });
    }
    let size = fam.lambda0.rows();
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(Mat::identity(size));
    let mut prev = Mat::zeros(size, size);
    for n in 0..n_max {
        let a_inv = fam.a[n].inverse().map_err(|_| MopError::SingularUpBlock(n))?;
        let cur = out[n].clone();
        let shifted = &cur.scale(x) - &(&fam.b[n] * &cur);
        let rhs = &shifted - &(&fam.c[n] * &prev);
        out.push(&a_inv * &rhs);
        prev = cur;
    }
    Ok(out)
}

/// Residual table `|∫ Q_n W̃ Q_mᵀ − δ_{nm} ‖Q_n‖²|` (max entry) with
/// `W̃ = Λ_0 W Λ_0ᵀ`, by quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalityTable {
    pub residuals: Vec<Vec<f64>>,
}

impl OrthogonalityTable {
    pub fn max(&self) -> f64 {
        self.residuals.iter().flatten().cloned().fold(0.0, f64::max)
    }
}

pub fn orthogonality_check(
    fam: &NormalizedFamily<f64>,
    w: &WeightSpec<f64>,
    n_max: usize,
) -> Result<OrthogonalityTable, MopError> {
    let rule = GaussJacobi::new(w.alpha, w.beta, order_for_degree(2 * n_max + w.poly_degree()))?;
    let conj = w.conjugated(&fam.lambda0);
    let values: Vec<Vec<Mat<f64>>> = rule
        .nodes
        .iter()
        .map(|x| evaluate_q(fam, x, n_max))
        .collect::<Result<_, _>>()?;
    let masses: Vec<Mat<f64>> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(x, wt)| conj.poly_at(x).scale(wt))
        .collect();
    let size = w.phases;
    let residuals = (0..=n_max)
        .map(|n| {
            (0..=n_max)
                .map(|m| {
                    let mut integral = Mat::zeros(size, size);
                    for (q, mass) in values.iter().zip(&masses) {
                        integral = &integral + &(&(&q[n] * mass) * &q[m].transpose());
                    }
                    if n == m {
                        integral = &integral - &fam.norms[n];
                    }
                    integral.max_abs()
                })
                .collect()
        })
        .collect();
    Ok(OrthogonalityTable { residuals })
}
