//! Gauss–Jacobi quadrature on `[0, 1]` for the weight `x^α (1−x)^β`.
//!
//! Nodes and weights come from the eigen-decomposition of the symmetric
//! tridiagonal Jacobi matrix of the shifted Jacobi polynomials (Golub–Welsch).
//! Only the first component of each eigenvector is needed, so the implicit QL
//! sweep tracks a single row of the rotation product.

use statrs::function::gamma::{gamma, ln_gamma};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuadratureError {
    #[error("exponents must exceed -1 (got alpha = {alpha}, beta = {beta})")]
    Exponent { alpha: f64, beta: f64 },
    #[error("quadrature order must be at least 1")]
    ZeroOrder,
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussJacobi {
    pub alpha: f64,
    pub beta: f64,
    /// Ascending nodes in `(0, 1)`.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussJacobi {
    /// `order`-point rule, exact for polynomials of degree `2·order − 1`
    /// against `x^α (1−x)^β`.
    pub fn new(alpha: f64, beta: f64, order: usize) -> Result<Self, QuadratureError> {
        if !(alpha > -1.0 && beta > -1.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(QuadratureError::Exponent { alpha, beta });
        }
        if order == 0 {
            return Err(QuadratureError::ZeroOrder);
        }
        let (a, b) = shifted_jacobi_matrix(alpha, beta, order + 1);
        let mut diag = a[..order].to_vec();
        let mut first_row = vec![0.0; order];
        first_row[0] = 1.0;
        implicit_ql(&mut diag, &b[..order - 1], &mut first_row)?;
        let mu0 = beta_function(alpha + 1.0, beta + 1.0);
        let mut pairs: Vec<(f64, f64)> = diag
            .into_iter()
            .zip(first_row)
            .map(|(x, v)| refine(x, mu0 * v * v, &a, &b, mu0))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        Ok(Self {
            alpha,
            beta,
            nodes,
            weights,
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `Σ w_i f(x_i)`, summed in ascending node order.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// One Newton step on the orthonormal `p_order` followed by the Christoffel
/// number `1 / Σ_{k<order} p_k(x)²`; both are more accurate than the
/// eigenvalue and the squared eigenvector component they replace.
fn refine(x0: f64, w0: f64, a: &[f64], b: &[f64], mu0: f64) -> (f64, f64) {
    let order = a.len() - 1;
    let eval = |x: f64| {
        let (mut p_prev, mut p) = (0.0, 1.0 / mu0.sqrt());
        let (mut d_prev, mut d) = (0.0, 0.0);
        let mut sum = p * p;
        for k in 0..order {
            let b_prev = if k == 0 { 0.0 } else { b[k - 1] };
            let p_next = ((x - a[k]) * p - b_prev * p_prev) / b[k];
            let d_next = ((x - a[k]) * d + p - b_prev * d_prev) / b[k];
            (p_prev, p) = (p, p_next);
            (d_prev, d) = (d, d_next);
            if k + 1 < order {
                sum += p * p;
            }
        }
        (p, d, sum)
    };
    let (p, d, _) = eval(x0);
    let x = if d != 0.0 && (p / d).abs() < 1e-6 {
        x0 - p / d
    } else {
        x0
    };
    let (_, _, sum) = eval(x);
    if sum.is_finite() && sum > 0.0 {
        (x, 1.0 / sum)
    } else {
        (x0, w0)
    }
}

/// `B(a, b)`, through `Γ` directly while it stays in range.
fn beta_function(a: f64, b: f64) -> f64 {
    if a + b < 170.0 {
        gamma(a) * gamma(b) / gamma(a + b)
    } else {
        (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
    }
}

/// Diagonal and off-diagonal of the Jacobi matrix for `x^α (1−x)^β` on
/// `[0, 1]`, obtained from the classical `[−1, 1]` recurrence through
/// `x = (1 + t)/2`.
fn shifted_jacobi_matrix(alpha: f64, beta: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    // on [-1, 1] the factor (1 - t) carries beta and (1 + t) carries alpha
    let (a, b) = (beta, alpha);
    let ab = a + b;
    let diag = (0..order)
        .map(|n| {
            let t = if n == 0 {
                (b - a) / (ab + 2.0)
            } else {
                let s = 2.0 * n as f64 + ab;
                (b * b - a * a) / (s * (s + 2.0))
            };
            (1.0 + t) / 2.0
        })
        .collect();
    let off = (1..order)
        .map(|n| {
            let nf = n as f64;
            let coeff = if n == 1 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                let s = 2.0 * nf + ab;
                4.0 * nf * (nf + a) * (nf + b) * (nf + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
            coeff.sqrt() / 2.0
        })
        .collect();
    (diag, off)
}

/// Eigenvalues of the symmetric tridiagonal matrix (`diag`, `off`) into
/// `diag`; `row` is rotated along so that it ends up holding the first
/// components of the normalized eigenvectors when it starts as `e_1`.
fn implicit_ql(diag: &mut [f64], off: &[f64], row: &mut [f64]) -> Result<(), QuadratureError> {
    let n = diag.len();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 100 {
                return Err(QuadratureError::NoConvergence);
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                let f = row[i + 1];
                row[i + 1] = s * row[i] + c * f;
                row[i] = c * row[i] - s * f;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Node count for integrands whose polynomial part has degree `degree`:
/// `⌈(degree + 2)/2⌉ + 8`, i.e. exactness plus an eight-node margin.
pub fn order_for_degree(degree: usize) -> usize {
    (degree + 2).div_ceil(2) + 8
}
