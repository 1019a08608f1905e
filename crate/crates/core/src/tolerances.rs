//! Float-backend thresholds. The exact backend never consults these: it
//! compares for equality.

/// Pivot threshold for inversion, relative to the largest entry of the input.
pub const PIVOT_REL: f64 = 1e-13;

/// LDLᵀ pivot threshold for positive definiteness, relative to the trace.
pub const PD_PIVOT_REL: f64 = 1e-13;

/// Absolute tolerance on block row sums (entries are O(1)).
pub const ROW_SUM_ABS: f64 = 1e-12;

/// Symmetry checks, relative to the largest entry of the matrix involved.
pub const SYMMETRY_REL: f64 = 1e-11;

/// Residual threshold for the symmetry conditions on potential coefficients.
pub const CONDITION_REL: f64 = 1e-11;

/// Default verification tolerance for stationarity and reconstruction checks.
pub const VERIFY_DEFAULT: f64 = 1e-10;

/// Orthogonality of freshly built monic polynomials (relative).
pub const MONIC_ORTHOGONALITY_REL: f64 = 1e-8;
