//! Central numeric tolerances. Every threshold used by the library is pinned
//! here rather than scattered as magic numbers through the call sites.

/// Absolute tolerance for adaptive quadrature.
pub const QUAD_ABS: f64 = 1e-12;
/// Relative tolerance for adaptive quadrature.
pub const QUAD_REL: f64 = 1e-10;
/// Maximum number of subintervals before quadrature gives up.
pub const QUAD_MAX_INTERVALS: usize = 4096;

/// Residual tolerance for bracketed root searches (|f(x) - target| <= this).
pub const ROOT_TOL: f64 = 1e-10;
/// Iteration cap for the bisection/secant hybrid.
pub const ROOT_MAX_ITER: usize = 200;
/// Doubling cap when growing an initial bracket.
pub const BRACKET_MAX_DOUBLINGS: usize = 128;

/// Values of the process C below this threshold take the {C = 0} branch of
/// the indicator closed forms.
pub const C_ZERO_THRESHOLD: f64 = 1e-14;

/// Admissibility slack: a deficit H(F^-1(x,c)) - eta >= -this is clamped to
/// the boundary instead of rejected, absorbing Monte Carlo noise on
/// conditional estimates.
pub const MEMBERSHIP_SLACK: f64 = 1e-9;

/// A discrete compensator increment below -this fails the
/// "dk is a positive measure" certificate.
pub const K_MEASURE_TOL: f64 = 1e-9;

/// Relative tolerance when scanning varphi(., c) for monotonicity.
pub const VARPHI_MONO_TOL: f64 = 1e-9;

/// Reflection tolerance: how far Y may sit outside [L, U] after projection.
pub const REFLECT_TOL: f64 = 1e-12;

/// Per-path Skorokhod residual tolerance, scaled by (1 + ||Y||_inf).
pub const SKOR_TOL: f64 = 1e-3;

/// Default cap on |Z| before driver evaluation.
pub const Z_CAP_DEFAULT: f64 = 1e3;

/// Default ridge regularizer for the regression estimator.
pub const RIDGE_DEFAULT: f64 = 1e-8;

/// Pivot threshold (relative to the largest diagonal) under which the
/// unregularized normal equations are declared rank deficient.
pub const CHOLESKY_PIVOT_REL: f64 = 1e-12;
