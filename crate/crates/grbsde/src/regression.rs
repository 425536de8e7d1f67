//! Least-squares conditional expectation estimator: projection of per-path
//! targets onto a small feature basis of the per-path state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;

/// Feature basis evaluated on a per-path state slice. The first state
/// coordinate carries the Brownian value; any further coordinates (barrier
/// gaps) enter linearly under `PolynomialWithAux`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Basis {
    /// 1, s0, s0^2, ..., s0^degree.
    Polynomial { degree: usize },
    /// Polynomial in s0 plus the remaining state coordinates linearly.
    PolynomialWithAux { degree: usize },
    /// Polynomial in s0 plus |s0|: the kink feature for value functions
    /// shaped by reflected or absolute-value terminals, which keeps tail
    /// extrapolation linear instead of polynomial.
    PolynomialWithAbs { degree: usize },
    /// Hat functions over empirical-quantile knots of s0: a local basis.
    /// Fitted values are locally weighted averages, so edge regions cannot
    /// be dragged by a global polynomial and extrapolation beyond the data
    /// is flat at the local edge level.
    PiecewiseLinear { segments: usize },
}

impl Basis {
    pub fn feature_count(&self, state_dim: usize) -> usize {
        match *self {
            Basis::Polynomial { degree } => degree + 1,
            Basis::PolynomialWithAux { degree } => degree + 1 + state_dim.saturating_sub(1),
            Basis::PolynomialWithAbs { degree } => degree + 2,
            Basis::PiecewiseLinear { segments } => segments.max(1) + 1,
        }
    }
}

/// Knot positions at uniform empirical quantiles (including the extremes).
fn quantile_knots(states: &[f64], state_dim: usize, segments: usize) -> Vec<f64> {
    let n = states.len() / state_dim;
    let mut s0: Vec<f64> = (0..n).map(|p| states[p * state_dim]).collect();
    s0.sort_by(f64::total_cmp);
    let k = segments.max(1);
    (0..=k)
        .map(|j| s0[(j * (n - 1)) / k])
        .collect()
}

/// Concrete feature evaluator, resolved against the slice's data when the
/// basis is local.
struct FeatureMap<'a> {
    basis: &'a Basis,
    knots: Vec<f64>,
}

impl<'a> FeatureMap<'a> {
    fn new(basis: &'a Basis, states: &[f64], state_dim: usize) -> Self {
        let knots = match basis {
            Basis::PiecewiseLinear { segments } => {
                quantile_knots(states, state_dim, *segments)
            }
            _ => Vec::new(),
        };
        FeatureMap { basis, knots }
    }

    fn fill(&self, state: &[f64], out: &mut [f64]) {
        let s0 = state[0];
        match self.basis {
            Basis::Polynomial { degree }
            | Basis::PolynomialWithAux { degree }
            | Basis::PolynomialWithAbs { degree } => {
                let mut pow = 1.0;
                for slot in out.iter_mut().take(degree + 1) {
                    *slot = pow;
                    pow *= s0;
                }
                match self.basis {
                    Basis::Polynomial { .. } => {}
                    Basis::PolynomialWithAux { .. } => {
                        for (j, slot) in out.iter_mut().skip(degree + 1).enumerate() {
                            *slot = state[1 + j];
                        }
                    }
                    Basis::PolynomialWithAbs { .. } => {
                        out[degree + 1] = s0.abs();
                    }
                    Basis::PiecewiseLinear { .. } => unreachable!(),
                }
            }
            Basis::PiecewiseLinear { .. } => {
                out.fill(0.0);
                let knots = &self.knots;
                let k = knots.len() - 1;
                let lo = knots[0];
                let hi = knots[k];
                if hi - lo <= f64::EPSILON * (1.0 + lo.abs() + hi.abs()) {
                    // Degenerate slice: a single constant feature.
                    out[0] = 1.0;
                    return;
                }
                let b = s0.clamp(lo, hi);
                // Last knot interval containing b.
                let mut seg = match knots.binary_search_by(|v| v.total_cmp(&b)) {
                    Ok(j) => j.min(k - 1),
                    Err(j) => j.saturating_sub(1).min(k - 1),
                };
                // Skip over zero-width intervals from repeated quantiles.
                while seg + 1 < k && knots[seg + 1] <= knots[seg] {
                    seg += 1;
                }
                let width = knots[seg + 1] - knots[seg];
                let w = if width > 0.0 {
                    (b - knots[seg]) / width
                } else {
                    0.0
                };
                out[seg] = 1.0 - w;
                out[seg + 1] = w;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RegressionEstimator {
    pub basis: Basis,
    pub ridge: f64,
}

impl Default for RegressionEstimator {
    fn default() -> Self {
        RegressionEstimator {
            basis: Basis::PolynomialWithAux { degree: 3 },
            ridge: tol::RIDGE_DEFAULT,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FitDiagnostics {
    /// Crude conditioning estimate of the normal equations: ratio of the
    /// largest to smallest squared Cholesky pivot.
    pub condition_estimate: f64,
    /// True when the plain normal equations were rank deficient and the
    /// ridge fallback was engaged.
    pub ridged: bool,
    /// Residual standard deviation of the fit.
    pub residual_sd: f64,
}

/// In-place Cholesky of a symmetric positive definite matrix in packed
/// row-major form. Returns the pivots, or None when a pivot falls below
/// `floor`.
fn cholesky(a: &mut [f64], k: usize, floor: f64) -> Option<Vec<f64>> {
    let mut pivots = Vec::with_capacity(k);
    for j in 0..k {
        let mut d = a[j * k + j];
        for l in 0..j {
            d -= a[j * k + l] * a[j * k + l];
        }
        if d <= floor {
            return None;
        }
        let d_sqrt = d.sqrt();
        a[j * k + j] = d_sqrt;
        pivots.push(d);
        for i in j + 1..k {
            let mut v = a[i * k + j];
            for l in 0..j {
                v -= a[i * k + l] * a[j * k + l];
            }
            a[i * k + j] = v / d_sqrt;
        }
    }
    Some(pivots)
}

fn cholesky_solve(l: &[f64], k: usize, b: &mut [f64]) {
    for i in 0..k {
        let mut v = b[i];
        for j in 0..i {
            v -= l[i * k + j] * b[j];
        }
        b[i] = v / l[i * k + i];
    }
    for i in (0..k).rev() {
        let mut v = b[i];
        for j in i + 1..k {
            v -= l[j * k + i] * b[j];
        }
        b[i] = v / l[i * k + i];
    }
}

/// Projects `targets` onto the basis evaluated at the per-path states and
/// returns the fitted values. `states` is row-major with `state_dim` entries
/// per path.
///
/// The normal equations are first solved without regularization; only a rank
/// deficient system falls back to the ridge (never applied to the intercept),
/// so in-span targets are reproduced essentially exactly and the projection
/// is idempotent.
pub fn conditional_expectation(
    est: &RegressionEstimator,
    states: &[f64],
    state_dim: usize,
    targets: &[f64],
) -> Result<(Vec<f64>, FitDiagnostics)> {
    if state_dim == 0 {
        return Err(Error::Shape("state dimension must be positive".into()));
    }
    if states.len() != targets.len() * state_dim {
        return Err(Error::Shape(format!(
            "states ({}) and targets ({}) disagree for state_dim {state_dim}",
            states.len(),
            targets.len()
        )));
    }
    let n = targets.len();
    if n == 0 {
        return Err(Error::Shape("no paths to regress over".into()));
    }
    let k = est.basis.feature_count(state_dim);
    let feature_map = FeatureMap::new(&est.basis, states, state_dim);

    // Accumulate X^T X and X^T y sequentially: the path count is the long
    // dimension but k is tiny, and a fixed summation order keeps outputs
    // bitwise stable across thread counts.
    let mut xtx = vec![0.0f64; k * k];
    let mut xty = vec![0.0f64; k];
    let mut feat = vec![0.0f64; k];
    for p in 0..n {
        feature_map.fill(&states[p * state_dim..(p + 1) * state_dim], &mut feat);
        let y = targets[p];
        for i in 0..k {
            xty[i] += feat[i] * y;
            for j in 0..=i {
                xtx[i * k + j] += feat[i] * feat[j];
            }
        }
    }
    for i in 0..k {
        for j in i + 1..k {
            xtx[i * k + j] = xtx[j * k + i];
        }
    }

    let max_diag = (0..k).fold(0.0f64, |m, i| m.max(xtx[i * k + i].abs()));
    let rank_floor = tol::CHOLESKY_PIVOT_REL * max_diag.max(f64::MIN_POSITIVE);
    let mut factor = xtx.clone();
    let mut ridged = false;
    let pivots = match cholesky(&mut factor, k, rank_floor) {
        Some(p) => p,
        None => {
            ridged = true;
            factor.copy_from_slice(&xtx);
            // Ridge on every non-intercept feature; feature 0 is the
            // constant column and stays unpenalized so constant targets are
            // recovered exactly. The ridged system is positive definite by
            // construction, so only an outright nonpositive pivot stops it.
            for i in 1..k {
                factor[i * k + i] += est.ridge.max(f64::MIN_POSITIVE);
            }
            cholesky(&mut factor, k, 0.0).ok_or_else(|| {
                Error::Config("normal equations singular even after ridge".into())
            })?
        }
    };
    let condition_estimate = {
        let max = pivots.iter().cloned().fold(f64::MIN, f64::max);
        let min = pivots.iter().cloned().fold(f64::MAX, f64::min);
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    };

    let mut beta = xty;
    cholesky_solve(&factor, k, &mut beta);

    let mut fitted = vec![0.0f64; n];
    let mut rss = 0.0;
    for p in 0..n {
        feature_map.fill(&states[p * state_dim..(p + 1) * state_dim], &mut feat);
        let v: f64 = feat.iter().zip(&beta).map(|(f, b)| f * b).sum();
        fitted[p] = v;
        let r = targets[p] - v;
        rss += r * r;
    }

    Ok((
        fitted,
        FitDiagnostics {
            condition_estimate,
            ridged,
            residual_sd: (rss / n as f64).sqrt(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn states_1d(xs: &[f64]) -> Vec<f64> {
        xs.to_vec()
    }

    #[test]
    fn affine_targets_recovered_exactly() {
        let est = RegressionEstimator {
            basis: Basis::Polynomial { degree: 3 },
            ridge: tol::RIDGE_DEFAULT,
        };
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64) / 250.0 - 2.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 + 3.0 * x).collect();
        let (fit, diag) = conditional_expectation(&est, &states_1d(&xs), 1, &ys).unwrap();
        for (f, y) in fit.iter().zip(&ys) {
            assert!((f - y).abs() < 1e-10, "fit {f} vs {y}");
        }
        assert!(!diag.ridged);
    }

    #[test]
    fn constant_targets_give_the_mean() {
        let est = RegressionEstimator::default();
        // Degenerate states (all zero) force the ridge fallback.
        let xs = vec![0.0; 500];
        let ys = vec![4.25; 500];
        let states: Vec<f64> = xs.iter().flat_map(|&x| [x, 0.0]).collect();
        let (fit, diag) = conditional_expectation(&est, &states, 2, &ys).unwrap();
        assert!(diag.ridged);
        for f in fit {
            assert!((f - 4.25).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_in_span_is_reproduced() {
        let est = RegressionEstimator {
            basis: Basis::Polynomial { degree: 2 },
            ridge: tol::RIDGE_DEFAULT,
        };
        let xs: Vec<f64> = (0..2000).map(|i| ((i * 37) % 1999) as f64 / 500.0 - 2.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (fit, _) = conditional_expectation(&est, &states_1d(&xs), 1, &ys).unwrap();
        for (f, y) in fit.iter().zip(&ys) {
            assert!((f - y).abs() < 1e-8, "fit {f} vs {y}");
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let est = RegressionEstimator::default();
        let xs: Vec<f64> = (0..5000).map(|i| ((i * 613) % 4999) as f64 / 1000.0 - 2.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x * 1.7).sin() + 0.3 * x).collect();
        let states: Vec<f64> = xs.iter().flat_map(|&x| [x, x.abs()]).collect();
        let (fit1, _) = conditional_expectation(&est, &states, 2, &ys).unwrap();
        let (fit2, _) = conditional_expectation(&est, &states, 2, &fit1).unwrap();
        for (a, b) in fit1.iter().zip(&fit2) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let est = RegressionEstimator::default();
        let res = conditional_expectation(&est, &[1.0, 2.0, 3.0], 2, &[1.0, 2.0]);
        assert!(matches!(res, Err(Error::Shape(_))));
    }

    #[test]
    fn piecewise_basis_tracks_kinked_targets_locally() {
        let est = RegressionEstimator {
            basis: Basis::PiecewiseLinear { segments: 16 },
            ridge: tol::RIDGE_DEFAULT,
        };
        let xs: Vec<f64> = (0..4000).map(|i| ((i * 131) % 3999) as f64 / 500.0 - 4.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
        let (fit, diag) = conditional_expectation(&est, &states_1d(&xs), 1, &ys).unwrap();
        for (f, x) in fit.iter().zip(&xs) {
            assert!(
                (f - x.abs()).abs() < 0.05,
                "piecewise fit at {x}: {f} vs {}",
                x.abs()
            );
        }
        assert!(!diag.ridged);
    }

    #[test]
    fn piecewise_basis_edge_values_are_local_averages() {
        // A lone extreme point cannot be dragged by data far away: its
        // fitted value stays near the edge-segment targets.
        let est = RegressionEstimator {
            basis: Basis::PiecewiseLinear { segments: 8 },
            ridge: tol::RIDGE_DEFAULT,
        };
        let mut xs: Vec<f64> = (0..2000).map(|i| (i as f64 / 1999.0) * 2.0 - 1.0).collect();
        xs.push(8.0); // outlier state
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (fit, _) = conditional_expectation(&est, &states_1d(&xs), 1, &ys).unwrap();
        let outlier_fit = fit[fit.len() - 1];
        assert!(
            (outlier_fit - 64.0).abs() < 64.0,
            "outlier drives its own local fit, got {outlier_fit}"
        );
        // Interior fits unaffected to first order.
        assert!((fit[1000] - xs[1000] * xs[1000]).abs() < 0.05);
    }

    #[test]
    fn piecewise_basis_degenerate_slice_gives_mean() {
        let est = RegressionEstimator {
            basis: Basis::PiecewiseLinear { segments: 8 },
            ridge: tol::RIDGE_DEFAULT,
        };
        let xs = vec![1.5; 300];
        let ys = vec![2.75; 300];
        let (fit, _) = conditional_expectation(&est, &states_1d(&xs), 1, &ys).unwrap();
        for f in fit {
            assert!((f - 2.75).abs() < 1e-12);
        }
    }
}
