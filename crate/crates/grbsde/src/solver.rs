//! Discretized backward solvers: regression-based conditional expectations,
//! explicit driver steps and reflection by projection. The one- and
//! two-barrier solvers extract the increasing processes K+ and K- as clamp
//! gaps, which makes the discrete Skorokhod products and the singularity
//! min(dK+, dK-) = 0 hold exactly by construction.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{norm, Grid, VecGrid};
use crate::mesh::TimeMesh;
use crate::paths::PathEnsemble;
use crate::problem::MaterializedProblem;
use crate::regression::{conditional_expectation, RegressionEstimator};
use crate::tol;

#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    /// |Z| is capped at this value before driver evaluation; breaches are
    /// counted in the diagnostics rather than hidden.
    pub z_cap: f64,
    /// Fixed-point refreshes of the driver's y argument after the predictor
    /// step.
    pub corrector_passes: usize,
    /// When positive, regression states are clamped into their empirical
    /// [q, 1 - q] quantile range per slice, so fitted surfaces extrapolate
    /// flat beyond the data-supported region instead of polynomially. Off
    /// by default: it trades tail bias for tail stability, which only pays
    /// for explosive drivers; local bases handle tails without it.
    pub state_clip_quantile: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            z_cap: tol::Z_CAP_DEFAULT,
            corrector_passes: 0,
            state_clip_quantile: 0.0,
        }
    }
}

/// Lower and upper empirical q-quantiles of a slice.
fn quantile_range(values: &[f64], q: f64) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = ((q * n as f64).floor() as usize).min(n.saturating_sub(1) / 2);
    (sorted[k], sorted[n - 1 - k])
}

#[derive(Clone, Debug, Default)]
pub struct PanelDiagnostics {
    pub z_cap_breaches: usize,
    /// Per-path |sum_i (Y_i - L_i) dK+_i|.
    pub skorokhod_lower: Vec<f64>,
    /// Per-path |sum_i (U_i - Y_i) dK-_i|.
    pub skorokhod_upper: Vec<f64>,
    /// Largest min(dK+_i, dK-_i) over all steps and paths; zero whenever the
    /// two reflection measures stay mutually singular.
    pub max_singularity: f64,
    /// Worst conditioning estimate reported by the per-slice regressions.
    pub max_condition: f64,
    /// Largest continuation-fit standard error scale over the slices,
    /// residual_sd * sqrt(k / n): the Monte Carlo noise floor of the panel.
    pub max_fit_se: f64,
    pub y_sup_norm: f64,
}

/// Discretized (Y, Z, K+, K-) with diagnostics.
#[derive(Clone, Debug)]
pub struct SolutionPanel {
    pub y: Grid,
    pub z: VecGrid,
    pub k_plus: Grid,
    pub k_minus: Grid,
    pub diagnostics: PanelDiagnostics,
}

impl SolutionPanel {
    /// Mean of Y over paths at t = 0.
    pub fn y0_mean(&self) -> f64 {
        let row = self.y.row(0);
        row.iter().sum::<f64>() / row.len() as f64
    }

    pub fn k_plus_total_mean(&self) -> f64 {
        let n = self.k_plus.cols();
        self.k_plus.data().iter().sum::<f64>() / n as f64
    }

    pub fn k_minus_total_mean(&self) -> f64 {
        let n = self.k_minus.cols();
        self.k_minus.data().iter().sum::<f64>() / n as f64
    }
}

enum Reflection<'a> {
    None,
    Lower(&'a Grid),
    Both(&'a Grid, &'a Grid),
    PenalizedLower(&'a Grid, f64),
}

/// Shared backward induction. Per step: regression of Y_{i+1} and of
/// Y_{i+1} dB_i for the continuation value and Z, an explicit driver step
/// with the predictor as the y argument, then the reflection treatment.
fn backward_solve(
    mat: &MaterializedProblem,
    mesh: &TimeMesh,
    ens: &PathEnsemble,
    est: &RegressionEstimator,
    cfg: &SolverConfig,
    reflection: Reflection<'_>,
) -> Result<SolutionPanel> {
    let n_nodes = mesh.n_nodes();
    let n_steps = mesh.n_steps();
    let n_paths = ens.n_paths();
    let d = ens.d();
    if mat.terminal.len() != n_paths {
        return Err(Error::Shape(format!(
            "terminal has {} entries, ensemble has {n_paths} paths",
            mat.terminal.len()
        )));
    }

    let mut y = Grid::zeros(n_nodes, n_paths);
    let mut z = VecGrid::zeros(n_nodes, n_paths, d);
    let mut k_plus = Grid::zeros(n_steps, n_paths);
    let mut k_minus = Grid::zeros(n_steps, n_paths);
    let mut diag = PanelDiagnostics {
        skorokhod_lower: vec![0.0; n_paths],
        skorokhod_upper: vec![0.0; n_paths],
        ..PanelDiagnostics::default()
    };

    y.fill_row(n_nodes - 1, &mat.terminal);

    // Barrier gaps join the regression state so the basis can see how far a
    // path sits from the obstacle.
    let state_dim = 1
        + usize::from(mat.lower.is_some())
        + usize::from(mat.upper.is_some());
    let mut states = vec![0.0f64; n_paths * state_dim];
    let mut z_targets = vec![0.0f64; n_paths];

    for i in (0..n_steps).rev() {
        let t = mesh.t(i);
        let dt = mesh.dt(i);

        for p in 0..n_paths {
            let b = ens.w(i, p)[0];
            let row = &mut states[p * state_dim..(p + 1) * state_dim];
            row[0] = b;
            let mut slot = 1;
            if let Some(l) = &mat.lower {
                row[slot] = l.at(i, p) - b;
                slot += 1;
            }
            if let Some(u) = &mat.upper {
                row[slot] = u.at(i, p) - b;
            }
        }
        if cfg.state_clip_quantile > 0.0 && n_paths > 2 {
            for dim in 0..state_dim {
                let column: Vec<f64> = (0..n_paths)
                    .map(|p| states[p * state_dim + dim])
                    .collect();
                let (lo, hi) = quantile_range(&column, cfg.state_clip_quantile);
                for p in 0..n_paths {
                    states[p * state_dim + dim] = states[p * state_dim + dim].clamp(lo, hi);
                }
            }
        }

        let y_next = y.row(i + 1).to_vec();
        let (cont, fit_diag) = conditional_expectation(est, &states, state_dim, &y_next)?;
        diag.max_condition = diag.max_condition.max(fit_diag.condition_estimate);
        let k = est.basis.feature_count(state_dim) as f64;
        diag.max_fit_se = diag
            .max_fit_se
            .max(fit_diag.residual_sd * (k / n_paths as f64).sqrt());

        // Z_i = E[Y_{i+1} dB_i | F_i] / dt. Centering the product with the
        // continuation value leaves the conditional expectation unchanged
        // (E[dB | F_i] = 0) and strips the dominant variance term.
        for comp in 0..d {
            for p in 0..n_paths {
                z_targets[p] = (y_next[p] - cont[p]) * ens.dw(i, p)[comp];
            }
            let (fitted, _) = conditional_expectation(est, &states, state_dim, &z_targets)?;
            for p in 0..n_paths {
                z.at_mut(i, p)[comp] = fitted[p] / dt;
            }
        }

        // Cap |Z| before it reaches the driver.
        let mut breaches = 0usize;
        for p in 0..n_paths {
            let zp = z.at_mut(i, p);
            let zn = norm(zp);
            if zn > cfg.z_cap {
                let scale = cfg.z_cap / zn;
                for v in zp.iter_mut() {
                    *v *= scale;
                }
                breaches += 1;
            }
        }
        diag.z_cap_breaches += breaches;

        let candidates: Vec<f64> = (0..n_paths)
            .into_par_iter()
            .map(|p| {
                let zp = z.at(i, p);
                let da = ens.da(i, p);
                let mut cand =
                    cont[p] + mat.f.eval(t, cont[p], zp) * dt + mat.g.eval(t, cont[p]) * da;
                for _ in 0..cfg.corrector_passes {
                    cand = cont[p] + mat.f.eval(t, cand, zp) * dt + mat.g.eval(t, cand) * da;
                }
                cand
            })
            .collect();

        for (p, cand) in candidates.into_iter().enumerate() {
            if !cand.is_finite() {
                return Err(Error::Domain(format!(
                    "driver step produced a non-finite value at node {i}, path {p}"
                )));
            }
            let (val, dkp, dkm) = match reflection {
                Reflection::None => (cand, 0.0, 0.0),
                Reflection::Lower(l) => {
                    let lb = l.at(i, p);
                    if cand < lb {
                        (lb, lb - cand, 0.0)
                    } else {
                        (cand, 0.0, 0.0)
                    }
                }
                Reflection::Both(l, u) => {
                    let lb = l.at(i, p);
                    let ub = u.at(i, p);
                    if cand < lb {
                        (lb, lb - cand, 0.0)
                    } else if cand > ub {
                        (ub, 0.0, cand - ub)
                    } else {
                        (cand, 0.0, 0.0)
                    }
                }
                Reflection::PenalizedLower(l, penalty) => {
                    let lb = l.at(i, p);
                    if cand < lb {
                        // Implicit penalty step: y solves
                        // y = cand + penalty (lb - y) dt, which keeps the
                        // update stable for any penalty size.
                        let pdt = penalty * dt;
                        let val = (cand + pdt * lb) / (1.0 + pdt);
                        (val, penalty * (lb - val) * dt, 0.0)
                    } else {
                        (cand, 0.0, 0.0)
                    }
                }
            };
            y.set(i, p, val);
            k_plus.set(i, p, dkp);
            k_minus.set(i, p, dkm);
            if let Some(l) = &mat.lower {
                diag.skorokhod_lower[p] += (val - l.at(i, p)) * dkp;
            }
            if let Some(u) = &mat.upper {
                diag.skorokhod_upper[p] += (u.at(i, p) - val) * dkm;
            }
            diag.max_singularity = diag.max_singularity.max(dkp.min(dkm));
        }
    }

    for v in diag.skorokhod_lower.iter_mut() {
        *v = v.abs();
    }
    for v in diag.skorokhod_upper.iter_mut() {
        *v = v.abs();
    }
    diag.y_sup_norm = y.max_abs();

    Ok(SolutionPanel {
        y,
        z,
        k_plus,
        k_minus,
        diagnostics: diag,
    })
}

/// Backward solver without reflection.
pub fn solve_gbsde(
    mat: &MaterializedProblem,
    mesh: &TimeMesh,
    ens: &PathEnsemble,
    est: &RegressionEstimator,
    cfg: &SolverConfig,
) -> Result<SolutionPanel> {
    if mat.lower.is_some() || mat.upper.is_some() {
        return Err(Error::Config(
            "unreflected solver called with barriers present".into(),
        ));
    }
    backward_solve(mat, mesh, ens, est, cfg, Reflection::None)
}

/// One lower barrier: projection Y_i = max(candidate, L_i) with
/// dK_i = Y_i - candidate.
pub fn solve_grbsde_one_barrier(
    mat: &MaterializedProblem,
    mesh: &TimeMesh,
    ens: &PathEnsemble,
    est: &RegressionEstimator,
    cfg: &SolverConfig,
) -> Result<SolutionPanel> {
    let lower = mat
        .lower
        .as_ref()
        .ok_or_else(|| Error::Config("one-barrier solver needs a lower barrier".into()))?;
    backward_solve(mat, mesh, ens, est, cfg, Reflection::Lower(lower))
}

/// Two barriers: two-sided clamp. At most one side can bind per step, so the
/// discrete reflection measures are singular by construction.
pub fn solve_grbsde_two_barriers(
    mat: &MaterializedProblem,
    mesh: &TimeMesh,
    ens: &PathEnsemble,
    est: &RegressionEstimator,
    cfg: &SolverConfig,
) -> Result<SolutionPanel> {
    let lower = mat
        .lower
        .as_ref()
        .ok_or_else(|| Error::Config("two-barrier solver needs a lower barrier".into()))?;
    let upper = mat
        .upper
        .as_ref()
        .ok_or_else(|| Error::Config("two-barrier solver needs an upper barrier".into()))?;
    backward_solve(mat, mesh, ens, est, cfg, Reflection::Both(lower, upper))
}

/// Penalization alternative to projection: the reflection force enters the
/// drift as penalty (L - y)^+ and K is recovered from the same term.
pub fn solve_penalized(
    mat: &MaterializedProblem,
    mesh: &TimeMesh,
    ens: &PathEnsemble,
    est: &RegressionEstimator,
    cfg: &SolverConfig,
    penalty: f64,
) -> Result<SolutionPanel> {
    if !(penalty > 0.0) {
        return Err(Error::Config(format!(
            "penalty must be positive, got {penalty}"
        )));
    }
    let lower = mat
        .lower
        .as_ref()
        .ok_or_else(|| Error::Config("penalized solver needs a lower barrier".into()))?;
    backward_solve(
        mat,
        mesh,
        ens,
        est,
        cfg,
        Reflection::PenalizedLower(lower, penalty),
    )
}

/// Per-step excess of the reflection increments over their bounds: for the
/// upper barrier dK- <= (f(s, U, chi) - rho)^+ ds + (g(s, U) - theta)^+ dA
/// and the mirrored bound for dK+ at the lower barrier.
#[derive(Clone, Debug)]
pub struct DkBoundSide {
    /// Largest excess over all steps and paths.
    pub max_excess: f64,
    /// Per-step maxima over paths.
    pub per_step_max: Vec<f64>,
    /// Per-step means over paths of (dK - bound), with the standard errors
    /// of those means: the aggregate that Monte Carlo noise bands apply to.
    pub per_step_mean: Vec<f64>,
    pub per_step_mean_se: Vec<f64>,
}

impl DkBoundSide {
    /// Worst per-step mean excess in units of its standard error;
    /// nonpositive means never count.
    pub fn worst_mean_over_se(&self) -> f64 {
        self.per_step_mean
            .iter()
            .zip(&self.per_step_mean_se)
            .map(|(m, se)| {
                if *m <= 0.0 {
                    0.0
                } else {
                    m / se.max(f64::MIN_POSITIVE)
                }
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Default)]
pub struct DkBoundReport {
    pub lower: Option<DkBoundSide>,
    pub upper: Option<DkBoundSide>,
}

fn dk_bound_side<F>(n_steps: usize, n_paths: usize, excess_at: F) -> DkBoundSide
where
    F: Fn(usize, usize) -> f64,
{
    let mut per_step_max = vec![f64::NEG_INFINITY; n_steps];
    let mut per_step_mean = vec![0.0; n_steps];
    let mut per_step_mean_se = vec![0.0; n_steps];
    for i in 0..n_steps {
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for p in 0..n_paths {
            let e = excess_at(i, p);
            per_step_max[i] = per_step_max[i].max(e);
            sum += e;
            sum2 += e * e;
        }
        let n = n_paths as f64;
        let mean = sum / n;
        per_step_mean[i] = mean;
        per_step_mean_se[i] = ((sum2 / n - mean * mean).max(0.0) / n).sqrt();
    }
    DkBoundSide {
        max_excess: per_step_max.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        per_step_max,
        per_step_mean,
        per_step_mean_se,
    }
}

pub fn check_dk_bounds(
    panel: &SolutionPanel,
    mat: &MaterializedProblem,
    mesh: &TimeMesh,
    ens: &PathEnsemble,
) -> Result<DkBoundReport> {
    let n_steps = mesh.n_steps();
    let n_paths = ens.n_paths();
    let mut report = DkBoundReport::default();

    if let Some(lower) = &mat.lower {
        let decomp = mat.lower_decomp.as_ref().ok_or_else(|| {
            Error::Config("dK+ bound needs the lower barrier decomposition".into())
        })?;
        report.lower = Some(dk_bound_side(n_steps, n_paths, |i, p| {
            let t = mesh.t(i);
            let chi = decomp.chi_at(t);
            let l = lower.at(i, p);
            let bound = (-mat.f.eval(t, l, &chi) - decomp.rho.value_at(t)).max(0.0) * mesh.dt(i)
                + (-mat.g.eval(t, l) - decomp.theta.value_at(t)).max(0.0) * ens.da(i, p);
            panel.k_plus.at(i, p) - bound
        }));
    }

    if let Some(upper) = &mat.upper {
        let decomp = mat.upper_decomp.as_ref().ok_or_else(|| {
            Error::Config("dK- bound needs the upper barrier decomposition".into())
        })?;
        report.upper = Some(dk_bound_side(n_steps, n_paths, |i, p| {
            let t = mesh.t(i);
            let chi = decomp.chi_at(t);
            let u = upper.at(i, p);
            let bound = (mat.f.eval(t, u, &chi) - decomp.rho.value_at(t)).max(0.0) * mesh.dt(i)
                + (mat.g.eval(t, u) - decomp.theta.value_at(t)).max(0.0) * ens.da(i, p);
            panel.k_minus.at(i, p) - bound
        }));
    }

    if report.lower.is_none() && report.upper.is_none() {
        return Err(Error::Config(
            "dK bound check needs at least one barrier with a decomposition".into(),
        ));
    }
    Ok(report)
}

/// Pathwise ordering report: counts (node, path) pairs where
/// Y^a > Y^b + tolerance.
#[derive(Clone, Copy, Debug)]
pub struct ComparisonReport {
    pub violations: usize,
    pub checked: usize,
    pub max_excess: f64,
}

pub fn compare_solutions(a: &SolutionPanel, b: &SolutionPanel, tolerance: f64) -> Result<ComparisonReport> {
    if !a.y.same_shape(&b.y) {
        return Err(Error::Shape(format!(
            "panels differ in shape: {}x{} vs {}x{}",
            a.y.rows(),
            a.y.cols(),
            b.y.rows(),
            b.y.cols()
        )));
    }
    let mut violations = 0usize;
    let mut max_excess = f64::NEG_INFINITY;
    for (va, vb) in a.y.data().iter().zip(b.y.data()) {
        let excess = va - vb;
        max_excess = max_excess.max(excess);
        if excess > tolerance {
            violations += 1;
        }
    }
    Ok(ComparisonReport {
        violations,
        checked: a.y.data().len(),
        max_excess,
    })
}
