//! Solution envelopes built from the transform calculus: the deterministic
//! bounded-case bound H^{-1}(a - eta_t), the unbounded-case closed forms
//! x_t = G(E(lambda_bar | F_t), C_t, eta_t), and the explicit (x, z, k)
//! construction from a solution of the auxiliary linear-in-|z| equation.

use crate::error::{Error, Result};
use crate::grid::{Grid, VecGrid};
use crate::mesh::TimeMesh;
use crate::paths::PathEnsemble;
use crate::regression::{conditional_expectation, RegressionEstimator};
use crate::tol;
use crate::transform::{EnvelopeSpec, PhiFamily, PsiFamily, TransformPoint};

/// Discretized envelope process with its martingale integrand and
/// compensator increments.
#[derive(Clone, Debug)]
pub struct EnvelopePath {
    /// x at each node and path; nonnegative.
    pub values: Grid,
    /// z at each node and path (terminal row zero).
    pub z_values: VecGrid,
    /// dk over each step and path.
    pub k_increments: Grid,
    /// Certificate that every discrete dk increment is >= -tolerance: the
    /// pathwise, mesh-resolution check of the positive-measure hypothesis.
    pub all_k_nonnegative: bool,
}

/// Cumulated eta_t = int_0^t alpha ds + int_0^t beta dA at every node and
/// path, with left-point coefficient evaluation.
pub fn eta_on_mesh(env: &EnvelopeSpec, mesh: &TimeMesh, ens: &PathEnsemble) -> Grid {
    let mut eta = Grid::zeros(mesh.n_nodes(), ens.n_paths());
    for i in 0..mesh.n_steps() {
        let t = mesh.t(i);
        let alpha = env.alpha().value_at(t);
        let beta = env.beta().value_at(t);
        let dt = mesh.dt(i);
        for p in 0..ens.n_paths() {
            let inc = alpha * dt + beta * ens.da(i, p);
            let prev = eta.at(i, p);
            eta.set(i + 1, p, prev + inc);
        }
    }
    eta
}

/// Deterministic eta on the mesh; requires a deterministic A. Returns one
/// value per node.
pub fn eta_deterministic(
    env: &EnvelopeSpec,
    mesh: &TimeMesh,
    a_increments: &[f64],
) -> Result<Vec<f64>> {
    if a_increments.len() != mesh.n_steps() {
        return Err(Error::Shape(format!(
            "A increments: got {}, mesh has {} steps",
            a_increments.len(),
            mesh.n_steps()
        )));
    }
    let mut eta = Vec::with_capacity(mesh.n_nodes());
    eta.push(0.0);
    for i in 0..mesh.n_steps() {
        let t = mesh.t(i);
        let inc = env.alpha().value_at(t) * mesh.dt(i) + env.beta().value_at(t) * a_increments[i];
        eta.push(eta[i] + inc);
    }
    Ok(eta)
}

/// Bounded-case deterministic envelope x_t = H^{-1}(a - eta_t), evaluated
/// pathwise on a grid of eta values.
pub fn bounded_envelope(env: &EnvelopeSpec, a: f64, eta: &Grid) -> Result<Grid> {
    if let crate::transform::MassBound::Finite(mass) = env.h_mass() {
        if !(a < mass) {
            return Err(Error::Range(format!(
                "budget a = {a} must stay below the total mass {mass:.6e} of 1/phi"
            )));
        }
    }
    if !(a >= 0.0) {
        return Err(Error::Domain(format!("budget a = {a} is negative")));
    }
    let mut x = Grid::zeros(eta.rows(), eta.cols());
    for i in 0..eta.rows() {
        for p in 0..eta.cols() {
            let e = eta.at(i, p);
            if e > a + 1e-12 {
                return Err(Error::Range(format!(
                    "eta = {e:.6e} exceeds the budget a = {a} at node {i}, path {p}"
                )));
            }
            x.set(i, p, env.h_inv((a - e).max(0.0))?);
        }
    }
    Ok(x)
}

/// The closed-form envelope families of the unbounded case. Each pins a
/// (phi, psi) pair; the spec passed alongside must match.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnboundedFamily {
    /// phi(x) = x, psi = 1, R = 0:
    /// x = e^{-eta} (D + ln(1 + c lb)/c), with the c = 0 branch D + lb.
    PhiLinearPsiOne,
    /// phi(x) = x ln x, psi = 1, C = m:
    /// x = exp( e^{-eta} ln(D + ln(1 + m lb)/m) ).
    PhiXLnXPsiOne,
    /// phi(x) = x, psi(x) = x, C = m:
    /// x = e^{-eta} F0^{-1}(lb) with F0(x) = int_D^x e^{m (t^2 - D^2)/2} dt.
    PhiLinearPsiLinear,
    /// phi(x) = x, psi = 0, R free: x = e^{-eta} (D + lb), where lb already
    /// carries the sup over controls of the weighted conditional estimate.
    PhiLinearPsiZero,
}

fn family_matches(env: &EnvelopeSpec, family: UnboundedFamily) -> bool {
    match family {
        UnboundedFamily::PhiLinearPsiOne => {
            matches!(env.phi(), PhiFamily::Linear) && matches!(env.psi(), PsiFamily::One)
        }
        UnboundedFamily::PhiXLnXPsiOne => {
            matches!(env.phi(), PhiFamily::RLogR) && matches!(env.psi(), PsiFamily::One)
        }
        UnboundedFamily::PhiLinearPsiLinear => {
            matches!(env.phi(), PhiFamily::Linear) && matches!(env.psi(), PsiFamily::Linear)
        }
        UnboundedFamily::PhiLinearPsiZero => {
            matches!(env.phi(), PhiFamily::Linear) && matches!(env.psi(), PsiFamily::Zero)
        }
    }
}

/// Applies the family closed form x = G(lambda_bar_cond, C, eta) node by
/// node. `c_at` holds C at the mesh nodes; `lambda_bar_cond` and `eta` are
/// node x path grids.
pub fn unbounded_envelope(
    env: &EnvelopeSpec,
    family: UnboundedFamily,
    lambda_bar_cond: &Grid,
    c_at: &[f64],
    eta: &Grid,
) -> Result<Grid> {
    if !family_matches(env, family) {
        return Err(Error::Config(format!(
            "envelope family {family:?} does not match the spec's (phi, psi) = ({:?}, {:?})",
            env.phi(),
            env.psi()
        )));
    }
    if !lambda_bar_cond.same_shape(eta) {
        return Err(Error::Shape(
            "conditional lambda_bar and eta grids differ in shape".into(),
        ));
    }
    if c_at.len() != lambda_bar_cond.rows() {
        return Err(Error::Shape(format!(
            "C values: got {}, need one per node ({})",
            c_at.len(),
            lambda_bar_cond.rows()
        )));
    }

    let mut x = Grid::zeros(eta.rows(), eta.cols());
    for i in 0..eta.rows() {
        let c = c_at[i];
        for p in 0..eta.cols() {
            let lb = lambda_bar_cond.at(i, p);
            if !(lb >= 0.0) {
                return Err(Error::Domain(format!(
                    "conditional lambda_bar = {lb} negative at node {i}, path {p}"
                )));
            }
            let point = TransformPoint::new(lb, c, eta.at(i, p));
            let v = env.g(point).map_err(|e| match e {
                Error::NotAdmissible { deficit, .. } => Error::NotAdmissible {
                    deficit,
                    context: format!("node {i}, path {p}"),
                },
                other => other,
            })?;
            x.set(i, p, v);
        }
    }
    Ok(x)
}

/// Conditional expectation of the transformed terminal bound at every node:
/// regression at the interior nodes, the exact values at the terminal node
/// and the plain mean at node 0. Also returns the largest fit standard
/// error scale over the nodes, residual_sd * sqrt(k / n).
pub fn conditional_lambda_bar(
    mesh: &TimeMesh,
    ens: &PathEnsemble,
    est: &RegressionEstimator,
    lambda_bar_terminal: &[f64],
) -> Result<(Grid, f64)> {
    let n_paths = ens.n_paths();
    if lambda_bar_terminal.len() != n_paths {
        return Err(Error::Shape(format!(
            "lambda_bar has {} entries, ensemble has {n_paths} paths",
            lambda_bar_terminal.len()
        )));
    }
    let n_nodes = mesh.n_nodes();
    let mut out = Grid::zeros(n_nodes, n_paths);
    out.fill_row(n_nodes - 1, lambda_bar_terminal);

    let mean = lambda_bar_terminal.iter().sum::<f64>() / n_paths as f64;
    out.row_mut(0).fill(mean);

    let mut max_se = {
        let var = lambda_bar_terminal
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n_paths as f64;
        (var / n_paths as f64).sqrt()
    };
    for i in 1..n_nodes - 1 {
        let states: Vec<f64> = (0..n_paths).map(|p| ens.w(i, p)[0]).collect();
        let (fitted, fit_diag) = conditional_expectation(est, &states, 1, lambda_bar_terminal)?;
        let k = est.basis.feature_count(1) as f64;
        max_se = max_se.max(fit_diag.residual_sd * (k / n_paths as f64).sqrt());
        // A conditional expectation of a nonnegative variable stays
        // nonnegative; clip the regression's excursions.
        for (p, v) in fitted.into_iter().enumerate() {
            out.set(i, p, v.max(0.0));
        }
    }
    Ok((out, max_se))
}

/// Pathwise admissibility floor F(H^{-1}(eta_t), C_t): the smallest value a
/// conditional expectation of the transformed terminal bound can take, and
/// hence a hard constraint for regression estimates of it. Estimates clipped
/// at this floor stay inside the admissible set of G.
pub fn membership_floor(env: &EnvelopeSpec, c_at: &[f64], eta: &Grid) -> Result<Grid> {
    if c_at.len() != eta.rows() {
        return Err(Error::Shape(format!(
            "C values: got {}, need one per node ({})",
            c_at.len(),
            eta.rows()
        )));
    }
    let mut floor = Grid::zeros(eta.rows(), eta.cols());
    for i in 0..eta.rows() {
        for p in 0..eta.cols() {
            let h_inv = env.h_inv(eta.at(i, p))?;
            floor.set(i, p, env.f(h_inv, c_at[i])?);
        }
    }
    Ok(floor)
}

/// Explicit transformed solution: x = G(x1, C, eta) with
/// z = dG/dx * z1 and dk = -dG/dc dC + 1/2 w |z1|^2 M dt, where
/// M = varphi(F^{-1}(x1, c), c) - varphi(G(x1, c, eta), c).
pub fn build_transformed_solution(
    env: &EnvelopeSpec,
    mesh: &TimeMesh,
    x1: &Grid,
    z1: &VecGrid,
    c_at: &[f64],
    eta: &Grid,
) -> Result<EnvelopePath> {
    let n_nodes = mesh.n_nodes();
    let n_paths = x1.cols();
    x1.require_shape(n_nodes, n_paths, "x1")?;
    eta.require_shape(n_nodes, n_paths, "eta")?;
    if z1.rows() != n_nodes || z1.cols() != n_paths {
        return Err(Error::Shape(format!(
            "z1 is {}x{}, expected {n_nodes}x{n_paths}",
            z1.rows(),
            z1.cols()
        )));
    }
    if c_at.len() != n_nodes {
        return Err(Error::Shape(format!(
            "C values: got {}, need one per node ({n_nodes})",
            c_at.len()
        )));
    }

    let d = z1.dim();
    let mut values = Grid::zeros(n_nodes, n_paths);
    let mut z_values = VecGrid::zeros(n_nodes, n_paths, d);
    let mut k_increments = Grid::zeros(mesh.n_steps(), n_paths);
    let mut min_k = f64::INFINITY;

    for i in 0..n_nodes {
        let c = c_at[i];
        for p in 0..n_paths {
            let point = TransformPoint::new(x1.at(i, p), c, eta.at(i, p));
            let u = env.f_inv(point.x, point.c)?;
            let g_val = env.g(point).map_err(|e| match e {
                Error::NotAdmissible { deficit, .. } => Error::NotAdmissible {
                    deficit,
                    context: format!("node {i}, path {p}"),
                },
                other => other,
            })?;
            values.set(i, p, g_val);

            let phi_g = env.phi().eval(g_val);
            let phi_u = env.phi().eval(u);
            let decay = (-c * env.psi_primitive(u)?).exp();
            let z_factor = phi_g * decay / phi_u;
            for k in 0..d {
                z_values.at_mut(i, p)[k] = z_factor * z1.at(i, p)[k];
            }

            if i < mesh.n_steps() {
                let dc = c_at[i + 1] - c_at[i];
                // The dG/dc leg carries a quadrature; skip it when the C
                // increment vanishes (constant C is the common case).
                let dc_term = if dc != 0.0 {
                    -env.g_gradient(point)?.d_c * dc
                } else {
                    0.0
                };
                let z1_norm2: f64 = z1.at(i, p).iter().map(|v| v * v).sum();
                let m = env.varphi(u, c) - env.varphi(g_val, c);
                let density = 0.5 * phi_g * decay * decay / (phi_u * phi_u) * z1_norm2 * m;
                let dk = dc_term + density * mesh.dt(i);
                k_increments.set(i, p, dk);
                min_k = min_k.min(dk);
            }
        }
    }

    Ok(EnvelopePath {
        values,
        z_values,
        k_increments,
        all_k_nonnegative: min_k >= -tol::K_MEASURE_TOL,
    })
}
