//! Independent reference solutions: the exponential-transform closed form
//! for the pure quadratic driver, the deterministic envelope solution, exact
//! dynamic programming on the binomial tree, and the sup-over-controls
//! estimators for the transformed terminal bound.

use crate::error::{Error, Result};
use crate::grid::{Grid, VecGrid};
use crate::mesh::TimeMesh;
use crate::paths::{gamma_weights, PathEnsemble, PiProcess};
use crate::problem::{Problem, TerminalSpec};
use crate::transform::EnvelopeSpec;
use crate::tree::BinomialTree;

/// Result of an oracle computation. Path-shaped oracles fill `y` (and
/// possibly `z`); deterministic ones fill `y_nodes`; the tree oracle reports
/// the root value together with the expected reflection masses.
#[derive(Clone, Debug)]
pub struct OracleResult {
    pub y0: f64,
    pub y: Option<Grid>,
    pub z: Option<VecGrid>,
    pub y_nodes: Option<Vec<f64>>,
    pub k_plus_total: Option<f64>,
    pub k_minus_total: Option<f64>,
    pub provenance: String,
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * core::f64::consts::PI).sqrt()
}

/// Closed-form solution of Y_t = (1/gamma) ln E[e^{gamma xi} | F_t] for the
/// driver gamma/2 |z|^2 and Gaussian-amenable terminal kinds.
pub fn cole_hopf_exact(
    gamma: f64,
    terminal: &TerminalSpec,
    mesh: &TimeMesh,
    ens: &PathEnsemble,
) -> Result<OracleResult> {
    if !(gamma > 0.0) {
        return Err(Error::Config(format!(
            "exponential-transform oracle needs gamma > 0, got {gamma}"
        )));
    }
    let n_nodes = mesh.n_nodes();
    let n_paths = ens.n_paths();
    let t_max = mesh.horizon();
    let mut y = Grid::zeros(n_nodes, n_paths);
    let mut z = VecGrid::zeros(n_nodes, n_paths, ens.d());

    match *terminal {
        TerminalSpec::Constant { value } => {
            for i in 0..n_nodes {
                y.row_mut(i).fill(value);
            }
        }
        TerminalSpec::Brownian => {
            for i in 0..n_nodes {
                let tail = 0.5 * gamma * (t_max - mesh.t(i));
                for p in 0..n_paths {
                    y.set(i, p, ens.w(i, p)[0] + tail);
                    z.at_mut(i, p)[0] = 1.0;
                }
            }
        }
        TerminalSpec::AffineBrownian { slope, intercept } => {
            for i in 0..n_nodes {
                let tail = 0.5 * gamma * slope * slope * (t_max - mesh.t(i));
                for p in 0..n_paths {
                    y.set(i, p, slope * ens.w(i, p)[0] + intercept + tail);
                    z.at_mut(i, p)[0] = slope;
                }
            }
        }
        TerminalSpec::StepOfBrownian {
            threshold,
            low,
            high,
        } => {
            let el = (gamma * low).exp();
            let eh = (gamma * high).exp();
            for i in 0..n_nodes {
                let tau = t_max - mesh.t(i);
                for p in 0..n_paths {
                    let b = ens.w(i, p)[0];
                    if tau <= 0.0 {
                        y.set(i, p, terminal.eval(b));
                    } else {
                        let s = tau.sqrt();
                        let u = (threshold - b) / s;
                        let m = el * normal_cdf(u) + eh * (1.0 - normal_cdf(u));
                        y.set(i, p, m.ln() / gamma);
                        z.at_mut(i, p)[0] = normal_pdf(u) / s * (eh - el) / (gamma * m);
                    }
                }
            }
        }
        TerminalSpec::AbsBrownian => {
            return Err(Error::Config(
                "terminal kind without computable conditional exponential moments".into(),
            ));
        }
    }

    Ok(OracleResult {
        y0: y.row(0).iter().sum::<f64>() / n_paths as f64,
        y: Some(y),
        z: Some(z),
        y_nodes: None,
        k_plus_total: None,
        k_minus_total: None,
        provenance: "exponential transform closed form".into(),
    })
}

/// Deterministic envelope solution x_t = H^{-1}(a - eta_t) on the mesh,
/// given the (deterministic) per-step A increments.
pub fn deterministic_ode_solution(
    env: &EnvelopeSpec,
    a: f64,
    mesh: &TimeMesh,
    a_increments: &[f64],
) -> Result<OracleResult> {
    let eta = crate::envelope::eta_deterministic(env, mesh, a_increments)?;
    if let crate::transform::MassBound::Finite(mass) = env.h_mass() {
        if !(a < mass) {
            return Err(Error::Range(format!(
                "budget a = {a} must stay below the total mass {mass:.6e} of 1/phi"
            )));
        }
    }
    let mut nodes = Vec::with_capacity(mesh.n_nodes());
    for (i, e) in eta.iter().enumerate() {
        if *e > a + 1e-12 {
            return Err(Error::Range(format!(
                "eta = {e:.6e} exceeds the budget a = {a} at node {i}"
            )));
        }
        nodes.push(env.h_inv((a - e).max(0.0))?);
    }
    Ok(OracleResult {
        y0: nodes[0],
        y: None,
        z: None,
        y_nodes: Some(nodes),
        k_plus_total: None,
        k_minus_total: None,
        provenance: "deterministic envelope solution".into(),
    })
}

/// Exact backward dynamic programming on the recombining tree for d = 1
/// problems: continuation 1/2 (up + down), z = (up - down) / (2 sqrt(dt)),
/// explicit driver step, then the two-sided clamp. No regression error.
pub fn tree_dp_reflected(
    problem: &Problem,
    tree: &BinomialTree,
    a_increments: &[f64],
) -> Result<OracleResult> {
    if tree.n_steps() > 20 {
        return Err(Error::Config(format!(
            "tree oracle is for small instances; {} steps exceed the cap of 20",
            tree.n_steps()
        )));
    }
    if a_increments.len() != tree.n_steps() {
        return Err(Error::Shape(format!(
            "A increments: got {}, tree has {} steps",
            a_increments.len(),
            tree.n_steps()
        )));
    }
    let n = tree.n_steps();
    let mut y: Vec<f64> = (0..=n)
        .map(|j| problem.terminal.eval(tree.state(n, j)))
        .collect();
    let mut kp: Vec<f64> = vec![0.0; n + 1];
    let mut km: Vec<f64> = vec![0.0; n + 1];

    for i in (0..n).rev() {
        let t = tree.t(i);
        let dt = tree.dt();
        let da = a_increments[i];
        let mut y_new = vec![0.0f64; i + 1];
        let mut kp_new = vec![0.0f64; i + 1];
        let mut km_new = vec![0.0f64; i + 1];
        for j in 0..=i {
            let down = y[j];
            let up = y[j + 1];
            let cont = 0.5 * (up + down);
            let zed = (up - down) / (2.0 * tree.sqrt_dt());
            let mut cand =
                cont + problem.f.eval(t, cont, &[zed]) * dt + problem.g.eval(t, cont) * da;
            let state = tree.state(i, j);
            let mut dkp = 0.0;
            let mut dkm = 0.0;
            if let Some(l) = &problem.lower {
                let lb = l.eval(t, state);
                if cand < lb {
                    dkp = lb - cand;
                    cand = lb;
                }
            }
            if let Some(u) = &problem.upper {
                let ub = u.eval(t, state);
                if cand > ub {
                    dkm = cand - ub;
                    cand = ub;
                }
            }
            y_new[j] = cand;
            kp_new[j] = dkp + 0.5 * (kp[j] + kp[j + 1]);
            km_new[j] = dkm + 0.5 * (km[j] + km[j + 1]);
        }
        y = y_new;
        kp = kp_new;
        km = km_new;
    }

    Ok(OracleResult {
        y0: y[0],
        y: None,
        z: None,
        y_nodes: None,
        k_plus_total: Some(kp[0]),
        k_minus_total: Some(km[0]),
        provenance: "binomial tree dynamic programming".into(),
    })
}

/// Exact conditional expectations E[lambda_bar | F_t] for the phi(x) = x,
/// psi = 1, R = 0 family with deterministic eta and C: with
/// kappa = C_T e^{eta_T},
/// lambda_bar = (e^{-C_T D} e^{kappa max(xi, D)} - 1) / C_T
/// and the Gaussian moments of e^{kappa max(|X|, D)} have Phi closed forms.
/// Supported terminal kinds: constant, Brownian, |Brownian|.
pub fn lambda_bar_conditional_exact(
    terminal: &TerminalSpec,
    domain_floor: f64,
    c_terminal: f64,
    eta_terminal: f64,
    mesh: &TimeMesh,
    ens: &PathEnsemble,
) -> Result<Grid> {
    if !(c_terminal > 0.0) {
        return Err(Error::Config(
            "exact conditional lambda_bar needs C_T > 0".into(),
        ));
    }
    let d0 = domain_floor;
    let kappa = c_terminal * eta_terminal.exp();
    let t_max = mesh.horizon();
    let n_paths = ens.n_paths();
    let mut out = Grid::zeros(mesh.n_nodes(), n_paths);

    // m(b, tau) = E[e^{kappa max(g(X), D)}] for X ~ N(b, tau).
    let moment = |b: f64, tau: f64| -> Result<f64> {
        if tau <= 0.0 {
            let xi = terminal.eval(b);
            return Ok((kappa * xi.max(d0)).exp());
        }
        let s = tau.sqrt();
        let half = 0.5 * kappa * kappa * tau;
        match terminal {
            TerminalSpec::Constant { value } => Ok((kappa * value.max(d0)).exp()),
            TerminalSpec::Brownian => Ok((kappa * d0).exp() * normal_cdf((d0 - b) / s)
                + (kappa * b + half).exp() * normal_cdf((b + kappa * tau - d0) / s)),
            TerminalSpec::AbsBrownian => {
                Ok((kappa * d0).exp()
                    * (normal_cdf((d0 - b) / s) - normal_cdf((-d0 - b) / s))
                    + (kappa * b + half).exp() * normal_cdf((b + kappa * tau - d0) / s)
                    + (-kappa * b + half).exp() * normal_cdf((-b + kappa * tau - d0) / s))
            }
            _ => Err(Error::Config(
                "terminal kind without closed-form exponential moments".into(),
            )),
        }
    };

    for i in 0..mesh.n_nodes() {
        let tau = t_max - mesh.t(i);
        for p in 0..n_paths {
            let m = moment(ens.w(i, p)[0], tau)?;
            out.set(
                i,
                p,
                (((-c_terminal * d0).exp() * m - 1.0) / c_terminal).max(0.0),
            );
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct MemberEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Monte Carlo lower bound for sup over controls of E[Gamma_{0,T} lb]: the
/// max of the sample means over a finite candidate family.
#[derive(Clone, Debug)]
pub struct SupGammaEstimate {
    pub best: f64,
    pub best_index: usize,
    pub members: Vec<MemberEstimate>,
}

pub fn estimate_sup_gamma(
    lambda_bar_terminal: &[f64],
    r_at: &[f64],
    pi_family: &[PiProcess],
    mesh: &TimeMesh,
    ens: &PathEnsemble,
) -> Result<SupGammaEstimate> {
    if pi_family.is_empty() {
        return Err(Error::Config("candidate control family is empty".into()));
    }
    if lambda_bar_terminal.len() != ens.n_paths() {
        return Err(Error::Shape(format!(
            "lambda_bar has {} entries, ensemble has {} paths",
            lambda_bar_terminal.len(),
            ens.n_paths()
        )));
    }
    let n = ens.n_paths() as f64;
    let mut members = Vec::with_capacity(pi_family.len());
    for pi in pi_family {
        let gammas = gamma_weights(ens, r_at, pi, 0, mesh.n_steps())?;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for (g, lb) in gammas.iter().zip(lambda_bar_terminal) {
            let v = g * lb;
            sum += v;
            sum2 += v * v;
        }
        let mean = sum / n;
        let var = (sum2 / n - mean * mean).max(0.0);
        members.push(MemberEstimate {
            mean,
            std_error: (var / n).sqrt(),
        });
    }
    let best_index = members
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.mean.total_cmp(&b.1.mean))
        .map(|(i, _)| i)
        .unwrap();
    Ok(SupGammaEstimate {
        best: members[best_index].mean,
        best_index,
        members,
    })
}

/// The default candidate family: the zero control, the signed unit
/// directions, and optionally the z-feedback direction z/|z| extracted from
/// a pilot solve of the auxiliary equation.
pub fn default_pi_family(d: usize, pilot_z: Option<&VecGrid>) -> Vec<PiProcess> {
    let mut family = vec![PiProcess::Zero];
    for k in 0..d {
        for sign in [1.0, -1.0] {
            let mut dir = vec![0.0; d];
            dir[k] = sign;
            family.push(PiProcess::ConstantDir(dir));
        }
    }
    if let Some(z) = pilot_z {
        // Z panels are node-indexed; the control field is step-indexed, so
        // drop the terminal row.
        let mut field = VecGrid::zeros(z.rows() - 1, z.cols(), z.dim());
        for i in 0..field.rows() {
            for p in 0..field.cols() {
                let zp = z.at(i, p);
                let n = crate::grid::norm(zp);
                if n > 1e-12 {
                    for (k, v) in zp.iter().enumerate() {
                        field.at_mut(i, p)[k] = v / n;
                    }
                }
            }
        }
        family.push(PiProcess::PerPath(field));
    }
    family
}

/// Monte Carlo Holder-type majorant with fixed exponent q and truncation cap:
/// E[ exp(q/(2(q-1)) int R^2 ds) lb^q 1{lb + int R^2 <= cap} ]^{1/q}.
pub fn delta_bound(
    lambda_bar_terminal: &[f64],
    r_at: &[f64],
    q: f64,
    n_cap: f64,
    mesh: &TimeMesh,
    ens: &PathEnsemble,
) -> Result<f64> {
    if !(q > 1.0) {
        return Err(Error::Config(format!("Holder exponent must exceed 1, got {q}")));
    }
    if lambda_bar_terminal.len() != ens.n_paths() {
        return Err(Error::Shape(format!(
            "lambda_bar has {} entries, ensemble has {} paths",
            lambda_bar_terminal.len(),
            ens.n_paths()
        )));
    }
    if r_at.len() < mesh.n_steps() {
        return Err(Error::Shape(format!(
            "R has {} nodes, need at least {}",
            r_at.len(),
            mesh.n_steps()
        )));
    }
    let r2_int: f64 = (0..mesh.n_steps())
        .map(|i| r_at[i] * r_at[i] * mesh.dt(i))
        .sum();
    let weight = (q / (2.0 * (q - 1.0)) * r2_int).exp();
    let mean = lambda_bar_terminal
        .iter()
        .map(|&lb| {
            if lb + r2_int <= n_cap {
                weight * lb.powf(q)
            } else {
                0.0
            }
        })
        .sum::<f64>()
        / ens.n_paths() as f64;
    Ok(mean.powf(1.0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{simulate_paths, ASpec};
    use crate::problem::{BarrierSpec, DriverF, DriverG};
    use crate::process::ProcessSpec;
    use crate::transform::{PhiFamily, PsiFamily};
    use crate::tree::binomial_tree;

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
        assert!((normal_cdf(-5.0) - 2.866515719235352e-7).abs() < 1e-16);
    }

    #[test]
    fn cole_hopf_brownian_closed_form() {
        let mesh = TimeMesh::uniform(1.0, 4).unwrap();
        let ens = simulate_paths(&mesh, 16, 1, 5, ASpec::Time).unwrap();
        let res = cole_hopf_exact(1.0, &TerminalSpec::Brownian, &mesh, &ens).unwrap();
        let y = res.y.as_ref().unwrap();
        // Y_0 = B_0 + T/2 = 0.5 exactly.
        for p in 0..16 {
            assert_eq!(y.at(0, p), 0.5);
        }
        // Discrete driver identity is exact for this terminal:
        // Y_i = Y_{i+1} + 1/2 Z^2 dt - Z dB with Z = 1.
        for i in 0..4 {
            for p in 0..16 {
                let rhs = y.at(i + 1, p) + 0.5 * mesh.dt(i) - ens.dw(i, p)[0];
                assert!((y.at(i, p) - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cole_hopf_small_gamma_approaches_martingale() {
        let mesh = TimeMesh::uniform(1.0, 4).unwrap();
        let ens = simulate_paths(&mesh, 8, 1, 5, ASpec::Time).unwrap();
        let res = cole_hopf_exact(1e-8, &TerminalSpec::Brownian, &mesh, &ens).unwrap();
        let y = res.y.unwrap();
        for i in 0..=4 {
            for p in 0..8 {
                assert!((y.at(i, p) - ens.w(i, p)[0]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn cole_hopf_step_terminal_matches_nested_simulation() {
        let mesh = TimeMesh::uniform(1.0, 2).unwrap();
        let ens = simulate_paths(&mesh, 4, 1, 9, ASpec::Time).unwrap();
        let term = TerminalSpec::StepOfBrownian {
            threshold: 0.2,
            low: -0.5,
            high: 1.0,
        };
        let res = cole_hopf_exact(2.0, &term, &mesh, &ens).unwrap();
        let y = res.y.unwrap();
        // Nested Monte Carlo check of ln E[e^{gamma xi} | B_t] / gamma at
        // the middle node of path 0.
        let b = ens.w(1, 0)[0];
        let tau: f64 = 0.5;
        let m = 400_000;
        let mut acc = 0.0;
        for k in 0..m {
            let zdraw = crate::rng::standard_normal(777, k as u64, 0, 0);
            let bt = b + tau.sqrt() * zdraw;
            acc += (2.0 * term.eval(bt)).exp();
        }
        let nested = (acc / m as f64).ln() / 2.0;
        assert!(
            (y.at(1, 0) - nested).abs() < 0.01,
            "closed form {} vs nested {nested}",
            y.at(1, 0)
        );
        // Terminal row equals the terminal functional exactly.
        for p in 0..4 {
            assert_eq!(y.at(2, p), term.eval(ens.w(2, p)[0]));
        }
    }

    #[test]
    fn cole_hopf_rejects_abs_terminal() {
        let mesh = TimeMesh::uniform(1.0, 2).unwrap();
        let ens = simulate_paths(&mesh, 2, 1, 1, ASpec::Time).unwrap();
        assert!(cole_hopf_exact(1.0, &TerminalSpec::AbsBrownian, &mesh, &ens).is_err());
    }

    #[test]
    fn deterministic_ode_exponential_case() {
        let env = EnvelopeSpec::new(1.0, PhiFamily::Linear, PsiFamily::One)
            .unwrap()
            .with_alpha(ProcessSpec::constant(1.0))
            .unwrap();
        let mesh = TimeMesh::uniform(1.0, 8).unwrap();
        let a_inc = ASpec::Time.deterministic_increments(&mesh).unwrap();
        let res = deterministic_ode_solution(&env, 1.0, &mesh, &a_inc).unwrap();
        let nodes = res.y_nodes.unwrap();
        for (i, v) in nodes.iter().enumerate() {
            let expect = (1.0 - mesh.t(i)).exp();
            assert!((v - expect).abs() < 1e-12, "node {i}: {v} vs {expect}");
        }
        // Backward integral identity with exact quadrature of the
        // right-hand side: x_t = x_T + int_t^T phi(x_s) d eta_s.
        let quad = crate::quad::QuadConfig::default();
        let x_of_t = |t: f64| (1.0 - t).exp();
        for i in 0..mesh.n_nodes() {
            let integral =
                crate::quad::integrate(|s| x_of_t(s), mesh.t(i), 1.0, &quad).unwrap();
            let rhs = x_of_t(1.0) + integral;
            assert!((nodes[i] - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn deterministic_ode_boundary_budget() {
        // eta ends exactly at the budget: x_T = D.
        let env = EnvelopeSpec::new(1.0, PhiFamily::Linear, PsiFamily::One)
            .unwrap()
            .with_alpha(ProcessSpec::constant(0.5))
            .unwrap();
        let mesh = TimeMesh::uniform(1.0, 4).unwrap();
        let a_inc = ASpec::Time.deterministic_increments(&mesh).unwrap();
        let res = deterministic_ode_solution(&env, 0.5, &mesh, &a_inc).unwrap();
        let nodes = res.y_nodes.unwrap();
        assert!((nodes[4] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_ode_exp_family_cross_check() {
        // phi = e^r, D = 0, a = 0.5, eta_t = 0.5 t: closed form
        // x_t = -ln(e^{-D} - a + eta_t) = -ln(0.5 + 0.5 t).
        let env = EnvelopeSpec::new(0.0, PhiFamily::Exponential, PsiFamily::One)
            .unwrap()
            .with_alpha(ProcessSpec::constant(0.5))
            .unwrap();
        let mesh = TimeMesh::uniform(1.0, 5).unwrap();
        let a_inc = ASpec::Time.deterministic_increments(&mesh).unwrap();
        let res = deterministic_ode_solution(&env, 0.5, &mesh, &a_inc).unwrap();
        let nodes = res.y_nodes.unwrap();
        for (i, v) in nodes.iter().enumerate() {
            let expect = -(0.5 + 0.5 * mesh.t(i)).ln();
            assert!((v - expect).abs() < 1e-9, "node {i}: {v} vs {expect}");
        }
    }

    #[test]
    fn deterministic_ode_matches_bounded_envelope() {
        // The two routes to the same deterministic bound must agree.
        let env = EnvelopeSpec::new(1.0, PhiFamily::Linear, PsiFamily::One)
            .unwrap()
            .with_alpha(ProcessSpec::constant(0.6))
            .unwrap()
            .with_beta(ProcessSpec::constant(0.2))
            .unwrap();
        let mesh = TimeMesh::uniform(1.0, 12).unwrap();
        let ens = simulate_paths(&mesh, 3, 1, 0, ASpec::Time).unwrap();
        let a = 0.9;
        let a_inc = ASpec::Time.deterministic_increments(&mesh).unwrap();
        let ode = deterministic_ode_solution(&env, a, &mesh, &a_inc).unwrap();
        let eta = crate::envelope::eta_on_mesh(&env, &mesh, &ens);
        let grid = crate::envelope::bounded_envelope(&env, a, &eta).unwrap();
        let nodes = ode.y_nodes.unwrap();
        for i in 0..mesh.n_nodes() {
            for p in 0..3 {
                assert!(
                    (grid.at(i, p) - nodes[i]).abs() <= 1e-9 * (1.0 + nodes[i].abs()),
                    "node {i}: {} vs {}",
                    grid.at(i, p),
                    nodes[i]
                );
            }
        }
    }

    #[test]
    fn tree_dp_unreflected_brownian() {
        let tree = binomial_tree(1.0, 8).unwrap();
        let problem = Problem::unreflected(DriverF::Zero, DriverG::Zero, TerminalSpec::Brownian);
        let a_inc = vec![tree.dt(); 8];
        let res = tree_dp_reflected(&problem, &tree, &a_inc).unwrap();
        assert!(res.y0.abs() < 1e-14);
        assert_eq!(res.k_plus_total, Some(0.0));
    }

    #[test]
    fn tree_dp_forced_reflection() {
        let tree = binomial_tree(1.0, 10).unwrap();
        let problem = Problem::unreflected(
            DriverF::Constant { value: -1.0 },
            DriverG::Zero,
            TerminalSpec::Constant { value: 0.0 },
        )
        .with_lower(BarrierSpec::Constant { value: 0.0 });
        let a_inc = vec![tree.dt(); 10];
        let res = tree_dp_reflected(&problem, &tree, &a_inc).unwrap();
        assert!(res.y0.abs() < 1e-14);
        assert!((res.k_plus_total.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tree_dp_abs_terminal_exact_enumeration() {
        let tree = binomial_tree(1.0, 16).unwrap();
        let problem = Problem::unreflected(DriverF::Zero, DriverG::Zero, TerminalSpec::AbsBrownian);
        let a_inc = vec![tree.dt(); 16];
        let res = tree_dp_reflected(&problem, &tree, &a_inc).unwrap();
        // Exact enumeration over the terminal distribution of the walk.
        let w = tree.terminal_weights();
        let expect: f64 = w
            .iter()
            .zip(tree.level_states(16))
            .map(|(w, s)| w * s.abs())
            .sum();
        assert!((res.y0 - expect).abs() < 1e-13, "{} vs {expect}", res.y0);
    }

    #[test]
    fn tree_dp_rejects_deep_trees() {
        let tree = binomial_tree(1.0, 24).unwrap();
        let problem = Problem::unreflected(DriverF::Zero, DriverG::Zero, TerminalSpec::Brownian);
        assert!(tree_dp_reflected(&problem, &tree, &vec![tree.dt(); 24]).is_err());
    }

    #[test]
    fn exact_conditional_lambda_bar_matches_nested_simulation() {
        let mesh = TimeMesh::uniform(1.0, 4).unwrap();
        let ens = simulate_paths(&mesh, 8, 1, 21, ASpec::Time).unwrap();
        let (c_t, eta_t, d0) = (0.5, 0.3, 1.0);
        let exact =
            lambda_bar_conditional_exact(&TerminalSpec::AbsBrownian, d0, c_t, eta_t, &mesh, &ens)
                .unwrap();
        // Nested Monte Carlo at the middle node of two paths.
        let kappa = c_t * (eta_t as f64).exp();
        for p in [0usize, 3] {
            let b = ens.w(2, p)[0];
            let tau: f64 = 0.5;
            let m = 400_000;
            let mut acc = 0.0;
            let mut acc2 = 0.0;
            for k in 0..m {
                let z = crate::rng::standard_normal(999, k as u64, 0, 0);
                let xi = (b + tau.sqrt() * z).abs();
                let v = (((-c_t * d0).exp() * (kappa * xi.max(d0)).exp()) - 1.0) / c_t;
                acc += v;
                acc2 += v * v;
            }
            let mean = acc / m as f64;
            let se = ((acc2 / m as f64 - mean * mean) / m as f64).sqrt();
            assert!(
                (exact.at(2, p) - mean).abs() <= 4.0 * se + 1e-6,
                "path {p}: exact {} vs nested {mean} (se {se})",
                exact.at(2, p)
            );
        }
        // Terminal row reproduces lambda_bar itself.
        let env = EnvelopeSpec::new(d0, PhiFamily::Linear, PsiFamily::One).unwrap();
        let last = mesh.n_nodes() - 1;
        for p in 0..8 {
            let lam = ens.w(last, p)[0].abs().max(d0);
            let direct = env.lambda_bar(lam, eta_t, c_t).unwrap();
            assert!(
                (exact.at(last, p) - direct).abs() <= 1e-10 * (1.0 + direct),
                "path {p}: {} vs {direct}",
                exact.at(last, p)
            );
        }
    }

    #[test]
    fn sup_gamma_zero_r_reduces_to_mean() {
        let mesh = TimeMesh::uniform(1.0, 8).unwrap();
        let ens = simulate_paths(&mesh, 4096, 1, 17, ASpec::Time).unwrap();
        let lb: Vec<f64> = (0..ens.n_paths())
            .map(|p| ens.w(8, p)[0].exp())
            .collect();
        let mean = lb.iter().sum::<f64>() / lb.len() as f64;
        let r0 = vec![0.0; mesh.n_nodes()];
        let family = default_pi_family(1, None);
        let est = estimate_sup_gamma(&lb, &r0, &family, &mesh, &ens).unwrap();
        assert!((est.best - mean).abs() < 1e-12);
        for m in &est.members {
            assert!((m.mean - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn sup_gamma_exponential_terminal_prefers_positive_direction() {
        // R = 1, lb = e^{B_T}: the best constant control is +e1 and the
        // weighted mean is e^{3T/2}.
        let mesh = TimeMesh::uniform(1.0, 16).unwrap();
        let ens = simulate_paths(&mesh, 200_000, 1, 33, ASpec::Time).unwrap();
        let last = mesh.n_nodes() - 1;
        let lb: Vec<f64> = (0..ens.n_paths()).map(|p| ens.w(last, p)[0].exp()).collect();
        let r = vec![1.0; mesh.n_nodes()];
        let family = default_pi_family(1, None);
        let est = estimate_sup_gamma(&lb, &r, &family, &mesh, &ens).unwrap();
        // Family order: zero, +e1, -e1.
        assert_eq!(est.best_index, 1, "positive direction should win");
        let expect = (1.5f64).exp();
        assert!(
            (est.best - expect).abs() < 3.0 * est.members[1].std_error + 0.05,
            "sup estimate {} vs {expect}",
            est.best
        );
    }

    #[test]
    fn sup_gamma_rejects_empty_family() {
        let mesh = TimeMesh::uniform(1.0, 2).unwrap();
        let ens = simulate_paths(&mesh, 4, 1, 1, ASpec::Time).unwrap();
        assert!(estimate_sup_gamma(&[1.0; 4], &[0.0; 3], &[], &mesh, &ens).is_err());
    }

    #[test]
    fn delta_bound_constant_cases() {
        let mesh = TimeMesh::uniform(1.0, 4).unwrap();
        let ens = simulate_paths(&mesh, 64, 1, 2, ASpec::Time).unwrap();
        // R = 0: the bound is lambda for a constant lambda, any q.
        let lb = vec![3.0; 64];
        let r0 = vec![0.0; 5];
        for q in [1.5, 2.0, 4.0] {
            let v = delta_bound(&lb, &r0, q, 1e9, &mesh, &ens).unwrap();
            assert!((v - 3.0).abs() < 1e-12, "q = {q}: {v}");
        }
        // lambda = 0 gives 0.
        let v = delta_bound(&vec![0.0; 64], &r0, 2.0, 1e9, &mesh, &ens).unwrap();
        assert_eq!(v, 0.0);
        // R = 1, lambda = 1, q = 2, T = 1: (e^{int R^2})^{1/2} = e^{1/2}.
        let r1 = vec![1.0; 5];
        let v = delta_bound(&vec![1.0; 64], &r1, 2.0, 1e9, &mesh, &ens).unwrap();
        assert!((v - 0.5f64.exp()).abs() < 1e-12, "got {v}");
        // q <= 1 rejected.
        assert!(delta_bound(&lb, &r0, 1.0, 1e9, &mesh, &ens).is_err());
    }
}
