//! Cross-validation of the backward solvers against the independent
//! oracles: the exponential-transform closed form, the binomial tree, and
//! the sup-over-controls representation of the auxiliary equation.

use grbsde::{
    binomial_tree, cole_hopf_exact, default_pi_family, delta_bound, estimate_sup_gamma,
    materialize, normal_cdf, simulate_paths, solve_gbsde, solve_grbsde_one_barrier,
    tree_dp_reflected, ASpec, BarrierSpec, Basis, DriverF, DriverG, MaterializedProblem,
    PiProcess, Problem, ProcessSpec, RegressionEstimator, SolverConfig, TerminalSpec, TimeMesh,
};

fn estimator(degree: usize) -> RegressionEstimator {
    RegressionEstimator {
        basis: Basis::PolynomialWithAux { degree },
        ridge: 1e-8,
    }
}

#[test]
fn quadratic_driver_matches_exponential_transform() {
    let mesh = TimeMesh::uniform(1.0, 50).unwrap();
    let ens = simulate_paths(&mesh, 20_000, 1, 4242, ASpec::Time).unwrap();
    let problem = Problem::unreflected(
        DriverF::QuadraticZ {
            gamma: 1.0,
            offset: 0.0,
        },
        DriverG::Zero,
        TerminalSpec::Brownian,
    );
    let mat = materialize(&problem, &mesh, &ens).unwrap();
    let est = RegressionEstimator {
        basis: Basis::Polynomial { degree: 2 },
        ridge: 1e-8,
    };
    let panel = solve_gbsde(&mat, &mesh, &ens, &est, &SolverConfig::default()).unwrap();
    let oracle = cole_hopf_exact(1.0, &TerminalSpec::Brownian, &mesh, &ens).unwrap();
    let y_ref = oracle.y.unwrap();

    let n = ens.n_paths() as f64;
    for i in 0..mesh.n_nodes() {
        let mean_err: f64 = (0..ens.n_paths())
            .map(|p| (panel.y.at(i, p) - y_ref.at(i, p)).abs())
            .sum::<f64>()
            / n;
        assert!(mean_err <= 0.05, "node {i}: mean |Y - oracle| = {mean_err}");
    }
    let mut z_sum = 0.0;
    for i in 0..mesh.n_steps() {
        let z_mean: f64 = (0..ens.n_paths())
            .map(|p| panel.z.at(i, p)[0])
            .sum::<f64>()
            / n;
        z_sum += z_mean;
        assert!((z_mean - 1.0).abs() <= 0.05, "node {i}: Z mean = {z_mean}");
    }
    let z_panel_mean = z_sum / mesh.n_steps() as f64;
    assert!(
        (z_panel_mean - 1.0).abs() <= 0.05,
        "panel Z mean = {z_panel_mean}"
    );
}

/// The solution bound for the pure quadratic driver:
/// |Y_t| <= ln(1 + C_t E(lambda_bar | F_t)) / C_t with C_t = gamma and
/// lambda_bar = (e^{gamma |xi|} - 1)/gamma. Checked pathwise with the exact
/// Gaussian conditional expectation and at t = 0 with the plain Monte Carlo
/// mean.
#[test]
fn exponential_transform_respects_envelope_bound() {
    let gamma = 1.0;
    let t_max = 1.0;
    let mesh = TimeMesh::uniform(t_max, 20).unwrap();
    let ens = simulate_paths(&mesh, 5_000, 1, 777, ASpec::Time).unwrap();
    let oracle = cole_hopf_exact(gamma, &TerminalSpec::Brownian, &mesh, &ens).unwrap();
    let y = oracle.y.unwrap();

    // E[e^{g |B_T|} | B_t = b] in closed form.
    let cond_exp_abs = |b: f64, tau: f64| -> f64 {
        if tau <= 0.0 {
            (gamma * b.abs()).exp()
        } else {
            let s = tau.sqrt();
            let half = 0.5 * gamma * gamma * tau;
            (gamma * b + half).exp() * normal_cdf(b / s + gamma * s)
                + (-gamma * b + half).exp() * normal_cdf(-b / s + gamma * s)
        }
    };

    for i in 0..mesh.n_nodes() {
        let tau = t_max - mesh.t(i);
        for p in 0..ens.n_paths() {
            let b = ens.w(i, p)[0];
            let lam_bar_cond = (cond_exp_abs(b, tau) - 1.0) / gamma;
            let bound = (1.0 + gamma * lam_bar_cond).ln() / gamma;
            assert!(
                y.at(i, p).abs() <= bound + 1e-12,
                "bound broken at node {i}, path {p}: |Y| = {} vs {bound}",
                y.at(i, p).abs()
            );
        }
    }

    // At t = 0 the conditional expectation is the plain mean.
    let last = mesh.n_nodes() - 1;
    let lam_bar: Vec<f64> = (0..ens.n_paths())
        .map(|p| ((gamma * ens.w(last, p)[0].abs()).exp() - 1.0) / gamma)
        .collect();
    let mean = lam_bar.iter().sum::<f64>() / lam_bar.len() as f64;
    let var = lam_bar
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / lam_bar.len() as f64;
    let se = (var / lam_bar.len() as f64).sqrt();
    let slack = 3.0 * se / (1.0 + gamma * mean);
    let bound0 = (1.0 + gamma * mean).ln() / gamma + slack;
    assert!(
        y.at(0, 0).abs() <= bound0,
        "t = 0 bound: |Y0| = {} vs {bound0}",
        y.at(0, 0).abs()
    );
}

#[test]
fn one_barrier_solver_agrees_with_tree() {
    let t_max = 1.0;
    let tree_steps = 16;
    let tree = binomial_tree(t_max, tree_steps).unwrap();
    let a_inc = vec![tree.dt(); tree_steps];

    let scenarios: Vec<(&str, Problem)> = vec![
        (
            "abs terminal, abs barrier",
            Problem::unreflected(DriverF::Zero, DriverG::Zero, TerminalSpec::AbsBrownian)
                .with_lower(BarrierSpec::AbsBrownianPlus { offset: -1.0 }),
        ),
        (
            "forced drift reflection",
            Problem::unreflected(
                DriverF::Constant { value: -1.0 },
                DriverG::Zero,
                TerminalSpec::Constant { value: 0.0 },
            )
            .with_lower(BarrierSpec::Constant { value: 0.0 }),
        ),
        (
            "step terminal, constant floor, negative drift",
            Problem::unreflected(
                DriverF::Constant { value: -1.0 },
                DriverG::Zero,
                TerminalSpec::StepOfBrownian {
                    threshold: 0.0,
                    low: 0.6,
                    high: 1.5,
                },
            )
            .with_lower(BarrierSpec::Constant { value: 0.5 }),
        ),
    ];

    let mesh = TimeMesh::uniform(t_max, tree_steps).unwrap();
    let ens = simulate_paths(&mesh, 20_000, 1, 2027, ASpec::Time).unwrap();
    let est = estimator(3);
    let cfg = SolverConfig::default();

    for (name, problem) in &scenarios {
        let oracle = tree_dp_reflected(problem, &tree, &a_inc).unwrap();
        let mat = materialize(problem, &mesh, &ens).unwrap();
        let panel = solve_grbsde_one_barrier(&mat, &mesh, &ens, &est, &cfg).unwrap();
        let err = (panel.y0_mean() - oracle.y0).abs();
        assert!(
            err <= 0.02,
            "{name}: Y0 = {} vs tree {} (err {err})",
            panel.y0_mean(),
            oracle.y0
        );
    }
}

#[test]
fn tree_with_inactive_barriers_equals_unreflected_exactly() {
    let tree = binomial_tree(1.0, 12).unwrap();
    let a_inc = vec![tree.dt(); 12];
    let free = Problem::unreflected(
        DriverF::Constant { value: 0.25 },
        DriverG::Constant { value: -0.1 },
        TerminalSpec::Brownian,
    );
    let fenced = free
        .clone()
        .with_lower(BarrierSpec::Constant { value: -1e6 })
        .with_upper(BarrierSpec::Constant { value: 1e6 });
    let a = tree_dp_reflected(&free, &tree, &a_inc).unwrap();
    let b = tree_dp_reflected(&fenced, &tree, &a_inc).unwrap();
    assert_eq!(a.y0.to_bits(), b.y0.to_bits());
    assert_eq!(b.k_plus_total, Some(0.0));
    assert_eq!(b.k_minus_total, Some(0.0));
}

#[test]
fn ordered_drivers_give_ordered_panels() {
    let mesh = TimeMesh::uniform(1.0, 12).unwrap();
    let est = estimator(3);
    let cfg = SolverConfig::default();
    for seed in [1u64, 2, 3, 4, 5] {
        let ens = simulate_paths(&mesh, 8_192, 1, seed, ASpec::Time).unwrap();
        let hi = Problem::unreflected(
            DriverF::Constant { value: 0.0 },
            DriverG::Zero,
            TerminalSpec::Brownian,
        );
        let lo = Problem::unreflected(
            DriverF::Constant { value: -1.0 },
            DriverG::Zero,
            TerminalSpec::Brownian,
        );
        let mat_hi = materialize(&hi, &mesh, &ens).unwrap();
        let mat_lo = materialize(&lo, &mesh, &ens).unwrap();
        let p_hi = solve_gbsde(&mat_hi, &mesh, &ens, &est, &cfg).unwrap();
        let p_lo = solve_gbsde(&mat_lo, &mesh, &ens, &est, &cfg).unwrap();
        let rep = grbsde::compare_solutions(&p_lo, &p_hi, 1e-9).unwrap();
        assert_eq!(rep.violations, 0, "seed {seed}: max excess {}", rep.max_excess);
    }
}

/// Numeric solve of the auxiliary x1 equation (driver R |z|) against the
/// sup-over-controls Monte Carlo representation: the finite-family estimate
/// is a lower bound of the minimal solution's initial value.
#[test]
fn sup_gamma_lower_bounds_auxiliary_solution() {
    let mesh = TimeMesh::uniform(1.0, 25).unwrap();
    let n = 40_000usize;
    let ens = simulate_paths(&mesh, n, 1, 555, ASpec::Time).unwrap();
    let last = mesh.n_nodes() - 1;
    let r_level = 0.5;
    let lam_bar: Vec<f64> = (0..n).map(|p| ens.w(last, p)[0].exp()).collect();

    let mat = MaterializedProblem {
        f: DriverF::ScaledAbsZ {
            r: ProcessSpec::constant(r_level),
        },
        g: DriverG::Zero,
        terminal: lam_bar.clone(),
        lower: None,
        upper: None,
        lower_decomp: None,
        upper_decomp: None,
    };
    let est = estimator(3);
    let panel = solve_gbsde(&mat, &mesh, &ens, &est, &SolverConfig::default()).unwrap();
    let x_bar_0 = panel.y0_mean();

    let r_at = vec![r_level; mesh.n_nodes()];
    let family = default_pi_family(1, Some(&panel.z));
    let sup = estimate_sup_gamma(&lam_bar, &r_at, &family, &mesh, &ens).unwrap();

    // Exact value e^{(1 + r)^2/2 - r^2/2} = e^{0.625} for the optimal
    // constant control pi = +1.
    let exact = (0.5f64 * ((1.0 + r_level).powi(2) - r_level * r_level)).exp();
    assert!(
        (sup.best - exact).abs() <= 3.0 * sup.members[sup.best_index].std_error + 0.02,
        "sup estimate {} vs exact {exact}",
        sup.best
    );
    let se = sup.members[sup.best_index].std_error;
    assert!(
        sup.best <= x_bar_0 + 3.0 * se + 0.05,
        "lower bound {} should not exceed the solved x1_0 = {x_bar_0}",
        sup.best
    );

    // Holder majorant dominates the family estimate.
    let delta = delta_bound(&lam_bar, &r_at, 2.0, 1e6, &mesh, &ens).unwrap();
    assert!(
        delta >= sup.best - 3.0 * se,
        "delta bound {delta} below the sup estimate {}",
        sup.best
    );
}

/// A two-dimensional driver: xi = B^1_T makes the first Z component 1 and
/// the second 0, and the quadratic driver only sees the norm.
#[test]
fn two_dimensional_noise_solves_cleanly() {
    let mesh = TimeMesh::uniform(1.0, 16).unwrap();
    let ens = simulate_paths(&mesh, 10_000, 2, 71, ASpec::Time).unwrap();
    let problem = Problem::unreflected(
        DriverF::QuadraticZ {
            gamma: 1.0,
            offset: 0.0,
        },
        DriverG::Zero,
        TerminalSpec::Brownian,
    );
    let mat = materialize(&problem, &mesh, &ens).unwrap();
    let est = RegressionEstimator {
        basis: Basis::Polynomial { degree: 2 },
        ridge: 1e-8,
    };
    let panel = solve_gbsde(&mat, &mesh, &ens, &est, &SolverConfig::default()).unwrap();
    // Y_t = B^1_t + (T - t)/2 as in d = 1: the extra component is inert.
    let n = ens.n_paths() as f64;
    let mid = 8;
    let mean_err: f64 = (0..ens.n_paths())
        .map(|p| {
            (panel.y.at(mid, p) - (ens.w(mid, p)[0] + 0.5 * (1.0 - mesh.t(mid)))).abs()
        })
        .sum::<f64>()
        / n;
    assert!(mean_err < 0.03, "mean error {mean_err}");
    let (mut z1, mut z2) = (0.0, 0.0);
    for p in 0..ens.n_paths() {
        z1 += panel.z.at(mid, p)[0];
        z2 += panel.z.at(mid, p)[1];
    }
    assert!((z1 / n - 1.0).abs() < 0.05, "Z1 mean {}", z1 / n);
    assert!((z2 / n).abs() < 0.05, "Z2 mean {}", z2 / n);
}

/// End-to-end explicit construction: solve the auxiliary linear-in-|z|
/// equation for (x1, z1) by the scheme, clip it at the admissibility floor,
/// and push it through G. The compensator increments must come out
/// nonnegative (the positive-measure certificate) and the envelope must
/// recover the terminal bound.
#[test]
fn transformed_solution_from_scheme_auxiliary_solve() {
    use grbsde::{
        build_transformed_solution, eta_on_mesh, membership_floor, values_on_mesh, EnvelopeSpec,
        Grid, PhiFamily, PsiFamily,
    };

    let env = EnvelopeSpec::new(1.0, PhiFamily::Linear, PsiFamily::One)
        .unwrap()
        .with_alpha(ProcessSpec::constant(0.4))
        .unwrap()
        .with_c(ProcessSpec::constant(0.5))
        .unwrap()
        .with_r(ProcessSpec::constant(0.3))
        .unwrap();
    let mesh = TimeMesh::uniform(1.0, 16).unwrap();
    let n = 4_000usize;
    let ens = simulate_paths(&mesh, n, 1, 99, ASpec::Time).unwrap();
    let eta = eta_on_mesh(&env, &mesh, &ens);
    let last = mesh.n_nodes() - 1;
    let c_at = values_on_mesh(env.c_process(), &mesh);

    let lam_bar: Vec<f64> = (0..n)
        .map(|p| {
            let lam = ens.w(last, p)[0].abs().max(env.domain_floor());
            env.lambda_bar(lam, eta.at(last, p), c_at[last]).unwrap()
        })
        .collect();

    let mat = MaterializedProblem {
        f: DriverF::ScaledAbsZ {
            r: *env.r_process(),
        },
        g: DriverG::Zero,
        terminal: lam_bar,
        lower: None,
        upper: None,
        lower_decomp: None,
        upper_decomp: None,
    };
    let est = RegressionEstimator {
        basis: Basis::PiecewiseLinear { segments: 8 },
        ridge: 1e-8,
    };
    let panel = solve_gbsde(&mat, &mesh, &ens, &est, &SolverConfig::default()).unwrap();

    // Clip the scheme's x1 at the floor every conditional expectation of
    // the terminal bound respects, so G stays applicable at noisy tails.
    let floor = membership_floor(&env, &c_at, &eta).unwrap();
    let mut x1 = Grid::zeros(mesh.n_nodes(), n);
    for i in 0..mesh.n_nodes() {
        for p in 0..n {
            x1.set(i, p, panel.y.at(i, p).max(floor.at(i, p)));
        }
    }

    let path = build_transformed_solution(&env, &mesh, &x1, &panel.z, &c_at, &eta).unwrap();
    assert!(
        path.all_k_nonnegative,
        "compensator increments must pass the positive-measure certificate"
    );
    let d0 = env.domain_floor();
    for i in 0..mesh.n_nodes() {
        for p in 0..n {
            assert!(path.values.at(i, p) >= d0 - 1e-12);
        }
    }
    // At the terminal node the construction inverts lambda_bar exactly.
    for p in (0..n).step_by(101) {
        let lam = ens.w(last, p)[0].abs().max(d0);
        assert!(
            (path.values.at(last, p) - lam).abs() <= 1e-8 * (1.0 + lam),
            "terminal recovery: {} vs {lam}",
            path.values.at(last, p)
        );
    }
}

#[test]
fn feedback_candidate_tracks_best_constant_direction() {
    // For lb = e^{B_T} the optimizer is the constant +e1; the z-feedback
    // field recovered from a pilot solve should essentially match it.
    let mesh = TimeMesh::uniform(1.0, 16).unwrap();
    let n = 30_000usize;
    let ens = simulate_paths(&mesh, n, 1, 808, ASpec::Time).unwrap();
    let last = mesh.n_nodes() - 1;
    let lam_bar: Vec<f64> = (0..n).map(|p| ens.w(last, p)[0].exp()).collect();
    let mat = MaterializedProblem {
        f: DriverF::ScaledAbsZ {
            r: ProcessSpec::constant(1.0),
        },
        g: DriverG::Zero,
        terminal: lam_bar.clone(),
        lower: None,
        upper: None,
        lower_decomp: None,
        upper_decomp: None,
    };
    let panel = solve_gbsde(
        &mat,
        &mesh,
        &ens,
        &estimator(3),
        &SolverConfig::default(),
    )
    .unwrap();
    let r_at = vec![1.0; mesh.n_nodes()];
    let family = default_pi_family(1, Some(&panel.z));
    let sup = estimate_sup_gamma(&lam_bar, &r_at, &family, &mesh, &ens).unwrap();
    // Family layout: [zero, +e1, -e1, feedback].
    let plus = &sup.members[1];
    let feedback = &sup.members[3];
    assert!(
        (feedback.mean - plus.mean).abs() <= 3.0 * (plus.std_error + feedback.std_error) + 0.05,
        "feedback {} vs +e1 {}",
        feedback.mean,
        plus.mean
    );
    matches!(family[3], PiProcess::PerPath(_));
}
