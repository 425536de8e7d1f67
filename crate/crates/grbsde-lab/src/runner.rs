//! Scenario execution: builds the mesh and ensemble, runs the envelope
//! pipeline, the requested solver, the oracle and the weighted-sup stage,
//! then evaluates the configured checks.

use std::sync::Arc;
use std::time::Instant;

use grbsde::{
    binomial_tree, check_dk_bounds, cole_hopf_exact, conditional_lambda_bar, default_pi_family,
    delta_bound, deterministic_ode_solution, estimate_sup_gamma, eta_deterministic, eta_on_mesh,
    gamma_weights, materialize, membership_floor, simulate_paths, solve_gbsde,
    solve_grbsde_one_barrier, solve_grbsde_two_barriers, solve_penalized, unbounded_envelope,
    values_on_mesh, DriverF, DriverG, EnvelopeSpec, Error, Grid, MaterializedProblem,
    OracleResult, PathEnsemble, PiProcess, Problem, Result, SolutionPanel, SolverConfig,
    SupGammaEstimate, TerminalSpec, TimeMesh,
};

use crate::scenario::{
    CheckConfig, CheckKind, LambdaBarEstimator, OracleConfig, Scenario, SolverKind,
    TerminalConfig,
};

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug)]
pub struct GammaArtifacts {
    pub sup: SupGammaEstimate,
    pub delta: f64,
    pub x0: f64,
    pub martingale_mean: f64,
    pub martingale_se: f64,
}

/// Everything a scenario run produces, kept for check evaluation and
/// report/CSV emission.
pub struct RunArtifacts {
    pub mesh: TimeMesh,
    pub seed: u64,
    pub panel: Option<SolutionPanel>,
    /// Two-barrier solve with the envelope injected as the upper barrier,
    /// produced alongside a one-barrier main solve for sandwich scenarios.
    pub capped_panel: Option<SolutionPanel>,
    pub envelope_x: Option<Grid>,
    pub lambda_se: f64,
    pub oracle: Option<OracleResult>,
    pub gamma: Option<GammaArtifacts>,
    pub lower: Option<Grid>,
    pub checks: Vec<CheckOutcome>,
    pub runtime_s: f64,
    pub d: usize,
}

impl RunArtifacts {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check_name(kind: CheckKind) -> &'static str {
    match kind {
        CheckKind::YVsOracleMeanAbsMax => "y_vs_oracle_mean_abs_max",
        CheckKind::Y0VsOracleAbs => "y0_vs_oracle_abs",
        CheckKind::ZMeanVsOracleMax => "z_mean_vs_oracle_max",
        CheckKind::Y0VsReferenceAbs => "y0_vs_reference_abs",
        CheckKind::SkorokhodResidualScaledMax => "skorokhod_residual_scaled_max",
        CheckKind::SingularityMax => "singularity_max",
        CheckKind::SandwichViolationCount => "sandwich_violation_count",
        CheckKind::KMinusTotalMean => "k_minus_total_mean",
        CheckKind::KPlusBoundExcessMax => "k_plus_bound_excess_max",
        CheckKind::KPlusBoundExcessOverSe => "k_plus_bound_excess_over_se",
        CheckKind::KMinusBoundExcessOverSe => "k_minus_bound_excess_over_se",
        CheckKind::KMinusBoundExcessMax => "k_minus_bound_excess_max",
        CheckKind::GammaMartingaleDevOverSe => "gamma_martingale_dev_over_se",
        CheckKind::SupGammaMinusDeltaOverSe => "sup_gamma_minus_delta_over_se",
        CheckKind::SupGammaMinusX0OverSe => "sup_gamma_minus_x0_over_se",
    }
}

struct BuiltProblem {
    problem: Problem,
    mat: MaterializedProblem,
}

fn build_problem(
    scenario: &Scenario,
    env: Option<&Arc<EnvelopeSpec>>,
    mesh: &TimeMesh,
    ens: &PathEnsemble,
) -> Result<Option<BuiltProblem>> {
    let Some(cfg) = &scenario.problem else {
        return Ok(None);
    };
    let terminal = match cfg.terminal {
        TerminalConfig::Constant { value } => TerminalSpec::Constant { value },
        TerminalConfig::Brownian => TerminalSpec::Brownian,
        TerminalConfig::AbsBrownian => TerminalSpec::AbsBrownian,
        TerminalConfig::AffineBrownian { slope, intercept } => {
            TerminalSpec::AffineBrownian { slope, intercept }
        }
        TerminalConfig::StepOfBrownian {
            threshold,
            low,
            high,
        } => TerminalSpec::StepOfBrownian {
            threshold,
            low,
            high,
        },
        TerminalConfig::BoundedEnvelopeValue => {
            let env = env.ok_or_else(|| {
                Error::Config("bounded_envelope_value terminal needs an envelope".into())
            })?;
            let budget = scenario
                .envelope
                .as_ref()
                .and_then(|e| e.budget)
                .ok_or_else(|| {
                    Error::Config("bounded_envelope_value terminal needs a budget".into())
                })?;
            let a_inc = scenario
                .ensemble
                .a_spec
                .deterministic_increments(mesh)
                .ok_or_else(|| {
                    Error::Config(
                        "bounded_envelope_value terminal needs a deterministic A spec".into(),
                    )
                })?;
            let eta = eta_deterministic(env, mesh, &a_inc)?;
            let eta_t = *eta.last().unwrap();
            if eta_t > budget + 1e-12 {
                return Err(Error::Config(format!(
                    "eta_T = {eta_t:.6e} exceeds the envelope budget {budget}"
                )));
            }
            TerminalSpec::Constant {
                value: env.h_inv((budget - eta_t).max(0.0))?,
            }
        }
    };
    let f = cfg.f.build(env)?;
    let g = cfg.g.build(env)?;
    let mut problem = Problem::unreflected(f, g, terminal);
    if let Some(l) = cfg.lower_barrier {
        problem = problem.with_lower(l);
    }
    if let Some(u) = cfg.upper_barrier {
        problem = problem.with_upper(u);
    }
    if let Some(d) = &cfg.lower_decomposition {
        problem = problem.with_lower_decomposition(d.build(ens.d()));
    }
    if let Some(d) = &cfg.upper_decomposition {
        problem = problem.with_upper_decomposition(d.build(ens.d()));
    }
    let mat = materialize(&problem, mesh, ens)?;
    Ok(Some(BuiltProblem { problem, mat }))
}

/// Exact conditional expectations of the transformed terminal bound for the
/// phi(x) = x, psi = 1, R = 0 family with deterministic eta. Refuses any
/// configuration outside the closed form's reach.
fn closed_form_lambda_bar(
    scenario: &Scenario,
    env: &EnvelopeSpec,
    problem: &Problem,
    mesh: &TimeMesh,
    ens: &PathEnsemble,
) -> Result<Grid> {
    if !matches!(env.phi(), grbsde::PhiFamily::Linear)
        || !matches!(env.psi(), grbsde::PsiFamily::One)
        || !env.r_process().is_identically_zero()
    {
        return Err(Error::Config(
            "closed-form lambda_bar needs phi(x) = x, psi = 1 and R = 0".into(),
        ));
    }
    match problem.lower {
        None => {}
        Some(grbsde::BarrierSpec::Constant { value }) if value <= env.domain_floor() => {}
        _ => {
            return Err(Error::Config(
                "closed-form lambda_bar needs the lower barrier absent or constant below the \
                 domain floor"
                    .into(),
            ));
        }
    }
    let a_inc = scenario
        .ensemble
        .a_spec
        .deterministic_increments(mesh)
        .ok_or_else(|| {
            Error::Config("closed-form lambda_bar needs a deterministic A spec".into())
        })?;
    let eta = eta_deterministic(env, mesh, &a_inc)?;
    let eta_t = *eta.last().unwrap();
    let c_t = env.c_process().value_at(mesh.horizon());
    grbsde::lambda_bar_conditional_exact(
        &problem.terminal,
        env.domain_floor(),
        c_t,
        eta_t,
        mesh,
        ens,
    )
}

/// The transformed terminal bound per path: lambda = xi v sup_t L_t v D
/// pushed through lambda_bar.
fn lambda_bar_terminal(
    env: &EnvelopeSpec,
    mesh: &TimeMesh,
    ens: &PathEnsemble,
    mat: &MaterializedProblem,
    eta: &Grid,
) -> Result<Vec<f64>> {
    let c_t = env.c_process().value_at(mesh.horizon());
    let last = mesh.n_nodes() - 1;
    (0..ens.n_paths())
        .map(|p| {
            let mut lam = mat.terminal[p].max(env.domain_floor());
            if let Some(l) = &mat.lower {
                for i in 0..mesh.n_nodes() {
                    lam = lam.max(l.at(i, p));
                }
            }
            env.lambda_bar(lam, eta.at(last, p), c_t)
        })
        .collect()
}

pub fn run_scenario(scenario: &Scenario, seed_override: Option<u64>) -> Result<RunArtifacts> {
    scenario.validate()?;
    let started = Instant::now();

    let mesh = TimeMesh::uniform(scenario.mesh.t_max, scenario.mesh.n_steps)?;
    let seed = seed_override.unwrap_or(scenario.ensemble.seed);
    let ens = simulate_paths(
        &mesh,
        scenario.ensemble.n_paths,
        scenario.ensemble.d,
        seed,
        scenario.ensemble.a_spec,
    )?;

    let env: Option<Arc<EnvelopeSpec>> = match &scenario.envelope {
        Some(cfg) => Some(Arc::new(cfg.build()?)),
        None => None,
    };

    let built = build_problem(scenario, env.as_ref(), &mesh, &ens)?;

    // Envelope pipeline: eta, the transformed terminal bound, its
    // conditional expectations, and the closed-form panel x.
    let mut envelope_x: Option<Grid> = None;
    let mut lambda_se = 0.0;
    let mut lam_bar_paths: Option<Vec<f64>> = None;
    if let (Some(env), Some(b)) = (&env, &built) {
        let family = scenario.envelope.as_ref().and_then(|e| e.family);
        let eta = eta_on_mesh(env, &mesh, &ens);
        if family.is_some() || scenario.gamma_check.is_some() {
            let lam_bar = lambda_bar_terminal(env, &mesh, &ens, &b.mat, &eta)?;
            if let Some(fam) = family {
                let c_at = values_on_mesh(env.c_process(), &mesh);
                let estimator_kind = scenario
                    .envelope
                    .as_ref()
                    .map(|e| e.lambda_bar)
                    .unwrap_or_default();
                let cond = match estimator_kind {
                    LambdaBarEstimator::ClosedForm => {
                        closed_form_lambda_bar(scenario, env, &b.problem, &mesh, &ens)?
                    }
                    LambdaBarEstimator::Regression => {
                        let est = scenario.estimator.build();
                        let (mut cond, se) =
                            conditional_lambda_bar(&mesh, &ens, &est, &lam_bar)?;
                        lambda_se = se;
                        // Regression noise can push the estimate below the
                        // hard admissibility floor the true conditional
                        // expectation is known to respect; clip before
                        // applying G.
                        let floor = membership_floor(env, &c_at, &eta)?;
                        for i in 0..cond.rows() {
                            for p in 0..cond.cols() {
                                if cond.at(i, p) < floor.at(i, p) {
                                    cond.set(i, p, floor.at(i, p));
                                }
                            }
                        }
                        cond
                    }
                };
                envelope_x = Some(unbounded_envelope(env, fam.into(), &cond, &c_at, &eta)?);
            }
            lam_bar_paths = Some(lam_bar);
        }
    }

    // Solves.
    let est = scenario.estimator.build();
    let cfg = SolverConfig {
        z_cap: scenario.solver_options.z_cap,
        corrector_passes: scenario.solver_options.corrector_passes,
        state_clip_quantile: scenario.solver_options.state_clip_quantile,
    };
    let mut panel = None;
    let mut capped_panel = None;
    let mut lower_grid = None;
    if let Some(b) = &built {
        lower_grid = b.mat.lower.clone();
        match scenario.solver {
            SolverKind::None => {}
            SolverKind::Gbsde => {
                panel = Some(solve_gbsde(&b.mat, &mesh, &ens, &est, &cfg)?);
            }
            SolverKind::OneBarrier => {
                panel = Some(solve_grbsde_one_barrier(&b.mat, &mesh, &ens, &est, &cfg)?);
                if scenario
                    .problem
                    .as_ref()
                    .is_some_and(|p| p.upper_from_envelope)
                {
                    let x = envelope_x.clone().ok_or_else(|| {
                        Error::Config("upper_from_envelope needs the envelope panel".into())
                    })?;
                    let mut capped = b.mat.clone();
                    capped.set_upper_panel(x)?;
                    capped_panel = Some(solve_grbsde_two_barriers(
                        &capped, &mesh, &ens, &est, &cfg,
                    )?);
                }
            }
            SolverKind::TwoBarrier => {
                let mut mat = b.mat.clone();
                if scenario
                    .problem
                    .as_ref()
                    .is_some_and(|p| p.upper_from_envelope)
                {
                    let x = envelope_x.clone().ok_or_else(|| {
                        Error::Config("upper_from_envelope needs the envelope panel".into())
                    })?;
                    mat.set_upper_panel(x)?;
                }
                panel = Some(solve_grbsde_two_barriers(&mat, &mesh, &ens, &est, &cfg)?);
            }
            SolverKind::Penalized { .. } => {
                let penalty = scenario.solver.penalty().unwrap();
                panel = Some(solve_penalized(&b.mat, &mesh, &ens, &est, &cfg, penalty)?);
            }
        }
    }

    // Oracle.
    let oracle = match &scenario.oracle {
        None => None,
        Some(OracleConfig::ColeHopf { gamma }) => {
            let b = built
                .as_ref()
                .ok_or_else(|| Error::Config("oracle needs a problem section".into()))?;
            Some(cole_hopf_exact(*gamma, &b.problem.terminal, &mesh, &ens)?)
        }
        Some(OracleConfig::DeterministicOde) => {
            let env = env
                .as_ref()
                .ok_or_else(|| Error::Config("deterministic oracle needs an envelope".into()))?;
            let budget = scenario.envelope.as_ref().unwrap().budget.unwrap();
            let a_inc = scenario
                .ensemble
                .a_spec
                .deterministic_increments(&mesh)
                .ok_or_else(|| {
                    Error::Config("deterministic oracle needs a deterministic A spec".into())
                })?;
            Some(deterministic_ode_solution(env, budget, &mesh, &a_inc)?)
        }
        Some(OracleConfig::Tree { n_steps }) => {
            let b = built
                .as_ref()
                .ok_or_else(|| Error::Config("tree oracle needs a problem section".into()))?;
            let tree = binomial_tree(scenario.mesh.t_max, *n_steps)?;
            let tree_mesh = TimeMesh::uniform(scenario.mesh.t_max, *n_steps)?;
            let a_inc = scenario
                .ensemble
                .a_spec
                .deterministic_increments(&tree_mesh)
                .ok_or_else(|| {
                    Error::Config("tree oracle needs a deterministic A spec".into())
                })?;
            Some(grbsde::tree_dp_reflected(&b.problem, &tree, &a_inc)?)
        }
    };

    // Weighted sup / Holder stage.
    let gamma = match (&scenario.gamma_check, &env, &lam_bar_paths) {
        (Some(gc), Some(env), Some(lam_bar)) => {
            let r_at = values_on_mesh(env.r_process(), &mesh);
            let aux = MaterializedProblem {
                f: DriverF::ScaledAbsZ {
                    r: *env.r_process(),
                },
                g: DriverG::Zero,
                terminal: lam_bar.clone(),
                lower: None,
                upper: None,
                lower_decomp: None,
                upper_decomp: None,
            };
            let pilot = solve_gbsde(&aux, &mesh, &ens, &est, &cfg)?;
            let x0 = pilot.y0_mean();
            let family = default_pi_family(ens.d(), Some(&pilot.z));
            let sup = estimate_sup_gamma(lam_bar, &r_at, &family, &mesh, &ens)?;
            let delta = delta_bound(lam_bar, &r_at, gc.q, gc.n_cap, &mesh, &ens)?;

            let mut dir = vec![0.0; ens.d()];
            dir[0] = 1.0;
            let weights = gamma_weights(
                &ens,
                &r_at,
                &PiProcess::ConstantDir(dir),
                0,
                mesh.n_steps(),
            )?;
            let n = weights.len() as f64;
            let mean = weights.iter().sum::<f64>() / n;
            let var = weights.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / n;
            Some(GammaArtifacts {
                sup,
                delta,
                x0,
                martingale_mean: mean,
                martingale_se: (var / n).sqrt().max(f64::MIN_POSITIVE),
            })
        }
        (Some(_), _, _) => {
            return Err(Error::Config(
                "gamma_check needs both an envelope and a problem section".into(),
            ));
        }
        _ => None,
    };

    let mut artifacts = RunArtifacts {
        mesh,
        seed,
        panel,
        capped_panel,
        envelope_x,
        lambda_se,
        oracle,
        gamma,
        lower: lower_grid,
        checks: Vec::new(),
        runtime_s: 0.0,
        d: ens.d(),
    };

    let mat_ref = built.as_ref().map(|b| &b.mat);
    let mut outcomes = Vec::with_capacity(scenario.checks.len());
    for check in &scenario.checks {
        outcomes.push(evaluate_check(check, &artifacts, mat_ref, &ens)?);
    }
    artifacts.checks = outcomes;
    artifacts.runtime_s = started.elapsed().as_secs_f64();
    Ok(artifacts)
}

fn oracle_y_at(oracle: &OracleResult, node: usize, path: usize) -> Option<f64> {
    if let Some(y) = &oracle.y {
        Some(y.at(node, path))
    } else {
        oracle.y_nodes.as_ref().map(|nodes| nodes[node])
    }
}

fn evaluate_check(
    check: &CheckConfig,
    art: &RunArtifacts,
    mat: Option<&MaterializedProblem>,
    ens: &PathEnsemble,
) -> Result<CheckOutcome> {
    let need_panel = || {
        art.panel
            .as_ref()
            .ok_or_else(|| Error::Config(format!("check {:?} needs a solver panel", check.name)))
    };
    let need_oracle = || {
        art.oracle
            .as_ref()
            .ok_or_else(|| Error::Config(format!("check {:?} needs an oracle", check.name)))
    };
    let need_gamma = || {
        art.gamma
            .as_ref()
            .ok_or_else(|| Error::Config(format!("check {:?} needs a gamma_check stage", check.name)))
    };

    let n_paths = ens.n_paths() as f64;
    let (value, tolerance) = match check.name {
        CheckKind::YVsOracleMeanAbsMax => {
            let panel = need_panel()?;
            let oracle = need_oracle()?;
            let mut worst = 0.0f64;
            for i in 0..art.mesh.n_nodes() {
                let mut acc = 0.0;
                for p in 0..ens.n_paths() {
                    let reference = oracle_y_at(oracle, i, p).ok_or_else(|| {
                        Error::Config("oracle carries no per-node values".into())
                    })?;
                    acc += (panel.y.at(i, p) - reference).abs();
                }
                worst = worst.max(acc / n_paths);
            }
            (worst, check.tolerance)
        }
        CheckKind::Y0VsOracleAbs => {
            let panel = need_panel()?;
            let oracle = need_oracle()?;
            ((panel.y0_mean() - oracle.y0).abs(), check.tolerance)
        }
        CheckKind::ZMeanVsOracleMax => {
            let panel = need_panel()?;
            let oracle = need_oracle()?;
            let z_ref = oracle
                .z
                .as_ref()
                .ok_or_else(|| Error::Config("oracle carries no Z values".into()))?;
            let mut worst = 0.0f64;
            for i in 0..art.mesh.n_steps() {
                let mut mean = 0.0;
                let mut mean_ref = 0.0;
                for p in 0..ens.n_paths() {
                    mean += panel.z.at(i, p)[0];
                    mean_ref += z_ref.at(i, p)[0];
                }
                worst = worst.max((mean - mean_ref).abs() / n_paths);
            }
            (worst, check.tolerance)
        }
        CheckKind::Y0VsReferenceAbs => {
            let panel = need_panel()?;
            let reference = check.reference.ok_or_else(|| {
                Error::Config("y0_vs_reference_abs needs a reference value".into())
            })?;
            ((panel.y0_mean() - reference).abs(), check.tolerance)
        }
        CheckKind::SkorokhodResidualScaledMax => {
            let mut worst = 0.0f64;
            for panel in [&art.panel, &art.capped_panel].into_iter().flatten() {
                let scale = 1.0 + panel.diagnostics.y_sup_norm;
                for v in panel
                    .diagnostics
                    .skorokhod_lower
                    .iter()
                    .chain(&panel.diagnostics.skorokhod_upper)
                {
                    worst = worst.max(v / scale);
                }
            }
            (worst, check.tolerance)
        }
        CheckKind::SingularityMax => {
            let mut worst = 0.0f64;
            for panel in [&art.panel, &art.capped_panel].into_iter().flatten() {
                worst = worst.max(panel.diagnostics.max_singularity);
            }
            (worst, check.tolerance)
        }
        CheckKind::SandwichViolationCount => {
            let panel = need_panel()?;
            let x = art
                .envelope_x
                .as_ref()
                .ok_or_else(|| Error::Config("sandwich check needs the envelope panel".into()))?;
            // A zero-violations test of the max over every (node, path)
            // entry: the Monte Carlo band uses the extreme-value quantile
            // sqrt(2 ln N) of the noise field plus an allowance for the
            // backward accumulation of fit errors across slices.
            let n_checks = (art.mesh.n_nodes() * ens.n_paths()) as f64;
            let multiplier = (2.0 * n_checks.ln()).sqrt() + 3.0;
            let band =
                1e-6 + multiplier * (panel.diagnostics.max_fit_se + 3.0 * art.lambda_se);
            let mut violations = 0usize;
            for i in 0..art.mesh.n_nodes() {
                for p in 0..ens.n_paths() {
                    let y = panel.y.at(i, p);
                    if y > x.at(i, p) + band {
                        violations += 1;
                    }
                    if let Some(l) = &art.lower {
                        if y < l.at(i, p) - band {
                            violations += 1;
                        }
                    }
                }
            }
            (violations as f64, check.tolerance)
        }
        CheckKind::KMinusTotalMean => {
            let panel = art
                .capped_panel
                .as_ref()
                .or(art.panel.as_ref())
                .ok_or_else(|| Error::Config("k_minus check needs a solver panel".into()))?;
            (panel.k_minus_total_mean(), check.tolerance)
        }
        CheckKind::KPlusBoundExcessMax => {
            let panel = need_panel()?;
            let mat = mat.ok_or_else(|| Error::Config("dK bound needs a problem".into()))?;
            let report = check_dk_bounds(panel, mat, &art.mesh, ens)?;
            let side = report
                .lower
                .ok_or_else(|| Error::Config("no lower barrier for the dK+ bound".into()))?;
            (side.max_excess.max(0.0), check.tolerance)
        }
        CheckKind::KPlusBoundExcessOverSe => {
            let panel = need_panel()?;
            let mat = mat.ok_or_else(|| Error::Config("dK bound needs a problem".into()))?;
            let report = check_dk_bounds(panel, mat, &art.mesh, ens)?;
            let side = report
                .lower
                .ok_or_else(|| Error::Config("no lower barrier for the dK+ bound".into()))?;
            (side.worst_mean_over_se(), check.tolerance)
        }
        CheckKind::KMinusBoundExcessMax => {
            let panel = art
                .capped_panel
                .as_ref()
                .or(art.panel.as_ref())
                .ok_or_else(|| Error::Config("dK bound needs a solver panel".into()))?;
            let mat = mat.ok_or_else(|| Error::Config("dK bound needs a problem".into()))?;
            let report = check_dk_bounds(panel, mat, &art.mesh, ens)?;
            let side = report
                .upper
                .ok_or_else(|| Error::Config("no upper barrier for the dK- bound".into()))?;
            (side.max_excess.max(0.0), check.tolerance)
        }
        CheckKind::KMinusBoundExcessOverSe => {
            let panel = art
                .capped_panel
                .as_ref()
                .or(art.panel.as_ref())
                .ok_or_else(|| Error::Config("dK bound needs a solver panel".into()))?;
            let mat = mat.ok_or_else(|| Error::Config("dK bound needs a problem".into()))?;
            let report = check_dk_bounds(panel, mat, &art.mesh, ens)?;
            let side = report
                .upper
                .ok_or_else(|| Error::Config("no upper barrier for the dK- bound".into()))?;
            (side.worst_mean_over_se(), check.tolerance)
        }
        CheckKind::GammaMartingaleDevOverSe => {
            let g = need_gamma()?;
            (
                (g.martingale_mean - 1.0).abs() / g.martingale_se,
                check.tolerance,
            )
        }
        CheckKind::SupGammaMinusDeltaOverSe => {
            let g = need_gamma()?;
            let se = g.sup.members[g.sup.best_index].std_error.max(f64::MIN_POSITIVE);
            ((g.sup.best - g.delta) / se, check.tolerance)
        }
        CheckKind::SupGammaMinusX0OverSe => {
            let g = need_gamma()?;
            let se = g.sup.members[g.sup.best_index].std_error.max(f64::MIN_POSITIVE);
            ((g.sup.best - g.x0) / se, check.tolerance)
        }
    };

    Ok(CheckOutcome {
        name: check_name(check.name).to_string(),
        passed: value <= tolerance,
        value,
        tolerance,
    })
}
