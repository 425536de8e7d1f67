//! Numerical laboratory for generalized (reflected) backward stochastic
//! differential equations whose generator f ds + g dA has stochastic
//! quadratic growth in z.
//!
//! The crate provides four layers:
//!
//! * [`transform`] / [`envelope`] - the H/F/G change-of-variable calculus,
//!   its inverses and partial derivatives, and the closed-form solution
//!   envelopes built from conditional expectations of the transformed
//!   terminal bound;
//! * [`mesh`] / [`paths`] / [`regression`] / [`tree`] - time discretization,
//!   counter-based path simulation for the Brownian driver and the
//!   increasing process A, least-squares conditional expectations, and the
//!   recombining-tree substrate for exact oracles;
//! * [`solver`] - discretized backward solvers for the unreflected, one- and
//!   two-barrier equations with reflection by projection, plus the
//!   penalization cross-check, the per-step bounds on the reflection
//!   increments and the comparison report;
//! * [`oracle`] - independent references: the exponential-transform closed
//!   form for the pure quadratic driver, deterministic envelope solutions,
//!   exact tree dynamic programming, and the sup-over-controls estimators.
//!
//! A minimal end-to-end run: solve the pure quadratic-driver equation with
//! terminal B_T and compare against its closed form Y_t = B_t + (T - t)/2.
//!
//! ```
//! use grbsde::*;
//!
//! let mesh = TimeMesh::uniform(1.0, 10)?;
//! let ens = simulate_paths(&mesh, 2_000, 1, 42, ASpec::Time)?;
//! let problem = Problem::unreflected(
//!     DriverF::QuadraticZ { gamma: 1.0, offset: 0.0 },
//!     DriverG::Zero,
//!     TerminalSpec::Brownian,
//! );
//! let mat = materialize(&problem, &mesh, &ens)?;
//! let est = RegressionEstimator {
//!     basis: Basis::Polynomial { degree: 2 },
//!     ridge: 1e-8,
//! };
//! let panel = solve_gbsde(&mat, &mesh, &ens, &est, &SolverConfig::default())?;
//! let oracle = cole_hopf_exact(1.0, &TerminalSpec::Brownian, &mesh, &ens)?;
//! assert!((panel.y0_mean() - oracle.y0).abs() < 0.05);
//! # Ok::<(), grbsde::Error>(())
//! ```

pub mod envelope;
pub mod error;
pub mod grid;
pub mod mesh;
pub mod oracle;
pub mod paths;
pub mod problem;
pub mod process;
pub mod quad;
pub mod regression;
pub mod rng;
pub mod root;
pub mod solver;
pub mod tol;
pub mod transform;
pub mod tree;

pub use envelope::{
    bounded_envelope, build_transformed_solution, conditional_lambda_bar, eta_deterministic,
    eta_on_mesh, membership_floor, unbounded_envelope, EnvelopePath, UnboundedFamily,
};
pub use error::{Error, Result};
pub use grid::{Grid, VecGrid};
pub use mesh::TimeMesh;
pub use oracle::{
    cole_hopf_exact, default_pi_family, delta_bound, deterministic_ode_solution,
    estimate_sup_gamma, lambda_bar_conditional_exact, normal_cdf, tree_dp_reflected,
    OracleResult, SupGammaEstimate,
};
pub use paths::{gamma_weights, simulate_paths, values_on_mesh, ASpec, PathEnsemble, PiProcess};
pub use problem::{
    materialize, BarrierDecomposition, BarrierSpec, DriverF, DriverG, MaterializedProblem,
    Problem, TerminalSpec,
};
pub use process::ProcessSpec;
pub use regression::{conditional_expectation, Basis, FitDiagnostics, RegressionEstimator};
pub use solver::{
    check_dk_bounds, compare_solutions, solve_gbsde, solve_grbsde_one_barrier,
    solve_grbsde_two_barriers, solve_penalized, ComparisonReport, DkBoundReport, DkBoundSide, PanelDiagnostics,
    SolutionPanel, SolverConfig,
};
pub use transform::{
    check_varphi_monotone, EnvelopeSpec, GGradient, MassBound, MonotoneReport, PhiFamily,
    PsiFamily, TransformPoint,
};
pub use tree::{binomial_tree, BinomialTree};
