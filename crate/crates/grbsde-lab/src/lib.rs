//! Scenario-driven front end for the grbsde laboratory: declarative JSON
//! configurations in, solver/oracle/check pipelines out, with CSV panels and
//! machine-readable reports.

pub mod catalog;
pub mod report;
pub mod runner;
pub mod scenario;

pub use catalog::{all_bundled, bundled_scenario, BUNDLED};
pub use report::{
    fmt_f64, write_convergence_csv, write_panel_csv, CheckRecord, ConvergenceRow, ResidualRecord,
    ScenarioReport,
};
pub use runner::{run_scenario, CheckOutcome, GammaArtifacts, RunArtifacts};
pub use scenario::{
    CheckConfig, CheckKind, DriverConfig, EnsembleConfig, EnvelopeConfig, EstimatorConfig,
    FamilyConfig, GDriverConfig, GammaCheckConfig, LambdaBarEstimator, MeshConfig, OracleConfig, OutputKind,
    PhiConfig, ProblemConfig, PsiConfig, Scenario, SolverKind, SolverOptions, TerminalConfig,
};
