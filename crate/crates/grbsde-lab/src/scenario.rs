//! Declarative scenario configuration: every function family is referenced
//! by identifier and parameters, never by embedded code, so configurations
//! are diffable and golden-testable.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use grbsde::{
    ASpec, BarrierDecomposition, BarrierSpec, Basis, DriverF, DriverG, EnvelopeSpec, Error,
    PhiFamily, ProcessSpec, PsiFamily, RegressionEstimator, Result,
    UnboundedFamily,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshConfig {
    pub t_max: f64,
    pub n_steps: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub d: usize,
    #[serde(default = "default_a_spec")]
    pub a_spec: ASpec,
}

fn default_a_spec() -> ASpec {
    ASpec::Time
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiConfig {
    Constant { value: f64 },
    Linear,
    RLogR,
    Exponential,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiConfig {
    Zero,
    One,
    Linear,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyConfig {
    PhiLinearPsiOne,
    PhiXLnXPsiOne,
    PhiLinearPsiLinear,
    PhiLinearPsiZero,
}

impl From<FamilyConfig> for UnboundedFamily {
    fn from(f: FamilyConfig) -> Self {
        match f {
            FamilyConfig::PhiLinearPsiOne => UnboundedFamily::PhiLinearPsiOne,
            FamilyConfig::PhiXLnXPsiOne => UnboundedFamily::PhiXLnXPsiOne,
            FamilyConfig::PhiLinearPsiLinear => UnboundedFamily::PhiLinearPsiLinear,
            FamilyConfig::PhiLinearPsiZero => UnboundedFamily::PhiLinearPsiZero,
        }
    }
}

/// Growth-envelope parameters. `budget` is the deterministic eta allowance
/// of the bounded construction; `family` selects the unbounded closed form.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvelopeConfig {
    pub domain_floor: f64,
    pub phi: PhiConfig,
    pub psi: PsiConfig,
    #[serde(default = "ProcessSpec::zero")]
    pub alpha: ProcessSpec,
    #[serde(default = "ProcessSpec::zero")]
    pub beta: ProcessSpec,
    #[serde(default = "ProcessSpec::zero")]
    pub c: ProcessSpec,
    #[serde(default = "ProcessSpec::zero")]
    pub r: ProcessSpec,
    #[serde(default)]
    pub budget: Option<f64>,
    #[serde(default)]
    pub family: Option<FamilyConfig>,
    #[serde(default)]
    pub lambda_bar: LambdaBarEstimator,
}

/// How the conditional expectations E[lambda_bar | F_t] feeding the envelope
/// panel are obtained.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum LambdaBarEstimator {
    /// Least-squares regression on the scenario estimator's basis, clipped
    /// at the admissibility floor.
    #[default]
    Regression,
    /// Exact Gaussian closed form; only for phi(x) = x, psi = 1, R = 0 with
    /// deterministic eta and supported terminal kinds.
    ClosedForm,
}

impl EnvelopeConfig {
    pub fn build(&self) -> Result<EnvelopeSpec> {
        let phi = match self.phi {
            PhiConfig::Constant { value } => PhiFamily::Constant(value),
            PhiConfig::Linear => PhiFamily::Linear,
            PhiConfig::RLogR => PhiFamily::RLogR,
            PhiConfig::Exponential => PhiFamily::Exponential,
        };
        let psi = match self.psi {
            PsiConfig::Zero => PsiFamily::Zero,
            PsiConfig::One => PsiFamily::One,
            PsiConfig::Linear => PsiFamily::Linear,
        };
        EnvelopeSpec::new(self.domain_floor, phi, psi)?
            .with_alpha(self.alpha)?
            .with_beta(self.beta)?
            .with_c(self.c)?
            .with_r(self.r)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriverConfig {
    Zero,
    Constant { value: f64 },
    QuadraticZ {
        gamma: f64,
        #[serde(default)]
        offset: f64,
    },
    ScaledAbsZ { r: ProcessSpec },
    /// The growth bound of the scenario's envelope, met with equality.
    EnvelopeBound,
}

impl DriverConfig {
    pub fn build(&self, env: Option<&Arc<EnvelopeSpec>>) -> Result<DriverF> {
        Ok(match self {
            DriverConfig::Zero => DriverF::Zero,
            DriverConfig::Constant { value } => DriverF::Constant { value: *value },
            DriverConfig::QuadraticZ { gamma, offset } => DriverF::QuadraticZ {
                gamma: *gamma,
                offset: *offset,
            },
            DriverConfig::ScaledAbsZ { r } => DriverF::ScaledAbsZ { r: *r },
            DriverConfig::EnvelopeBound => DriverF::EnvelopeBound {
                env: env
                    .ok_or_else(|| {
                        Error::Config("envelope_bound driver needs an envelope section".into())
                    })?
                    .clone(),
            },
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GDriverConfig {
    Zero,
    Constant { value: f64 },
    EnvelopeBound,
}

impl GDriverConfig {
    pub fn build(&self, env: Option<&Arc<EnvelopeSpec>>) -> Result<DriverG> {
        Ok(match self {
            GDriverConfig::Zero => DriverG::Zero,
            GDriverConfig::Constant { value } => DriverG::Constant { value: *value },
            GDriverConfig::EnvelopeBound => DriverG::EnvelopeBound {
                env: env
                    .ok_or_else(|| {
                        Error::Config("envelope_bound driver needs an envelope section".into())
                    })?
                    .clone(),
            },
        })
    }
}

/// Terminal functional; `bounded_envelope_value` resolves to the constant
/// H^{-1}(budget - eta_T) of the scenario's envelope.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerminalConfig {
    Constant { value: f64 },
    Brownian,
    AbsBrownian,
    AffineBrownian { slope: f64, intercept: f64 },
    StepOfBrownian { threshold: f64, low: f64, high: f64 },
    BoundedEnvelopeValue,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompConfig {
    #[serde(default = "ProcessSpec::zero")]
    pub rho: ProcessSpec,
    #[serde(default = "ProcessSpec::zero")]
    pub theta: ProcessSpec,
    #[serde(default)]
    pub chi: Vec<ProcessSpec>,
}

impl DecompConfig {
    pub fn build(&self, d: usize) -> BarrierDecomposition {
        let mut chi = self.chi.clone();
        chi.resize(d, ProcessSpec::zero());
        BarrierDecomposition {
            rho: self.rho,
            theta: self.theta,
            chi,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub f: DriverConfig,
    pub g: GDriverConfig,
    pub terminal: TerminalConfig,
    #[serde(default)]
    pub lower_barrier: Option<BarrierSpec>,
    #[serde(default)]
    pub upper_barrier: Option<BarrierSpec>,
    #[serde(default)]
    pub lower_decomposition: Option<DecompConfig>,
    #[serde(default)]
    pub upper_decomposition: Option<DecompConfig>,
    /// Inject the envelope panel x as the upper barrier after
    /// materialization.
    #[serde(default)]
    pub upper_from_envelope: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub basis: Basis,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
}

fn default_ridge() -> f64 {
    grbsde::tol::RIDGE_DEFAULT
}

impl EstimatorConfig {
    pub fn build(&self) -> RegressionEstimator {
        RegressionEstimator {
            basis: self.basis,
            ridge: self.ridge,
        }
    }
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            basis: Basis::PolynomialWithAux { degree: 3 },
            ridge: default_ridge(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverKind {
    None,
    Gbsde,
    OneBarrier,
    TwoBarrier,
    Penalized { penalty_exponent: i32 },
}

impl SolverKind {
    pub fn penalty(&self) -> Option<f64> {
        match self {
            SolverKind::Penalized { penalty_exponent } => Some(10f64.powi(*penalty_exponent)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverOptions {
    #[serde(default = "default_z_cap")]
    pub z_cap: f64,
    #[serde(default)]
    pub corrector_passes: usize,
    #[serde(default = "default_state_clip")]
    pub state_clip_quantile: f64,
}

fn default_z_cap() -> f64 {
    grbsde::tol::Z_CAP_DEFAULT
}

fn default_state_clip() -> f64 {
    0.0
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            z_cap: default_z_cap(),
            corrector_passes: 0,
            state_clip_quantile: default_state_clip(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleConfig {
    /// Exponential-transform closed form for the gamma/2 |z|^2 driver.
    ColeHopf { gamma: f64 },
    /// Deterministic envelope solution H^{-1}(budget - eta_t).
    DeterministicOde,
    /// Exact dynamic programming on a recombining tree with its own step
    /// count (the Monte Carlo mesh is rebuilt to match).
    Tree { n_steps: usize },
}

/// Weighted sup/Holder estimation stage over the transformed terminal bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaCheckConfig {
    pub q: f64,
    pub n_cap: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// max over nodes of mean over paths |Y - oracle|.
    YVsOracleMeanAbsMax,
    /// |Y0 - oracle Y0|.
    Y0VsOracleAbs,
    /// max over steps of |mean_p Z - mean_p Z_oracle|.
    ZMeanVsOracleMax,
    /// |Y0 - reference|.
    Y0VsReferenceAbs,
    /// max over paths of |sum (Y - L) dK+| / (1 + ||Y||_inf), both barriers.
    SkorokhodResidualScaledMax,
    /// max over steps and paths of min(dK+, dK-).
    SingularityMax,
    /// Count of (node, path) entries outside [L - band, x + band].
    SandwichViolationCount,
    /// Mean over paths of total dK- in the envelope-capped solve.
    KMinusTotalMean,
    /// max over steps and paths of dK+ minus its per-step bound.
    KPlusBoundExcessMax,
    /// Worst per-step mean excess of dK+ over its bound, in standard errors
    /// of the mean.
    KPlusBoundExcessOverSe,
    /// max over steps and paths of dK- minus its per-step bound.
    KMinusBoundExcessMax,
    /// Worst per-step mean excess of dK- over its bound, in standard errors
    /// of the mean.
    KMinusBoundExcessOverSe,
    /// |sample mean Gamma - 1| / standard error for the unit control.
    GammaMartingaleDevOverSe,
    /// (sup-family estimate - Holder majorant) / standard error.
    SupGammaMinusDeltaOverSe,
    /// (sup-family estimate - solved auxiliary x1_0) / standard error.
    SupGammaMinusX0OverSe,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckConfig {
    pub name: CheckKind,
    pub tolerance: f64,
    #[serde(default)]
    pub reference: Option<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Panel,
    Report,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub mesh: MeshConfig,
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub envelope: Option<EnvelopeConfig>,
    #[serde(default)]
    pub problem: Option<ProblemConfig>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    pub solver: SolverKind,
    #[serde(default)]
    pub solver_options: SolverOptions,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
    #[serde(default)]
    pub gamma_check: Option<GammaCheckConfig>,
    pub checks: Vec<CheckConfig>,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputKind>,
}

fn default_outputs() -> Vec<OutputKind> {
    vec![OutputKind::Panel, OutputKind::Report]
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("scenario does not parse: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("scenario name is empty".into()));
        }
        if self.mesh.n_steps == 0 || !(self.mesh.t_max > 0.0) {
            return Err(Error::Config("mesh needs t_max > 0 and n_steps >= 1".into()));
        }
        if self.ensemble.n_paths == 0 || self.ensemble.d == 0 {
            return Err(Error::Config("ensemble needs n_paths >= 1 and d >= 1".into()));
        }
        if self.solver != SolverKind::None && self.problem.is_none() {
            return Err(Error::Config(format!(
                "solver {:?} needs a problem section",
                self.solver
            )));
        }
        if let Some(p) = &self.problem {
            let needs_env = matches!(p.f, DriverConfig::EnvelopeBound)
                || matches!(p.g, GDriverConfig::EnvelopeBound)
                || matches!(p.terminal, TerminalConfig::BoundedEnvelopeValue)
                || p.upper_from_envelope;
            if needs_env && self.envelope.is_none() {
                return Err(Error::Config(
                    "problem references the envelope but no envelope section is present".into(),
                ));
            }
            if p.upper_from_envelope
                && self
                    .envelope
                    .as_ref()
                    .is_some_and(|e| e.family.is_none())
            {
                return Err(Error::Config(
                    "upper_from_envelope needs an envelope family".into(),
                ));
            }
        }
        if matches!(self.oracle, Some(OracleConfig::DeterministicOde))
            && self.envelope.as_ref().is_none_or(|e| e.budget.is_none())
        {
            return Err(Error::Config(
                "the deterministic oracle needs an envelope with a budget".into(),
            ));
        }
        if self.gamma_check.is_some() && self.envelope.is_none() {
            return Err(Error::Config(
                "gamma_check needs an envelope section to build the terminal bound".into(),
            ));
        }
        Ok(())
    }
}
