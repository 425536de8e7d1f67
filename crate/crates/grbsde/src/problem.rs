//! Problem data for the backward solvers: drivers f and g, terminal
//! functionals, barriers and their semimartingale decompositions, plus the
//! materialization step that turns specs into per-node-per-path values.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mesh::TimeMesh;
use crate::paths::PathEnsemble;
use crate::process::ProcessSpec;
use crate::transform::EnvelopeSpec;

/// Driver f(t, y, z) of the ds integrator.
#[derive(Clone, Debug)]
pub enum DriverF {
    Zero,
    Constant { value: f64 },
    /// gamma/2 |z|^2 + offset.
    QuadraticZ { gamma: f64, offset: f64 },
    /// r_t |z|: the linear-in-|z| auxiliary driver.
    ScaledAbsZ { r: ProcessSpec },
    /// alpha_t phi(|y|) + c_t psi(|y|)/2 |z|^2 + r_t |z|: the growth bound of
    /// the attached envelope, met with equality.
    EnvelopeBound { env: Arc<EnvelopeSpec> },
}

impl DriverF {
    pub fn eval(&self, t: f64, y: f64, z: &[f64]) -> f64 {
        match self {
            DriverF::Zero => 0.0,
            DriverF::Constant { value } => *value,
            DriverF::QuadraticZ { gamma, offset } => {
                let z2: f64 = z.iter().map(|v| v * v).sum();
                0.5 * gamma * z2 + offset
            }
            DriverF::ScaledAbsZ { r } => {
                let zn: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                r.value_at(t) * zn
            }
            DriverF::EnvelopeBound { env } => {
                let ya = y.abs().max(env.domain_floor());
                let z2: f64 = z.iter().map(|v| v * v).sum();
                let zn = z2.sqrt();
                env.alpha().value_at(t) * env.phi().eval(ya)
                    + 0.5 * env.c_process().value_at(t) * env.psi().eval(ya) * z2
                    + env.r_process().value_at(t) * zn
            }
        }
    }

    pub fn depends_on_z(&self) -> bool {
        !matches!(self, DriverF::Zero | DriverF::Constant { .. })
    }
}

/// Driver g(t, y) of the dA integrator.
#[derive(Clone, Debug)]
pub enum DriverG {
    Zero,
    Constant { value: f64 },
    /// beta_t phi(|y|) from the attached envelope.
    EnvelopeBound { env: Arc<EnvelopeSpec> },
}

impl DriverG {
    pub fn eval(&self, t: f64, y: f64) -> f64 {
        match self {
            DriverG::Zero => 0.0,
            DriverG::Constant { value } => *value,
            DriverG::EnvelopeBound { env } => {
                let ya = y.abs().max(env.domain_floor());
                env.beta().value_at(t) * env.phi().eval(ya)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            DriverG::Zero => true,
            DriverG::Constant { value } => *value == 0.0,
            DriverG::EnvelopeBound { env } => env.beta().is_identically_zero(),
        }
    }
}

/// Terminal functional xi of the path, evaluated on the terminal Brownian
/// value (first component).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerminalSpec {
    Constant { value: f64 },
    /// xi = B^1_T.
    Brownian,
    /// xi = |B^1_T|.
    AbsBrownian,
    /// xi = slope * B^1_T + intercept.
    AffineBrownian { slope: f64, intercept: f64 },
    /// xi = low for B^1_T < threshold, high otherwise (bounded step).
    StepOfBrownian { threshold: f64, low: f64, high: f64 },
}

impl TerminalSpec {
    pub fn eval(&self, b_terminal: f64) -> f64 {
        match *self {
            TerminalSpec::Constant { value } => value,
            TerminalSpec::Brownian => b_terminal,
            TerminalSpec::AbsBrownian => b_terminal.abs(),
            TerminalSpec::AffineBrownian { slope, intercept } => slope * b_terminal + intercept,
            TerminalSpec::StepOfBrownian {
                threshold,
                low,
                high,
            } => {
                if b_terminal < threshold {
                    low
                } else {
                    high
                }
            }
        }
    }
}

/// Barrier as a function of time and the Brownian state (first component).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BarrierSpec {
    Constant { value: f64 },
    /// |B^1_t| + offset.
    AbsBrownianPlus { offset: f64 },
    /// B^1_t + offset.
    BrownianPlus { offset: f64 },
    /// base + slope * t, path independent.
    Deterministic { base: f64, slope: f64 },
}

impl BarrierSpec {
    pub fn eval(&self, t: f64, b: f64) -> f64 {
        match *self {
            BarrierSpec::Constant { value } => value,
            BarrierSpec::AbsBrownianPlus { offset } => b.abs() + offset,
            BarrierSpec::BrownianPlus { offset } => b + offset,
            BarrierSpec::Deterministic { base, slope } => base + slope * t,
        }
    }
}

/// Semimartingale decomposition data of a barrier: the absolutely continuous
/// rate rho, the dA rate theta and the martingale integrand chi (one spec
/// per Brownian component). The monotone part V is not needed by the bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BarrierDecomposition {
    pub rho: ProcessSpec,
    pub theta: ProcessSpec,
    pub chi: Vec<ProcessSpec>,
}

impl BarrierDecomposition {
    pub fn trivial(d: usize) -> Self {
        BarrierDecomposition {
            rho: ProcessSpec::zero(),
            theta: ProcessSpec::zero(),
            chi: vec![ProcessSpec::zero(); d],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rho.is_nonnegative() || !self.theta.is_nonnegative() {
            return Err(Error::Config(
                "barrier decomposition rates rho and theta must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn chi_at(&self, t: f64) -> Vec<f64> {
        self.chi.iter().map(|s| s.value_at(t)).collect()
    }
}

/// Full problem statement prior to materialization.
#[derive(Clone, Debug)]
pub struct Problem {
    pub f: DriverF,
    pub g: DriverG,
    pub terminal: TerminalSpec,
    pub lower: Option<BarrierSpec>,
    pub upper: Option<BarrierSpec>,
    pub lower_decomp: Option<BarrierDecomposition>,
    pub upper_decomp: Option<BarrierDecomposition>,
}

impl Problem {
    pub fn unreflected(f: DriverF, g: DriverG, terminal: TerminalSpec) -> Self {
        Problem {
            f,
            g,
            terminal,
            lower: None,
            upper: None,
            lower_decomp: None,
            upper_decomp: None,
        }
    }

    pub fn with_lower(mut self, barrier: BarrierSpec) -> Self {
        self.lower = Some(barrier);
        self
    }

    pub fn with_upper(mut self, barrier: BarrierSpec) -> Self {
        self.upper = Some(barrier);
        self
    }

    pub fn with_lower_decomposition(mut self, d: BarrierDecomposition) -> Self {
        self.lower_decomp = Some(d);
        self
    }

    pub fn with_upper_decomposition(mut self, d: BarrierDecomposition) -> Self {
        self.upper_decomp = Some(d);
        self
    }
}

/// Problem data evaluated on a concrete mesh and ensemble.
#[derive(Clone, Debug)]
pub struct MaterializedProblem {
    pub f: DriverF,
    pub g: DriverG,
    /// xi per path.
    pub terminal: Vec<f64>,
    /// Barrier values per node and path.
    pub lower: Option<Grid>,
    pub upper: Option<Grid>,
    pub lower_decomp: Option<BarrierDecomposition>,
    pub upper_decomp: Option<BarrierDecomposition>,
}

/// Evaluates terminal and barrier specs on the ensemble and validates the
/// ordering constraints xi >= L_T, xi <= U_T and L <= U everywhere.
pub fn materialize(problem: &Problem, mesh: &TimeMesh, ens: &PathEnsemble) -> Result<MaterializedProblem> {
    let n_nodes = mesh.n_nodes();
    let n_paths = ens.n_paths();
    let last = n_nodes - 1;

    let terminal: Vec<f64> = (0..n_paths)
        .map(|p| problem.terminal.eval(ens.w(last, p)[0]))
        .collect();

    let eval_barrier = |spec: &BarrierSpec| -> Grid {
        Grid::from_fn(n_nodes, n_paths, |i, p| spec.eval(mesh.t(i), ens.w(i, p)[0]))
    };
    let lower = problem.lower.as_ref().map(eval_barrier);
    let upper = problem.upper.as_ref().map(eval_barrier);

    if let (Some(l), Some(u)) = (&lower, &upper) {
        for i in 0..n_nodes {
            for p in 0..n_paths {
                if l.at(i, p) > u.at(i, p) {
                    return Err(Error::Barrier(format!(
                        "barriers cross: L = {:.6e} > U = {:.6e} at node {i}, path {p}",
                        l.at(i, p),
                        u.at(i, p)
                    )));
                }
            }
        }
    }
    if let Some(l) = &lower {
        for p in 0..n_paths {
            if terminal[p] < l.at(last, p) - 1e-12 {
                return Err(Error::Barrier(format!(
                    "terminal value {:.6e} below the lower barrier {:.6e} at path {p}",
                    terminal[p],
                    l.at(last, p)
                )));
            }
        }
    }
    if let Some(u) = &upper {
        for p in 0..n_paths {
            if terminal[p] > u.at(last, p) + 1e-12 {
                return Err(Error::Barrier(format!(
                    "terminal value {:.6e} above the upper barrier {:.6e} at path {p}",
                    terminal[p],
                    u.at(last, p)
                )));
            }
        }
    }
    if let Some(d) = &problem.lower_decomp {
        d.validate()?;
    }
    if let Some(d) = &problem.upper_decomp {
        d.validate()?;
    }

    Ok(MaterializedProblem {
        f: problem.f.clone(),
        g: problem.g.clone(),
        terminal,
        lower,
        upper,
        lower_decomp: problem.lower_decomp.clone(),
        upper_decomp: problem.upper_decomp.clone(),
    })
}

impl MaterializedProblem {
    /// Replaces the upper barrier with an externally built panel, for
    /// example the envelope process. Terminal consistency is re-checked.
    pub fn set_upper_panel(&mut self, panel: Grid) -> Result<()> {
        let last = panel.rows() - 1;
        if panel.cols() != self.terminal.len() {
            return Err(Error::Shape(format!(
                "upper panel has {} paths, problem has {}",
                panel.cols(),
                self.terminal.len()
            )));
        }
        for (p, xi) in self.terminal.iter().enumerate() {
            if *xi > panel.at(last, p) + 1e-9 {
                return Err(Error::Barrier(format!(
                    "terminal value {xi:.6e} above the injected upper panel {:.6e} at path {p}",
                    panel.at(last, p)
                )));
            }
        }
        if let Some(l) = &self.lower {
            for i in 0..panel.rows() {
                for p in 0..panel.cols() {
                    if l.at(i, p) > panel.at(i, p) {
                        return Err(Error::Barrier(format!(
                            "injected upper panel crosses the lower barrier at node {i}, path {p}"
                        )));
                    }
                }
            }
        }
        self.upper = Some(panel);
        Ok(())
    }
}
