//! Report and table emission: a JSON report with stable schema and CSV
//! panels with 17-significant-digit decimal columns for bitwise golden
//! comparisons.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use grbsde::{Error, Result, SolutionPanel, TimeMesh};

use crate::runner::{CheckOutcome, RunArtifacts};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub skorokhod_lower_max: f64,
    pub skorokhod_upper_max: f64,
    pub singularity_max: f64,
    pub z_cap_breaches: usize,
    pub regression_condition_max: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub seed: u64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub passed: bool,
    pub checks: Vec<CheckRecord>,
    pub residuals: Option<ResidualRecord>,
    pub runtime_s: f64,
}

impl ScenarioReport {
    pub fn from_run(name: &str, n_paths: usize, art: &RunArtifacts) -> Self {
        let residuals = art.panel.as_ref().map(|panel| {
            let d = &panel.diagnostics;
            ResidualRecord {
                skorokhod_lower_max: d.skorokhod_lower.iter().cloned().fold(0.0, f64::max),
                skorokhod_upper_max: d.skorokhod_upper.iter().cloned().fold(0.0, f64::max),
                singularity_max: d.max_singularity,
                z_cap_breaches: d.z_cap_breaches,
                regression_condition_max: d.max_condition,
            }
        });
        ScenarioReport {
            scenario: name.to_string(),
            seed: art.seed,
            n_steps: art.mesh.n_steps(),
            n_paths,
            passed: art.all_passed(),
            checks: art
                .checks
                .iter()
                .map(|c: &CheckOutcome| CheckRecord {
                    name: c.name.clone(),
                    passed: c.passed,
                    value: c.value,
                    tolerance: c.tolerance,
                })
                .collect(),
            residuals,
            runtime_s: art.runtime_s,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
        fs::write(path, text + "\n")
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
    }
}

/// 17 significant decimal digits: enough to reproduce the f64 bit pattern.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the (t, path, Y, Z.., dK+, dK-) panel, node-major, LF endings.
pub fn write_panel_csv(
    path: &Path,
    mesh: &TimeMesh,
    panel: &SolutionPanel,
    d: usize,
) -> Result<()> {
    let file = fs::File::create(path)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))?;
    let mut out = std::io::BufWriter::new(file);
    let mut header = String::from("t,path,y");
    for k in 0..d {
        header.push_str(&format!(",z{k}"));
    }
    header.push_str(",dk_plus,dk_minus\n");
    out.write_all(header.as_bytes())
        .map_err(|e| Error::Config(format!("write failed: {e}")))?;

    let n_paths = panel.y.cols();
    for i in 0..mesh.n_nodes() {
        for p in 0..n_paths {
            let mut line = format!("{},{p},{}", fmt_f64(mesh.t(i)), fmt_f64(panel.y.at(i, p)));
            for k in 0..d {
                line.push(',');
                line.push_str(&fmt_f64(panel.z.at(i, p)[k]));
            }
            let (kp, km) = if i < mesh.n_steps() {
                (panel.k_plus.at(i, p), panel.k_minus.at(i, p))
            } else {
                (0.0, 0.0)
            };
            line.push(',');
            line.push_str(&fmt_f64(kp));
            line.push(',');
            line.push_str(&fmt_f64(km));
            line.push('\n');
            out.write_all(line.as_bytes())
                .map_err(|e| Error::Config(format!("write failed: {e}")))?;
        }
    }
    Ok(())
}

/// One refinement row of the convergence table.
#[derive(Clone, Copy, Debug)]
pub struct ConvergenceRow {
    pub n_steps: usize,
    pub y0_error: f64,
    pub skorokhod_residual: f64,
    pub runtime_s: f64,
}

pub fn write_convergence_csv(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let mut text = String::from("n_steps,y0_error,skorokhod_residual,runtime_s\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{}\n",
            r.n_steps,
            fmt_f64(r.y0_error),
            fmt_f64(r.skorokhod_residual),
            fmt_f64(r.runtime_s)
        ));
    }
    fs::write(path, text)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}
