//! Brownian path ensembles and the increasing driver process A, generated by
//! a counter-based scheme so that identical (seed, mesh, n_paths) inputs give
//! bit-identical ensembles across runs and thread counts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dot, Grid, VecGrid};
use crate::mesh::TimeMesh;
use crate::rng::standard_normal;

/// Shape of the continuous nondecreasing process A driving the g dA term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ASpec {
    /// A_t = t: g dA becomes a second absolutely continuous drift.
    Time,
    /// A climbs linearly from 0 to `height` over [t0, t1], flat outside.
    Ramp { t0: f64, t1: f64, height: f64 },
    /// A jump of `height` at time `at`, smoothed over the mesh interval
    /// containing `at`.
    Step { at: f64, height: f64 },
    /// A_t = scale * max_{s <= t} B^1_s: a pathwise functional of the
    /// driving noise, adapted by construction.
    BrownianRunningMax { scale: f64 },
}

impl ASpec {
    fn deterministic_value(&self, t: f64) -> Option<f64> {
        match *self {
            ASpec::Time => Some(t),
            ASpec::Ramp { t0, t1, height } => {
                if t1 <= t0 {
                    Some(if t >= t1 { height } else { 0.0 })
                } else {
                    Some(height * ((t - t0) / (t1 - t0)).clamp(0.0, 1.0))
                }
            }
            ASpec::Step { .. } | ASpec::BrownianRunningMax { .. } => None,
        }
    }

    /// Per-step increments when A does not depend on the path; None for
    /// pathwise specs. Step jumps land in the mesh interval containing the
    /// jump time (the final interval for jumps at or past the horizon).
    pub fn deterministic_increments(&self, mesh: &TimeMesh) -> Option<Vec<f64>> {
        let n_steps = mesh.n_steps();
        match *self {
            ASpec::Time | ASpec::Ramp { .. } => Some(
                (0..n_steps)
                    .map(|i| {
                        (self.deterministic_value(mesh.t(i + 1)).unwrap()
                            - self.deterministic_value(mesh.t(i)).unwrap())
                        .max(0.0)
                    })
                    .collect(),
            ),
            ASpec::Step { at, height } => {
                let mut inc = vec![0.0; n_steps];
                let mut idx = n_steps - 1;
                for i in 0..n_steps {
                    if at < mesh.t(i + 1) {
                        idx = i;
                        break;
                    }
                }
                inc[idx] = height;
                Some(inc)
            }
            ASpec::BrownianRunningMax { .. } => None,
        }
    }
}

/// Per-path Brownian increments, cumulated values and A increments on a mesh.
#[derive(Clone, Debug)]
pub struct PathEnsemble {
    mesh: TimeMesh,
    n_paths: usize,
    d: usize,
    seed: u64,
    /// Brownian increments, steps x paths x d.
    dw: VecGrid,
    /// Brownian values at the nodes, nodes x paths x d (row 0 is zero).
    w: VecGrid,
    /// Increments of A, steps x paths.
    da: Grid,
}

/// Simulates `n_paths` d-dimensional Brownian paths plus the A increments
/// prescribed by `a_spec`.
pub fn simulate_paths(
    mesh: &TimeMesh,
    n_paths: usize,
    d: usize,
    seed: u64,
    a_spec: ASpec,
) -> Result<PathEnsemble> {
    if n_paths == 0 || d == 0 {
        return Err(Error::Config(format!(
            "ensemble needs n_paths >= 1 and d >= 1, got {n_paths} paths, d = {d}"
        )));
    }
    let n_steps = mesh.n_steps();
    let mut dw = VecGrid::zeros(n_steps, n_paths, d);
    let mut w = VecGrid::zeros(mesh.n_nodes(), n_paths, d);

    // Each (step, path, component) cell is keyed independently, so parallel
    // fill order cannot change the output.
    let sqrt_dts: Vec<f64> = (0..n_steps).map(|i| mesh.dt(i).sqrt()).collect();
    for i in 0..n_steps {
        let sdt = sqrt_dts[i];
        let row = dw.row_mut(i);
        row.par_chunks_mut(d).enumerate().for_each(|(p, cell)| {
            for (k, slot) in cell.iter_mut().enumerate() {
                *slot = sdt * standard_normal(seed, p as u64, i as u64, k as u64);
            }
        });
    }
    for i in 0..n_steps {
        for p in 0..n_paths {
            for k in 0..d {
                let prev = w.at(i, p)[k];
                let inc = dw.at(i, p)[k];
                w.at_mut(i + 1, p)[k] = prev + inc;
            }
        }
    }

    let mut da = Grid::zeros(n_steps, n_paths);
    match a_spec {
        ASpec::Time | ASpec::Ramp { .. } | ASpec::Step { .. } => {
            if let ASpec::Step { height, .. } = a_spec {
                if !(height >= 0.0) {
                    return Err(Error::Config(format!(
                        "step A-spec height {height} is negative"
                    )));
                }
            }
            let incs = a_spec.deterministic_increments(mesh).unwrap();
            for (i, inc) in incs.into_iter().enumerate() {
                da.row_mut(i).fill(inc);
            }
        }
        ASpec::BrownianRunningMax { scale } => {
            if !(scale >= 0.0) {
                return Err(Error::Config(format!("running-max A-spec scale {scale} is negative")));
            }
            for p in 0..n_paths {
                let mut running = 0.0f64; // B_0 = 0
                for i in 0..n_steps {
                    let next = running.max(w.at(i + 1, p)[0]);
                    da.set(i, p, scale * (next - running));
                    running = next;
                }
            }
        }
    }

    Ok(PathEnsemble {
        mesh: mesh.clone(),
        n_paths,
        d,
        seed,
        dw,
        w,
        da,
    })
}

impl PathEnsemble {
    pub fn mesh(&self) -> &TimeMesh {
        &self.mesh
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Brownian increment over step i for a path.
    #[inline]
    pub fn dw(&self, step: usize, path: usize) -> &[f64] {
        self.dw.at(step, path)
    }

    /// Brownian value at node i for a path.
    #[inline]
    pub fn w(&self, node: usize, path: usize) -> &[f64] {
        self.w.at(node, path)
    }

    /// A increment over step i for a path.
    #[inline]
    pub fn da(&self, step: usize, path: usize) -> f64 {
        self.da.at(step, path)
    }

    pub fn da_grid(&self) -> &Grid {
        &self.da
    }

    /// Total A mass per path.
    pub fn a_total(&self, path: usize) -> f64 {
        (0..self.mesh.n_steps()).map(|i| self.da.at(i, path)).sum()
    }
}

/// Control candidate for the exponential weight: zero, a fixed direction of
/// norm <= 1, or a per-(step, path) field such as the z-feedback direction.
#[derive(Clone, Debug)]
pub enum PiProcess {
    Zero,
    ConstantDir(Vec<f64>),
    /// steps x paths x d values.
    PerPath(VecGrid),
}

impl PiProcess {
    fn validate(&self, d: usize, n_steps: usize, n_paths: usize) -> Result<()> {
        match self {
            PiProcess::Zero => Ok(()),
            PiProcess::ConstantDir(v) => {
                if v.len() != d {
                    return Err(Error::Shape(format!(
                        "pi direction has {} components, ensemble has d = {d}",
                        v.len()
                    )));
                }
                let n = crate::grid::norm(v);
                if n > 1.0 + 1e-12 {
                    return Err(Error::Config(format!("|pi| = {n} exceeds 1")));
                }
                Ok(())
            }
            PiProcess::PerPath(g) => {
                if g.rows() != n_steps || g.cols() != n_paths || g.dim() != d {
                    return Err(Error::Shape(format!(
                        "per-path pi is {}x{}x{}, ensemble needs {n_steps}x{n_paths}x{d}",
                        g.rows(),
                        g.cols(),
                        g.dim()
                    )));
                }
                for i in 0..n_steps {
                    for p in 0..n_paths {
                        let n = crate::grid::norm(g.at(i, p));
                        if n > 1.0 + 1e-12 {
                            return Err(Error::Config(format!(
                                "|pi| = {n} exceeds 1 at step {i}, path {p}"
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    #[inline]
    fn at<'a>(&'a self, step: usize, path: usize, zero: &'a [f64]) -> &'a [f64] {
        match self {
            PiProcess::Zero => zero,
            PiProcess::ConstantDir(v) => v,
            PiProcess::PerPath(g) => g.at(step, path),
        }
    }
}

/// Discrete exponential weight per path,
/// Gamma_{t,s} = exp( sum R_i <pi_i, dB_i> - 1/2 sum R_i^2 |pi_i|^2 dt_i ),
/// with left-point coefficient evaluation. `r_at` holds R at the mesh nodes.
pub fn gamma_weights(
    ens: &PathEnsemble,
    r_at: &[f64],
    pi: &PiProcess,
    t_idx: usize,
    s_idx: usize,
) -> Result<Vec<f64>> {
    let n_steps = ens.mesh().n_steps();
    if t_idx > s_idx || s_idx > n_steps {
        return Err(Error::Config(format!(
            "gamma weight needs t_idx <= s_idx <= {n_steps}, got ({t_idx}, {s_idx})"
        )));
    }
    if r_at.len() < s_idx {
        return Err(Error::Shape(format!(
            "R has {} nodes, need at least {s_idx}",
            r_at.len()
        )));
    }
    pi.validate(ens.d(), n_steps, ens.n_paths())?;

    let zero = vec![0.0; ens.d()];
    let out: Vec<f64> = (0..ens.n_paths())
        .map(|p| {
            let mut log_gamma = 0.0;
            for i in t_idx..s_idx {
                let r = r_at[i];
                let pi_i = pi.at(i, p, &zero);
                let pi_norm2: f64 = pi_i.iter().map(|x| x * x).sum();
                log_gamma += r * dot(pi_i, ens.dw(i, p)) - 0.5 * r * r * pi_norm2 * ens.mesh().dt(i);
            }
            log_gamma.exp()
        })
        .collect();
    Ok(out)
}

/// Evaluates a deterministic process spec at every mesh node.
pub fn values_on_mesh(spec: &crate::process::ProcessSpec, mesh: &TimeMesh) -> Vec<f64> {
    mesh.times().iter().map(|&t| spec.value_at(t)).collect()
}
