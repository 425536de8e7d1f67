//! Recombining binomial tree over the scaled random walk: the exact-oracle
//! substrate for one-dimensional problems.

use crate::error::{Error, Result};

/// Levels 0..=n_steps; level i holds i + 1 nodes with walk states
/// (2 j - i) sqrt(dt), each up/down move having probability 1/2.
#[derive(Clone, Debug)]
pub struct BinomialTree {
    t_max: f64,
    n_steps: usize,
    dt: f64,
    sqrt_dt: f64,
}

pub fn binomial_tree(t_max: f64, n_steps: usize) -> Result<BinomialTree> {
    if !(t_max > 0.0) || n_steps == 0 {
        return Err(Error::Config(format!(
            "tree needs t_max > 0 and n_steps >= 1, got ({t_max}, {n_steps})"
        )));
    }
    let dt = t_max / n_steps as f64;
    Ok(BinomialTree {
        t_max,
        n_steps,
        dt,
        sqrt_dt: dt.sqrt(),
    })
}

impl BinomialTree {
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn sqrt_dt(&self) -> f64 {
        self.sqrt_dt
    }

    pub fn t(&self, level: usize) -> f64 {
        if level == self.n_steps {
            self.t_max
        } else {
            level as f64 * self.dt
        }
    }

    /// Walk state at (level, j), j = 0..=level counting down-moves first.
    #[inline]
    pub fn state(&self, level: usize, j: usize) -> f64 {
        (2.0 * j as f64 - level as f64) * self.sqrt_dt
    }

    pub fn level_states(&self, level: usize) -> Vec<f64> {
        (0..=level).map(|j| self.state(level, j)).collect()
    }

    /// Total node count (n+1)(n+2)/2.
    pub fn node_count(&self) -> usize {
        (self.n_steps + 1) * (self.n_steps + 2) / 2
    }

    /// Probability weights of the terminal states: binomial(n, j) / 2^n.
    pub fn terminal_weights(&self) -> Vec<f64> {
        let n = self.n_steps;
        let mut w = vec![0.0f64; n + 1];
        w[0] = 0.5f64.powi(n as i32);
        for j in 1..=n {
            w[j] = w[j - 1] * (n - j + 1) as f64 / j as f64;
        }
        w
    }
}
