//! Time discretization of [0, T].

use crate::error::{Error, Result};

/// Strictly increasing partition 0 = t_0 < t_1 < ... < t_n = T.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeMesh {
    times: Vec<f64>,
}

impl TimeMesh {
    /// Uniform mesh with n_steps intervals of width T / n_steps.
    pub fn uniform(t_max: f64, n_steps: usize) -> Result<Self> {
        if !(t_max > 0.0) {
            return Err(Error::Config(format!("mesh horizon must be positive, got {t_max}")));
        }
        if n_steps == 0 {
            return Err(Error::Config("mesh needs at least one step".into()));
        }
        let dt = t_max / n_steps as f64;
        let mut times: Vec<f64> = (0..=n_steps).map(|i| i as f64 * dt).collect();
        // Pin the endpoint exactly.
        times[n_steps] = t_max;
        Ok(TimeMesh { times })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times[0] != 0.0 {
            return Err(Error::Config("mesh must start at 0 with at least two nodes".into()));
        }
        if !times.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Config("mesh times must be strictly increasing".into()));
        }
        Ok(TimeMesh { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_nodes(&self) -> usize {
        self.times.len()
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    #[inline]
    pub fn t(&self, i: usize) -> f64 {
        self.times[i]
    }

    #[inline]
    pub fn dt(&self, i: usize) -> f64 {
        self.times[i + 1] - self.times[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_quarters() {
        let m = TimeMesh::uniform(1.0, 4).unwrap();
        assert_eq!(m.times(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(m.n_steps(), 4);
    }

    #[test]
    fn single_step() {
        let m = TimeMesh::uniform(2.0, 1).unwrap();
        assert_eq!(m.times(), &[0.0, 2.0]);
    }

    #[test]
    fn hundred_steps() {
        let m = TimeMesh::uniform(1.0, 100).unwrap();
        assert_eq!(m.n_nodes(), 101);
        assert!((m.dt(37) - 0.01).abs() < 1e-15);
        assert_eq!(m.horizon(), 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(TimeMesh::uniform(0.0, 4).is_err());
        assert!(TimeMesh::uniform(1.0, 0).is_err());
        assert!(TimeMesh::from_times(vec![0.0, 0.5, 0.5]).is_err());
    }
}
