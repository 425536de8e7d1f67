//! Deterministic time-indexed coefficient specifications. These describe the
//! rates alpha/beta, the level processes C and R, and barrier decomposition
//! components without embedding code, so scenario files can reference them
//! by identifier.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessSpec {
    Constant { value: f64 },
    /// Linear from `start` at t = 0 to `end` at t = t_end, constant after.
    Ramp { start: f64, end: f64, t_end: f64 },
    /// `before` for t < at, `after` for t >= at.
    Step { at: f64, before: f64, after: f64 },
}

impl ProcessSpec {
    pub fn constant(value: f64) -> Self {
        ProcessSpec::Constant { value }
    }

    pub fn zero() -> Self {
        ProcessSpec::Constant { value: 0.0 }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        match *self {
            ProcessSpec::Constant { value } => value,
            ProcessSpec::Ramp { start, end, t_end } => {
                if t_end <= 0.0 {
                    end
                } else {
                    let frac = (t / t_end).clamp(0.0, 1.0);
                    start + (end - start) * frac
                }
            }
            ProcessSpec::Step { at, before, after } => {
                if t < at {
                    before
                } else {
                    after
                }
            }
        }
    }

    /// True when the spec is identically zero.
    pub fn is_identically_zero(&self) -> bool {
        match *self {
            ProcessSpec::Constant { value } => value == 0.0,
            ProcessSpec::Ramp { start, end, .. } => start == 0.0 && end == 0.0,
            ProcessSpec::Step { before, after, .. } => before == 0.0 && after == 0.0,
        }
    }

    /// True when value_at is nondecreasing in t.
    pub fn is_nondecreasing(&self) -> bool {
        match *self {
            ProcessSpec::Constant { .. } => true,
            ProcessSpec::Ramp { start, end, .. } => end >= start,
            ProcessSpec::Step { before, after, .. } => after >= before,
        }
    }

    /// True when value_at(t) >= 0 for all t >= 0.
    pub fn is_nonnegative(&self) -> bool {
        match *self {
            ProcessSpec::Constant { value } => value >= 0.0,
            ProcessSpec::Ramp { start, end, .. } => start >= 0.0 && end >= 0.0,
            ProcessSpec::Step { before, after, .. } => before >= 0.0 && after >= 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_interpolates_and_saturates() {
        let p = ProcessSpec::Ramp {
            start: 1.0,
            end: 3.0,
            t_end: 2.0,
        };
        assert_eq!(p.value_at(0.0), 1.0);
        assert_eq!(p.value_at(1.0), 2.0);
        assert_eq!(p.value_at(5.0), 3.0);
        assert!(p.is_nondecreasing());
    }

    #[test]
    fn step_switches_at_threshold() {
        let p = ProcessSpec::Step {
            at: 0.5,
            before: 0.0,
            after: 2.0,
        };
        assert_eq!(p.value_at(0.49), 0.0);
        assert_eq!(p.value_at(0.5), 2.0);
    }
}
