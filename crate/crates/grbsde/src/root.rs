//! Bracketed root finding for strictly increasing scalar maps: exponential
//! bracket growth followed by a bisection/secant hybrid.

use crate::error::{Error, Result};
use crate::tol;

#[derive(Clone, Copy, Debug)]
pub struct RootConfig {
    /// Residual tolerance: stop once |f(x) - target| <= tol.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RootConfig {
    fn default() -> Self {
        RootConfig {
            tol: tol::ROOT_TOL,
            max_iter: tol::ROOT_MAX_ITER,
        }
    }
}

/// Solves f(x) = target for an increasing `f` with domain [lo, +inf).
///
/// The bracket starts as [lo, lo + step0] and the width doubles until the
/// target is enclosed. `f` may fail (for example when it is itself a
/// quadrature); such failures propagate.
pub fn solve_increasing<F>(f: F, lo: f64, step0: f64, target: f64, cfg: &RootConfig) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let f_lo = f(lo)?;
    if f_lo > target + cfg.tol {
        return Err(Error::Range(format!(
            "target {target:.6e} below f({lo:.6e}) = {f_lo:.6e} for an increasing map"
        )));
    }
    if (f_lo - target).abs() <= cfg.tol {
        return Ok(lo);
    }

    // Grow the bracket.
    let mut a = lo;
    let mut fa = f_lo;
    let mut width = step0.max(f64::EPSILON);
    let mut b = lo + width;
    let mut fb = f(b)?;
    let mut doublings = 0usize;
    while fb < target {
        if doublings >= tol::BRACKET_MAX_DOUBLINGS || !fb.is_finite() || !b.is_finite() {
            return Err(Error::BracketFailed {
                doublings,
                lo: a,
                hi: b,
            });
        }
        a = b;
        fa = fb;
        width *= 2.0;
        b = lo + width;
        fb = f(b)?;
        doublings += 1;
    }

    // Bisection/secant hybrid on [a, b] with fa <= target <= fb. A plain
    // bisection step every other iteration keeps the bracket shrinking
    // geometrically, so a one-sided secant sequence cannot stall.
    let mut x = 0.5 * (a + b);
    for iter in 0..cfg.max_iter {
        let fx = f(x)?;
        if (fx - target).abs() <= cfg.tol * (1.0 + target.abs()) {
            return Ok(x);
        }
        if fx < target {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        if b - a <= f64::EPSILON * (1.0 + a.abs() + b.abs()) {
            return Ok(0.5 * (a + b));
        }
        x = 0.5 * (a + b);
        if iter % 2 == 0 {
            let denom = fb - fa;
            if denom.abs() > 0.0 {
                let secant = a + (target - fa) * (b - a) / denom;
                if secant.is_finite() && secant > a && secant < b {
                    x = secant;
                }
            }
        }
    }
    Err(Error::RootIterationCap {
        cap: cfg.max_iter,
        lo: a,
        hi: b,
    })
}
