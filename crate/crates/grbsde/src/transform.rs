//! The H/F/G transform calculus.
//!
//! For a growth profile (D, phi, psi) the library works with
//!
//! * H(x)    = int_D^x dr / phi(r), increasing from H(D) = 0,
//! * F(x, c) = int_D^x exp(c * int_D^t psi(r) dr) dt, increasing in x,
//! * G(x, c, eta) = H^{-1}( H(F^{-1}(x, c)) - eta ),
//!
//! together with the inverse maps and the closed-form partial derivatives of
//! G. G converts a conditional-expectation envelope of the transformed
//! terminal value back into a solution bound of the original quadratic-growth
//! equation; the partials feed the explicit construction of (x, z, k).
//!
//! Recognized families (phi in {constant, r, r ln r, e^r}, psi in {0, 1, r})
//! dispatch to analytic formulas; anything else is evaluated by adaptive
//! quadrature and bracketed root searches.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::process::ProcessSpec;
use crate::quad::{integrate, QuadConfig};
use crate::root::{solve_increasing, RootConfig};
use crate::tol;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Growth function phi on [D, +inf).
#[derive(Clone)]
pub enum PhiFamily {
    /// phi(r) = k with k > 0.
    Constant(f64),
    /// phi(r) = r; requires D > 0 so that H stays finite.
    Linear,
    /// phi(r) = r ln r; requires D > 1.
    RLogR,
    /// phi(r) = e^r.
    Exponential,
    /// Arbitrary continuous phi > 0 on (D, inf); derivative optional
    /// (central differences otherwise).
    Custom {
        phi: ScalarFn,
        phi_prime: Option<ScalarFn>,
    },
}

impl fmt::Debug for PhiFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiFamily::Constant(k) => write!(f, "PhiFamily::Constant({k})"),
            PhiFamily::Linear => write!(f, "PhiFamily::Linear"),
            PhiFamily::RLogR => write!(f, "PhiFamily::RLogR"),
            PhiFamily::Exponential => write!(f, "PhiFamily::Exponential"),
            PhiFamily::Custom { .. } => write!(f, "PhiFamily::Custom"),
        }
    }
}

impl PhiFamily {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            PhiFamily::Constant(k) => *k,
            PhiFamily::Linear => r,
            PhiFamily::RLogR => r * r.ln(),
            PhiFamily::Exponential => r.exp(),
            PhiFamily::Custom { phi, .. } => phi(r),
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match self {
            PhiFamily::Constant(_) => 0.0,
            PhiFamily::Linear => 1.0,
            PhiFamily::RLogR => r.ln() + 1.0,
            PhiFamily::Exponential => r.exp(),
            PhiFamily::Custom {
                phi,
                phi_prime: Some(dp),
            } => {
                let _ = phi;
                dp(r)
            }
            PhiFamily::Custom {
                phi,
                phi_prime: None,
            } => {
                let h = 1e-6 * (1.0 + r.abs());
                (phi(r + h) - phi(r - h)) / (2.0 * h)
            }
        }
    }
}

/// Weight function psi on [D, +inf).
#[derive(Clone)]
pub enum PsiFamily {
    Zero,
    One,
    /// psi(r) = r.
    Linear,
    Custom { psi: ScalarFn },
}

impl fmt::Debug for PsiFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsiFamily::Zero => write!(f, "PsiFamily::Zero"),
            PsiFamily::One => write!(f, "PsiFamily::One"),
            PsiFamily::Linear => write!(f, "PsiFamily::Linear"),
            PsiFamily::Custom { .. } => write!(f, "PsiFamily::Custom"),
        }
    }
}

impl PsiFamily {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            PsiFamily::Zero => 0.0,
            PsiFamily::One => 1.0,
            PsiFamily::Linear => r,
            PsiFamily::Custom { psi } => psi(r),
        }
    }
}

/// Total mass of 1/phi over [D, inf): the upper end of the range of H.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MassBound {
    Infinite,
    Finite(f64),
    /// Custom families: not computed a priori; bracket growth reports
    /// exceedance at call time.
    Unknown,
}

/// Cached primitive Psi(t) = int_D^t psi(r) dr on a uniform grid, built
/// eagerly at construction so evaluation never mutates the spec. Custom psi
/// only; the recognized families have analytic primitives.
#[derive(Clone, Debug)]
struct PsiCache {
    lo: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

// 2048 nodes over [D, D + 64] gives a spacing of ~0.03; the quartic
// interpolation error of the monotone cubic stays near 1e-9 for smooth psi.
// Arguments beyond the cache continue by direct quadrature.
const PSI_CACHE_POINTS: usize = 2048;
const PSI_CACHE_SPAN: f64 = 64.0;

impl PsiCache {
    fn build(psi: &PsiFamily, d: f64, quad: &QuadConfig) -> Result<Self> {
        let step = PSI_CACHE_SPAN / (PSI_CACHE_POINTS - 1) as f64;
        let mut values = Vec::with_capacity(PSI_CACHE_POINTS);
        values.push(0.0);
        let mut acc = 0.0;
        for i in 1..PSI_CACHE_POINTS {
            let a = d + (i - 1) as f64 * step;
            let b = d + i as f64 * step;
            acc += integrate(|t| psi.eval(t), a, b, quad)?;
            values.push(acc);
        }
        let slopes = monotone_cubic_slopes(&values, step);
        Ok(PsiCache {
            lo: d,
            step,
            values,
            slopes,
        })
    }

    /// Monotone cubic interpolation inside the grid; exactness at the nodes.
    fn eval(&self, t: f64) -> f64 {
        let n = self.values.len();
        let hi = self.lo + (n - 1) as f64 * self.step;
        debug_assert!(t >= self.lo - 1e-12 && t <= hi + 1e-12);
        let s = ((t - self.lo) / self.step).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let u = s - i as f64;
        let h = self.step;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i], self.slopes[i + 1]);
        let u2 = u * u;
        let u3 = u2 * u;
        y0 * (2.0 * u3 - 3.0 * u2 + 1.0)
            + m0 * h * (u3 - 2.0 * u2 + u)
            + y1 * (-2.0 * u3 + 3.0 * u2)
            + m1 * h * (u3 - u2)
    }

    fn hi(&self) -> f64 {
        self.lo + (self.values.len() - 1) as f64 * self.step
    }
}

/// Fritsch-Carlson slopes for monotone cubic interpolation on a uniform grid.
fn monotone_cubic_slopes(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut delta = vec![0.0; n - 1];
    for i in 0..n - 1 {
        delta[i] = (y[i + 1] - y[i]) / h;
    }
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] <= 0.0 {
            m[i] = 0.0;
        } else {
            m[i] = 0.5 * (delta[i - 1] + delta[i]);
        }
    }
    // Limit slopes so the interpolant preserves monotonicity.
    for i in 0..n - 1 {
        if delta[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
        } else {
            let a = m[i] / delta[i];
            let b = m[i + 1] / delta[i];
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                m[i] = tau * a * delta[i];
                m[i + 1] = tau * b * delta[i];
            }
        }
    }
    m
}

/// Growth-envelope data: domain floor D, the pair (phi, psi), and the
/// coefficient processes alpha, beta (rates for d_eta = alpha ds + beta dA),
/// C (nondecreasing level) and R (nonnegative level).
#[derive(Clone, Debug)]
pub struct EnvelopeSpec {
    domain_floor: f64,
    phi: PhiFamily,
    psi: PsiFamily,
    alpha: ProcessSpec,
    beta: ProcessSpec,
    c: ProcessSpec,
    r: ProcessSpec,
    psi_cache: Option<PsiCache>,
    quad: QuadConfig,
    root: RootConfig,
}

/// A candidate argument (x, c, eta) for G. Admissible iff
/// H(F^{-1}(x, c)) >= eta, up to the membership slack.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformPoint {
    pub x: f64,
    pub c: f64,
    pub eta: f64,
}

impl TransformPoint {
    pub fn new(x: f64, c: f64, eta: f64) -> Self {
        TransformPoint { x, c, eta }
    }
}

/// The four closed-form partials of G at a point.
#[derive(Clone, Copy, Debug)]
pub struct GGradient {
    pub d_x: f64,
    pub d2_xx: f64,
    pub d_c: f64,
    pub d_eta: f64,
}

impl EnvelopeSpec {
    /// Builds a spec with zero coefficient processes; use the with_* methods
    /// to attach alpha, beta, C and R.
    pub fn new(domain_floor: f64, phi: PhiFamily, psi: PsiFamily) -> Result<Self> {
        if !(domain_floor >= 0.0) {
            return Err(Error::Config(format!(
                "domain floor must be nonnegative, got {domain_floor}"
            )));
        }
        match &phi {
            PhiFamily::Constant(k) if !(*k > 0.0) => {
                return Err(Error::Config(format!("constant phi must be positive, got {k}")));
            }
            PhiFamily::Linear if !(domain_floor > 0.0) => {
                return Err(Error::Config(
                    "phi(r) = r needs a domain floor D > 0: H diverges at 0".into(),
                ));
            }
            PhiFamily::RLogR if !(domain_floor > 1.0) => {
                return Err(Error::Config(
                    "phi(r) = r ln r needs a domain floor D > 1".into(),
                ));
            }
            PhiFamily::Custom { phi: func, .. } => {
                for probe in [domain_floor + 1e-6, domain_floor + 1.0, domain_floor + 10.0] {
                    if !(func(probe) > 0.0) {
                        return Err(Error::Config(format!(
                            "custom phi must be positive above the floor; phi({probe}) = {}",
                            func(probe)
                        )));
                    }
                }
            }
            _ => {}
        }
        let quad = QuadConfig::default();
        let psi_cache = match &psi {
            PsiFamily::Custom { .. } => Some(PsiCache::build(&psi, domain_floor, &quad)?),
            _ => None,
        };
        Ok(EnvelopeSpec {
            domain_floor,
            phi,
            psi,
            alpha: ProcessSpec::zero(),
            beta: ProcessSpec::zero(),
            c: ProcessSpec::zero(),
            r: ProcessSpec::zero(),
            psi_cache,
            quad,
            root: RootConfig::default(),
        })
    }

    pub fn with_alpha(mut self, alpha: ProcessSpec) -> Result<Self> {
        if !alpha.is_nonnegative() {
            return Err(Error::Config("alpha must be nonnegative".into()));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn with_beta(mut self, beta: ProcessSpec) -> Result<Self> {
        if !beta.is_nonnegative() {
            return Err(Error::Config("beta must be nonnegative".into()));
        }
        self.beta = beta;
        Ok(self)
    }

    pub fn with_c(mut self, c: ProcessSpec) -> Result<Self> {
        if !c.is_nonnegative() || !c.is_nondecreasing() {
            return Err(Error::Config(
                "C must be nonnegative and nondecreasing".into(),
            ));
        }
        self.c = c;
        Ok(self)
    }

    pub fn with_r(mut self, r: ProcessSpec) -> Result<Self> {
        if !r.is_nonnegative() {
            return Err(Error::Config("R must be nonnegative".into()));
        }
        self.r = r;
        Ok(self)
    }

    pub fn domain_floor(&self) -> f64 {
        self.domain_floor
    }

    pub fn phi(&self) -> &PhiFamily {
        &self.phi
    }

    pub fn psi(&self) -> &PsiFamily {
        &self.psi
    }

    pub fn alpha(&self) -> &ProcessSpec {
        &self.alpha
    }

    pub fn beta(&self) -> &ProcessSpec {
        &self.beta
    }

    pub fn c_process(&self) -> &ProcessSpec {
        &self.c
    }

    pub fn r_process(&self) -> &ProcessSpec {
        &self.r
    }

    /// Upper end of the range of H.
    pub fn h_mass(&self) -> MassBound {
        match &self.phi {
            PhiFamily::Constant(_) | PhiFamily::Linear | PhiFamily::RLogR => MassBound::Infinite,
            PhiFamily::Exponential => MassBound::Finite((-self.domain_floor).exp()),
            PhiFamily::Custom { .. } => MassBound::Unknown,
        }
    }

    fn check_above_floor(&self, x: f64, what: &str) -> Result<()> {
        if !(x >= self.domain_floor) {
            return Err(Error::Domain(format!(
                "{what}: argument {x} below the domain floor {}",
                self.domain_floor
            )));
        }
        Ok(())
    }

    /// H(x) = int_D^x dr / phi(r).
    pub fn h(&self, x: f64) -> Result<f64> {
        self.check_above_floor(x, "H")?;
        let d = self.domain_floor;
        Ok(match &self.phi {
            PhiFamily::Constant(k) => (x - d) / k,
            PhiFamily::Linear => (x / d).ln(),
            PhiFamily::RLogR => (x.ln() / d.ln()).ln(),
            PhiFamily::Exponential => (-d).exp() - (-x).exp(),
            PhiFamily::Custom { phi, .. } => integrate(|r| 1.0 / phi(r), d, x, &self.quad)?,
        })
    }

    /// H^{-1}(y): the x >= D with H(x) = y, up to the root tolerance for
    /// numeric families.
    pub fn h_inv(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::Domain(format!("H^-1: argument {y} is negative")));
        }
        if let MassBound::Finite(mass) = self.h_mass() {
            if y >= mass {
                return Err(Error::Range(format!(
                    "H^-1: argument {y} reaches the total mass {mass:.6e} of 1/phi"
                )));
            }
        }
        let d = self.domain_floor;
        Ok(match &self.phi {
            PhiFamily::Constant(k) => d + k * y,
            PhiFamily::Linear => d * y.exp(),
            PhiFamily::RLogR => (d.ln() * y.exp()).exp(),
            PhiFamily::Exponential => -((-d).exp() - y).ln(),
            PhiFamily::Custom { .. } => {
                solve_increasing(|x| self.h(x), d, 1.0, y, &self.root)?
            }
        })
    }

    /// Psi(t) = int_D^t psi(r) dr, the inner primitive of F.
    pub fn psi_primitive(&self, t: f64) -> Result<f64> {
        self.check_above_floor(t, "Psi")?;
        let d = self.domain_floor;
        Ok(match &self.psi {
            PsiFamily::Zero => 0.0,
            PsiFamily::One => t - d,
            PsiFamily::Linear => 0.5 * (t * t - d * d),
            PsiFamily::Custom { psi } => {
                let cache = self.psi_cache.as_ref().expect("cache built at construction");
                if t <= cache.hi() {
                    cache.eval(t)
                } else {
                    cache.values[cache.values.len() - 1]
                        + integrate(|r| psi(r), cache.hi(), t, &self.quad)?
                }
            }
        })
    }

    /// F(x, c) = int_D^x exp(c Psi(t)) dt.
    pub fn f(&self, x: f64, c: f64) -> Result<f64> {
        self.check_above_floor(x, "F")?;
        if !(c >= 0.0) {
            return Err(Error::Domain(format!("F: weight c = {c} is negative")));
        }
        let d = self.domain_floor;
        if c == 0.0 {
            return Ok(x - d);
        }
        Ok(match &self.psi {
            PsiFamily::Zero => x - d,
            PsiFamily::One => (c * (x - d)).exp_m1() / c,
            PsiFamily::Linear | PsiFamily::Custom { .. } => {
                // The integrand peaks at the upper limit; once the exponent
                // leaves f64 range the value is +inf and the quadrature has
                // nothing to resolve. Bracket searches rely on this clean
                // overflow to step back into representable territory.
                if c * self.psi_primitive(x)? > 690.0 {
                    return Ok(f64::INFINITY);
                }
                integrate(
                    |t| {
                        let p = self
                            .psi_primitive(t)
                            .expect("t inside [D, x] stays in domain");
                        (c * p).exp()
                    },
                    d,
                    x,
                    &self.quad,
                )?
            }
        })
    }

    /// F^{-1}(y, c): the x >= D with F(x, c) = y.
    pub fn f_inv(&self, y: f64, c: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::Domain(format!("F^-1: argument {y} is negative")));
        }
        if !(c >= 0.0) {
            return Err(Error::Domain(format!("F^-1: weight c = {c} is negative")));
        }
        let d = self.domain_floor;
        if c == 0.0 {
            return Ok(d + y);
        }
        Ok(match &self.psi {
            PsiFamily::Zero => d + y,
            PsiFamily::One => d + (c * y).ln_1p() / c,
            PsiFamily::Linear | PsiFamily::Custom { .. } => {
                solve_increasing(|x| self.f(x, c), d, 1.0, y, &self.root)?
            }
        })
    }

    /// Signed admissibility margin H(F^{-1}(x, c)) - eta of a point.
    pub fn membership_deficit(&self, p: TransformPoint) -> Result<f64> {
        let u = self.f_inv(p.x, p.c)?;
        Ok(self.h(u)? - p.eta)
    }

    /// G(x, c, eta) = H^{-1}(H(F^{-1}(x, c)) - eta). Deficits within the
    /// membership slack clamp to the domain floor; larger ones are errors.
    pub fn g(&self, p: TransformPoint) -> Result<f64> {
        let deficit = self.membership_deficit(p)?;
        if deficit < -tol::MEMBERSHIP_SLACK {
            return Err(Error::NotAdmissible {
                deficit,
                context: format!("(x={}, c={}, eta={})", p.x, p.c, p.eta),
            });
        }
        self.h_inv(deficit.max(0.0))
    }

    /// Closed-form partial derivatives of G; the dG/dc inner integral is
    /// evaluated by quadrature.
    pub fn g_gradient(&self, p: TransformPoint) -> Result<GGradient> {
        let u = self.f_inv(p.x, p.c)?;
        let g_val = self.g(p)?;
        let phi_g = self.phi.eval(g_val);
        let phi_u = self.phi.eval(u);
        let psi_u = self.psi.eval(u);
        let big_psi_u = self.psi_primitive(u)?;

        let d_x = phi_g * (-p.c * big_psi_u).exp() / phi_u;
        let d2_xx = d_x * d_x / phi_g
            * (self.phi.derivative(g_val) - self.phi.derivative(u) - p.c * phi_u * psi_u);
        let weighted = integrate(
            |t| {
                let pt = self
                    .psi_primitive(t)
                    .expect("t inside [D, u] stays in domain");
                (p.c * pt).exp() * pt
            },
            self.domain_floor,
            u,
            &self.quad,
        )?;
        let d_c = -d_x * weighted;
        let d_eta = -phi_g;
        Ok(GGradient {
            d_x,
            d2_xx,
            d_c,
            d_eta,
        })
    }

    /// Transformed terminal bound F(H^{-1}(H(lambda) + eta_T), c_T).
    pub fn lambda_bar(&self, lambda: f64, eta_t: f64, c_t: f64) -> Result<f64> {
        self.check_above_floor(lambda, "lambda_bar")?;
        if !(eta_t >= 0.0) {
            return Err(Error::Domain(format!(
                "lambda_bar: eta_T = {eta_t} is negative"
            )));
        }
        // eta_T = 0 short-circuits the H round trip, so the identity
        // lambda_bar = F(lambda, C_T) (and = lambda - D when C_T = 0 too)
        // holds without rounding.
        if eta_t == 0.0 {
            return self.f(lambda, c_t);
        }
        let shifted = self.h(lambda)? + eta_t;
        if let MassBound::Finite(mass) = self.h_mass() {
            if shifted >= mass {
                return Err(Error::Range(format!(
                    "lambda_bar: H(lambda) + eta_T = {shifted:.6e} reaches the total mass \
                     {mass:.6e}; eta_T exceeds the remaining mass of 1/phi above lambda"
                )));
            }
        }
        self.f(self.h_inv(shifted)?, c_t)
    }

    /// varphi(x, c) = phi'(x) + c phi(x) psi(x), the monotonicity functional
    /// controlling the sign of the compensator density.
    pub fn varphi(&self, x: f64, c: f64) -> f64 {
        self.phi.derivative(x) + c * self.phi.eval(x) * self.psi.eval(x)
    }
}

/// Outcome of the varphi monotonicity scan.
#[derive(Clone, Copy, Debug)]
pub struct MonotoneReport {
    pub nondecreasing: bool,
    /// (x_prev, x, c, drop) at the first decrease beyond tolerance.
    pub witness: Option<(f64, f64, f64, f64)>,
}

/// Scans x -> varphi(x, c) for monotonicity on a geometric grid over
/// [D, D + 1e3], for c in {0, 1, ..., floor(c_max)} plus c_max itself.
pub fn check_varphi_monotone(env: &EnvelopeSpec, c_max: f64, grid_n: usize) -> MonotoneReport {
    let d = env.domain_floor();
    let span: f64 = 1e3;
    let n = grid_n.max(2);
    let xs: Vec<f64> = (0..n)
        .map(|i| d + (1.0 + span).powf(i as f64 / (n - 1) as f64) - 1.0)
        .collect();

    let mut cs: Vec<f64> = (0..=c_max.max(0.0).floor() as u64).map(|k| k as f64).collect();
    if c_max > 0.0 && (c_max - c_max.floor()).abs() > 0.0 {
        cs.push(c_max);
    }

    for &c in &cs {
        let mut prev = env.varphi(xs[0], c);
        for i in 1..xs.len() {
            let cur = env.varphi(xs[i], c);
            let slack = tol::VARPHI_MONO_TOL * (1.0 + prev.abs());
            if cur < prev - slack {
                return MonotoneReport {
                    nondecreasing: false,
                    witness: Some((xs[i - 1], xs[i], c, prev - cur)),
                };
            }
            prev = cur;
        }
    }
    MonotoneReport {
        nondecreasing: true,
        witness: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(phi: PhiFamily, psi: PsiFamily, d: f64) -> EnvelopeSpec {
        EnvelopeSpec::new(d, phi, psi).unwrap()
    }

    #[test]
    fn h_closed_forms() {
        let e = env(PhiFamily::Linear, PsiFamily::One, 1.0);
        assert!((e.h(core::f64::consts::E).unwrap() - 1.0).abs() < 1e-14);

        let e = env(PhiFamily::Constant(1.0), PsiFamily::One, 0.0);
        assert!((e.h(3.5).unwrap() - 3.5).abs() < 1e-14);

        let ee = core::f64::consts::E;
        let e = env(PhiFamily::RLogR, PsiFamily::One, ee);
        assert!((e.h(ee.powf(ee)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn h_inv_closed_forms() {
        let e = env(PhiFamily::Linear, PsiFamily::One, 1.0);
        assert!((e.h_inv(1.0).unwrap() - core::f64::consts::E).abs() < 1e-12);
        assert_eq!(e.h_inv(0.0).unwrap(), 1.0);

        let e = env(PhiFamily::Exponential, PsiFamily::One, 0.0);
        // H(x) = 1 - e^{-x}; H^-1(0.5) = ln 2.
        assert!((e.h_inv(0.5).unwrap() - core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn h_inv_numeric_cross_check() {
        // Same exponential family via the numeric path.
        let f: ScalarFn = Arc::new(|r: f64| r.exp());
        let e = env(
            PhiFamily::Custom {
                phi: f,
                phi_prime: None,
            },
            PsiFamily::One,
            0.0,
        );
        let x = e.h_inv(0.5).unwrap();
        assert!(
            (x - core::f64::consts::LN_2).abs() < 1e-8,
            "numeric H^-1 gave {x}"
        );
    }

    #[test]
    fn h_domain_and_range_errors() {
        let e = env(PhiFamily::Linear, PsiFamily::One, 1.0);
        assert!(matches!(e.h(0.5), Err(Error::Domain(_))));

        let e = env(PhiFamily::Exponential, PsiFamily::One, 0.0);
        assert!(matches!(e.h_inv(1.0), Err(Error::Range(_))));
        assert!(matches!(e.h_inv(2.0), Err(Error::Range(_))));
    }

    #[test]
    fn f_closed_forms() {
        let e = env(PhiFamily::Constant(1.0), PsiFamily::One, 0.0);
        assert!((e.f(2.0, 0.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((e.f(core::f64::consts::LN_2, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((e.f_inv(1.0, 1.0).unwrap() - core::f64::consts::LN_2).abs() < 1e-14);
        assert_eq!(e.f_inv(0.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn f_quadratic_psi_matches_reference() {
        // psi(r) = r, D = 0, c = 2: F(1, 2) = int_0^1 e^{t^2} dt.
        let e = env(PhiFamily::Exponential, PsiFamily::Linear, 0.0);
        let v = e.f(1.0, 2.0).unwrap();
        assert!((v - 1.4626517459071816).abs() < 1e-10, "got {v}");
        let back = e.f_inv(v, 2.0).unwrap();
        assert!((back - 1.0).abs() < 1e-9, "round trip gave {back}");
    }

    #[test]
    fn g_reduces_to_f_inv_at_zero_eta() {
        let e = env(PhiFamily::Linear, PsiFamily::One, 1.0);
        let x = core::f64::consts::E - 1.0;
        let g = e.g(TransformPoint::new(x, 1.0, 0.0)).unwrap();
        assert!((g - 2.0).abs() < 1e-12, "got {g}");

        let g0 = e.g(TransformPoint::new(1.0, 0.0, core::f64::consts::LN_2)).unwrap();
        assert!((g0 - 1.0).abs() < 1e-12, "got {g0}");
    }

    #[test]
    fn g_rejects_far_outside_points() {
        let e = env(PhiFamily::Linear, PsiFamily::One, 1.0);
        let res = e.g(TransformPoint::new(0.1, 0.0, 5.0));
        assert!(matches!(res, Err(Error::NotAdmissible { .. })));
        // A tiny deficit clamps to the floor instead.
        let g = e.g(TransformPoint::new(0.0, 0.0, 0.5e-9)).unwrap();
        assert_eq!(g, 1.0);
    }

    #[test]
    fn gradient_closed_form_values() {
        let e = env(PhiFamily::Linear, PsiFamily::One, 1.0);
        // c = 0, x = 1, eta = 0: G = 2, dG/deta = -phi(G) = -2.
        let grad = e.g_gradient(TransformPoint::new(1.0, 0.0, 0.0)).unwrap();
        assert!((grad.d_eta + 2.0).abs() < 1e-12);
        // At eta = 0, dG/dx = exp(-c Psi(F^-1)).
        let p = TransformPoint::new(0.7, 2.0, 0.0);
        let grad = e.g_gradient(p).unwrap();
        let u = e.f_inv(0.7, 2.0).unwrap();
        let expect = (-2.0 * (u - 1.0)).exp();
        assert!((grad.d_x - expect).abs() < 1e-12);
    }

    #[test]
    fn lambda_bar_values() {
        let e = env(PhiFamily::Linear, PsiFamily::One, 1.0);
        let v = e.lambda_bar(2.0, 0.0, 1.0).unwrap();
        assert!((v - (core::f64::consts::E - 1.0)).abs() < 1e-12, "got {v}");
        // eta_T = 0, C_T = 0 collapses to lambda - D.
        let v = e.lambda_bar(7.25, 0.0, 0.0).unwrap();
        assert_eq!(v, 6.25);
        let v = e.lambda_bar(1.0, 0.3, 0.0).unwrap();
        assert!((v - (0.3f64.exp() - 1.0)).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn lambda_bar_range_violation() {
        let e = env(PhiFamily::Exponential, PsiFamily::One, 0.0);
        // Total mass is 1; H(lambda) + eta_T pushes past it.
        let res = e.lambda_bar(1.0, 2.0, 0.0);
        assert!(matches!(res, Err(Error::Range(_))));
    }

    #[test]
    fn varphi_monotone_families() {
        let e = env(PhiFamily::Linear, PsiFamily::One, 1.0);
        assert!(check_varphi_monotone(&e, 3.0, 64).nondecreasing);

        let e = env(PhiFamily::Exponential, PsiFamily::Zero, 0.0);
        assert!(check_varphi_monotone(&e, 3.0, 64).nondecreasing);

        // phi = r, psi = 1/r^2 on [1, inf): varphi = 1 + c / x decreases.
        let psi: ScalarFn = Arc::new(|r: f64| 1.0 / (r * r));
        let e = env(PhiFamily::Linear, PsiFamily::Custom { psi }, 1.0);
        let rep = check_varphi_monotone(&e, 1.0, 64);
        assert!(!rep.nondecreasing);
        let (x_prev, _, c, _) = rep.witness.unwrap();
        assert_eq!(c, 1.0);
        assert!(x_prev < 1.5, "witness should appear near the floor");
    }

    #[test]
    fn constructor_rejects_degenerate_floor() {
        assert!(EnvelopeSpec::new(0.0, PhiFamily::Linear, PsiFamily::One).is_err());
        assert!(EnvelopeSpec::new(1.0, PhiFamily::RLogR, PsiFamily::One).is_err());
        assert!(EnvelopeSpec::new(-1.0, PhiFamily::Exponential, PsiFamily::One).is_err());
        assert!(EnvelopeSpec::new(0.0, PhiFamily::Constant(0.0), PsiFamily::One).is_err());
    }
}
