//! The Beta approximation to W = Y1/(Y1 + Y2) for independent F variates,
//! together with the bounding densities π₁, π₂, φ and constants A₁, A₂ and
//! numeric certificates that measure how well the bounds actually hold.
//!
//! The joint law of (U, W) = (Y1 + Y2, Y1/(Y1 + Y2)) follows from the Jacobian
//! transform x₁ = uw, x₂ = u(1 − w). Its u-marginal has no closed form, so the
//! exact density of W is produced by adaptive quadrature over u.
//!
//! Y2 is taken to have numerator degrees of freedom `m2`. The bounds are
//! heuristic; the certificate functions report violations, they never assume
//! the inequalities.

use rayon::prelude::*;
use serde::Serialize;

use crate::dist::BetaShape;
use crate::error::{domain, Error, Result};
use crate::quad::{geometric_breaks, integrate_panels, integrate_tanh_sinh, QuadOptions};
use crate::specfun::{ln_beta_raw, RealPos};

/// Degrees of freedom (m1, ν1) of Y1 and (m2, ν2) of Y2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioSetting {
    pub m1: f64,
    pub m2: f64,
    pub nu1: f64,
    pub nu2: f64,
}

impl RatioSetting {
    /// Any positive degrees of freedom; enough for the joint and marginal densities.
    pub fn new(m1: f64, m2: f64, nu1: f64, nu2: f64) -> Result<Self> {
        for (name, v) in [("m1", m1), ("m2", m2), ("nu1", nu1), ("nu2", nu2)] {
            RealPos::new(v).map_err(|_| Error::Domain(format!("{name} must be positive, got {v}")))?;
        }
        Ok(Self { m1, m2, nu1, nu2 })
    }

    /// A setting that satisfies the bounding-regime conditions.
    pub fn bounding(m1: f64, m2: f64, nu1: f64, nu2: f64) -> Result<Self> {
        let s = Self::new(m1, m2, nu1, nu2)?;
        s.check_bounding_regime()?;
        Ok(s)
    }

    /// Shared denominator ν with ν > m1 ≥ m2.
    pub fn approximating(m1: f64, m2: f64, nu: f64) -> Result<Self> {
        let s = Self::new(m1, m2, nu, nu)?;
        if !(nu > m1 && m1 >= m2) {
            return domain(format!("approximation regime needs nu > m1 >= m2, got m1={m1}, m2={m2}, nu={nu}"));
        }
        Ok(s)
    }

    /// Lists every violated bounding-regime condition.
    pub fn bounding_violations(&self) -> Vec<String> {
        let Self { m1, m2, nu1, nu2 } = *self;
        let mut out = Vec::new();
        if !(m1 - m2 > nu2 - nu1) {
            out.push(format!("m1 - m2 > nu2 - nu1 fails ({} <= {})", m1 - m2, nu2 - nu1));
        }
        if !(m1 / nu1 >= m2 / nu2) {
            out.push(format!("m1/nu1 >= m2/nu2 fails ({} < {})", m1 / nu1, m2 / nu2));
        }
        if !(m1 - m2 + 2.0 * nu1 > 0.0) {
            out.push("m1 - m2 + 2 nu1 > 0 fails".to_string());
        }
        if !(nu2 > m1) {
            out.push(format!("nu2 > m1 fails ({nu2} <= {m1})"));
        }
        out
    }

    pub fn check_bounding_regime(&self) -> Result<()> {
        let v = self.bounding_violations();
        if v.is_empty() {
            Ok(())
        } else {
            domain(format!(
                "(m1, m2, nu1, nu2) = ({}, {}, {}, {}) is outside the bounding regime: {}",
                self.m1,
                self.m2,
                self.nu1,
                self.nu2,
                v.join("; ")
            ))
        }
    }

    fn ln_k0(&self) -> f64 {
        let Self { m1, m2, nu1, nu2 } = *self;
        0.5 * m1 * (m1 / nu1).ln() + 0.5 * m2 * (m2 / nu2).ln()
            - ln_beta_raw(0.5 * m1, 0.5 * nu1)
            - ln_beta_raw(0.5 * m2, 0.5 * nu2)
    }
}

/// The approximating shape ((m2 + ½)/2, m2/2). Depends on m2 only.
pub fn approx_shape(m2: RealPos) -> BetaShape {
    let m2 = m2.get();
    BetaShape { alpha: 0.5 * (m2 + 0.5), beta: 0.5 * m2 }
}

fn open_unit(w: f64) -> Result<()> {
    if w > 0.0 && w < 1.0 {
        Ok(())
    } else {
        domain(format!("w must lie in (0, 1), got {w}"))
    }
}

fn positive(u: f64) -> Result<()> {
    if u > 0.0 && u.is_finite() {
        Ok(())
    } else {
        domain(format!("u must be positive and finite, got {u}"))
    }
}

fn ln_phi(w: f64, m1: f64, m2: f64) -> f64 {
    (0.5 * m1 - 1.0) * w.ln() + (0.5 * m2 - 1.0) * (-w).ln_1p() - ln_beta_raw(0.5 * m1, 0.5 * m2)
}

/// φ(w): the Beta(m1/2, m2/2) density.
pub fn phi_density(w: f64, m1: RealPos, m2: RealPos) -> Result<f64> {
    open_unit(w)?;
    Ok(ln_phi(w, m1.get(), m2.get()).exp())
}

fn ln_pi1(u: f64, s: &RatioSetting) -> f64 {
    let k = 0.5 * (s.m1 + s.m2);
    let c = s.m2 / s.nu2;
    k * c.ln() + (k - 1.0) * u.ln() - 0.5 * (s.m2 + s.nu2) * (c * u).ln_1p() - ln_beta_raw(k, 0.5 * (s.nu2 - s.m1))
}

fn ln_pi2(u: f64, s: &RatioSetting) -> f64 {
    let k = 0.5 * (s.m1 + s.m2);
    let c = s.m1 / (2.0 * s.nu1);
    k * c.ln() + (k - 1.0) * u.ln()
        - (s.m1 + s.nu1) * (c * u).ln_1p()
        - ln_beta_raw(k, 0.5 * (s.m1 - s.m2 + 2.0 * s.nu1))
}

/// π₁(u), the u-density paired with the upper bound.
pub fn pi1_density(u: f64, s: &RatioSetting) -> Result<f64> {
    positive(u)?;
    s.check_bounding_regime()?;
    Ok(ln_pi1(u, s).exp())
}

/// π₂(u), the u-density paired with the lower bound.
pub fn pi2_density(u: f64, s: &RatioSetting) -> Result<f64> {
    positive(u)?;
    s.check_bounding_regime()?;
    Ok(ln_pi2(u, s).exp())
}

fn ln_joint(u: f64, w: f64, s: &RatioSetting, ln_k0: f64) -> f64 {
    let RatioSetting { m1, m2, nu1, nu2 } = *s;
    ln_k0 + (0.5 * (m1 + m2) - 1.0) * u.ln() + (0.5 * m1 - 1.0) * w.ln() + (0.5 * m2 - 1.0) * (-w).ln_1p()
        - 0.5 * (m1 + nu1) * (m1 * u * w / nu1).ln_1p()
        - 0.5 * (m2 + nu2) * (m2 * u * (1.0 - w) / nu2).ln_1p()
}

/// h(u, w), the joint density of (U, W).
pub fn joint_density(u: f64, w: f64, s: &RatioSetting) -> Result<f64> {
    positive(u)?;
    open_unit(w)?;
    Ok(ln_joint(u, w, s, s.ln_k0()).exp())
}

/// A₁ and A₂ for one setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub a1: f64,
    pub a2: f64,
}

fn ln_a1(s: &RatioSetting) -> f64 {
    let RatioSetting { m1, m2, nu1, nu2 } = *s;
    0.5 * m1 * ((m1 * nu2) / (m2 * nu1)).ln() + ln_beta_raw(0.5 * (m1 + m2), 0.5 * (nu2 - m1)) + ln_beta_raw(0.5 * m1, 0.5 * m2)
        - ln_beta_raw(0.5 * m1, 0.5 * nu1)
        - ln_beta_raw(0.5 * m2, 0.5 * nu2)
}

fn ln_a2(s: &RatioSetting) -> f64 {
    let RatioSetting { m1, m2, nu1, nu2 } = *s;
    0.5 * (m1 + m2) * std::f64::consts::LN_2
        + 0.5 * m2 * ((m2 * nu1) / (m1 * nu2)).ln()
        + ln_beta_raw(0.5 * (m1 + m2), 0.5 * (m1 - m2 + 2.0 * nu1))
        + ln_beta_raw(0.5 * m1, 0.5 * m2)
        - ln_beta_raw(0.5 * m1, 0.5 * nu1)
        - ln_beta_raw(0.5 * m2, 0.5 * nu2)
}

/// Upper-bound constant A₁.
pub fn constant_a1(s: &RatioSetting) -> Result<f64> {
    s.check_bounding_regime()?;
    finite("A1", ln_a1(s).exp())
}

/// Lower-bound constant A₂.
pub fn constant_a2(s: &RatioSetting) -> Result<f64> {
    s.check_bounding_regime()?;
    finite("A2", ln_a2(s).exp())
}

pub fn bound_constants(s: &RatioSetting) -> Result<BoundConstants> {
    Ok(BoundConstants { a1: constant_a1(s)?, a2: constant_a2(s)? })
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("{name} overflowed")))
    }
}

/// Minimum number of initial quadrature panels for the marginal.
pub const MIN_MARGINAL_PANELS: usize = 64;

/// Truncation point U for ∫₀^∞ h(u, w) du such that the analytic tail bound
/// beyond U is below `eps`.
fn u_truncation(w: f64, s: &RatioSetting, ln_k0: f64, eps: f64) -> f64 {
    let RatioSetting { m1, m2, nu1, nu2 } = *s;
    let (c1, c2) = (m1 / nu1, m2 / nu2);
    let base = ln_k0 + (0.5 * m1 - 1.0) * w.ln() + (0.5 * m2 - 1.0) * (-w).ln_1p();
    let k = 0.5 * (m1 + m2);
    // Each bound reads h ≤ exp(ln_c) · u^{-1-q}; the tail is exp(ln_c) U^{-q} / q.
    let mut candidates = Vec::with_capacity(3);
    // 1 + c·x ≥ c·x on both factors
    let q = 0.5 * (nu1 + nu2);
    let ln_c = base - 0.5 * (m1 + nu1) * (c1 * w).ln() - 0.5 * (m2 + nu2) * (c2 * (1.0 - w)).ln();
    candidates.push((ln_c, q));
    // only on the second factor
    let q = 0.5 * (nu2 - m1);
    if q > 0.0 {
        let ln_c = base - 0.5 * (m2 + nu2) * (c2 * (1.0 - w)).ln();
        candidates.push((ln_c, q));
    }
    // only on the first factor
    let q = 0.5 * (nu1 - m2);
    if q > 0.0 {
        let ln_c = base - 0.5 * (m1 + nu1) * (c1 * w).ln();
        candidates.push((ln_c, q));
    }
    let _ = k;
    candidates
        .into_iter()
        .map(|(ln_c, q)| ((ln_c - (q * eps).ln()) / q).exp())
        .fold(f64::INFINITY, f64::min)
        .max(50.0)
}

/// λ(w) = ∫₀^∞ h(u, w) du, the exact density of W, by adaptive quadrature.
///
/// `panels` is the number of initial geometric panels on (0, U] (at least
/// [`MIN_MARGINAL_PANELS`]).
pub fn marginal_w_density(w: f64, s: &RatioSetting, panels: usize) -> Result<f64> {
    open_unit(w)?;
    if panels < MIN_MARGINAL_PANELS {
        return domain(format!("marginal quadrature needs at least {MIN_MARGINAL_PANELS} panels, got {panels}"));
    }
    let ln_k0 = s.ln_k0();
    let scale = ln_phi(w, s.m1, s.m2).exp();
    let upper = u_truncation(w, s, ln_k0, 1e-15 * scale.max(f64::MIN_POSITIVE));
    let lo = 1e-8f64.min(upper * 1e-3);
    let mut breaks = geometric_breaks(lo, upper, 1);
    if breaks.len() - 1 < panels {
        let decades = (upper / lo).log10();
        let per_decade = (panels as f64 / decades).ceil() as usize;
        breaks = geometric_breaks(lo, upper, per_decade.max(1));
    }
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-13, max_panels: 20_000 };
    let integral = integrate_panels(|u| if u > 0.0 { ln_joint(u, w, s, ln_k0).exp() } else { 0.0 }, &breaks, opts)
        .map_err(|e| Error::Numeric(format!("marginal density of W at w={w} for {s:?}: {e}")))?;
    Ok(integral.value)
}

/// ∫₀¹ λ(w) dw, i.e. the total mass of the joint density.
pub fn joint_mass(s: &RatioSetting) -> Result<f64> {
    let failure = std::sync::Mutex::new(None);
    let value = integrate_tanh_sinh(
        |w| match marginal_w_density(w, s, MIN_MARGINAL_PANELS) {
            Ok(v) => v,
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        1.0,
        1e-10,
    );
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(value?.value)
}

/// Total-variation bound A(m2 + ½, m2, ν)/n of the empirical comparison.
pub fn tv_bound(m2: RealPos, nu: RealPos, n: usize) -> Result<f64> {
    if n == 0 {
        return domain("tv_bound needs n >= 1");
    }
    let m2 = m2.get();
    let s = RatioSetting::bounding(m2 + 0.5, m2, nu.get(), nu.get())?;
    Ok(constant_a1(&s)? / n as f64)
}

/// Grid layout for the bound certificates.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridSpec {
    pub u_points: usize,
    pub u_min: f64,
    pub u_max: f64,
    /// w-grid is i/(w_points + 1), i = 1..=w_points.
    pub w_points: usize,
    pub slack: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { u_points: 200, u_min: 1e-3, u_max: 1e3, w_points: 99, slack: 1e-9 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.u_points < 2 || self.w_points < 1 {
            return domain("grid needs at least 2 u-points and 1 w-point");
        }
        if !(self.u_min > 0.0 && self.u_max > self.u_min && self.u_max.is_finite()) {
            return domain(format!("bad u range [{}, {}]", self.u_min, self.u_max));
        }
        if !(self.slack >= 0.0) {
            return domain("slack must be nonnegative");
        }
        Ok(())
    }

    pub fn u_grid(&self) -> Vec<f64> {
        let (a, b) = (self.u_min.ln(), self.u_max.ln());
        (0..self.u_points)
            .map(|i| (a + (b - a) * i as f64 / (self.u_points - 1) as f64).exp())
            .collect()
    }

    pub fn w_grid(&self) -> Vec<f64> {
        let d = (self.w_points + 1) as f64;
        (1..=self.w_points).map(|i| i as f64 / d).collect()
    }
}

/// A grid point where a bound fails, with the offending ratio.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub bound: &'static str,
    pub u: Option<f64>,
    pub w: f64,
    /// value / bound; above 1 + slack means the bound is broken
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct JointCertificate {
    pub setting: RatioSetting,
    pub constants: BoundConstants,
    /// min and max over the grid of h / (π₁ φ); the upper bound needs max ≤ A1
    pub upper_ratio_min: f64,
    pub upper_ratio_max: f64,
    /// min and max of h / (π₂ φ); the lower bound needs min ≥ A2
    pub lower_ratio_min: f64,
    pub lower_ratio_max: f64,
    pub points: usize,
    pub upper_violations: usize,
    pub lower_violations: usize,
    /// every violating grid point, in grid order
    pub violations: Vec<Violation>,
}

impl JointCertificate {
    pub fn holds(&self) -> bool {
        self.upper_violations == 0 && self.lower_violations == 0
    }
}

/// Checks A₂ π₂(u) φ(w) ≤ h(u, w) ≤ A₁ π₁(u) φ(w) on the grid.
pub fn certify_joint(s: &RatioSetting, grid: &GridSpec) -> Result<JointCertificate> {
    grid.validate()?;
    let constants = bound_constants(s)?;
    let ln_k0 = s.ln_k0();
    let (ln_a1v, ln_a2v) = (constants.a1.ln(), constants.a2.ln());
    let ln_slack = grid.slack.ln_1p();
    let us = grid.u_grid();
    let ws = grid.w_grid();
    let rows: Vec<Vec<(f64, f64, f64, f64)>> = ws
        .par_iter()
        .map(|&w| {
            let lp = ln_phi(w, s.m1, s.m2);
            us.iter()
                .map(|&u| {
                    let lh = ln_joint(u, w, s, ln_k0);
                    (u, w, lh - ln_pi1(u, s) - lp, lh - ln_pi2(u, s) - lp)
                })
                .collect()
        })
        .collect();
    let mut cert = JointCertificate {
        setting: *s,
        constants,
        upper_ratio_min: f64::INFINITY,
        upper_ratio_max: 0.0,
        lower_ratio_min: f64::INFINITY,
        lower_ratio_max: 0.0,
        points: us.len() * ws.len(),
        upper_violations: 0,
        lower_violations: 0,
        violations: Vec::new(),
    };
    for (u, w, ln_up, ln_lo) in rows.into_iter().flatten() {
        let (up, lo) = (ln_up.exp(), ln_lo.exp());
        cert.upper_ratio_min = cert.upper_ratio_min.min(up);
        cert.upper_ratio_max = cert.upper_ratio_max.max(up);
        cert.lower_ratio_min = cert.lower_ratio_min.min(lo);
        cert.lower_ratio_max = cert.lower_ratio_max.max(lo);
        if ln_up - ln_a1v > ln_slack {
            cert.upper_violations += 1;
            cert.violations.push(Violation { bound: "h <= A1 pi1 phi", u: Some(u), w, ratio: (ln_up - ln_a1v).exp() });
        }
        if ln_a2v - ln_lo > ln_slack {
            cert.lower_violations += 1;
            cert.violations.push(Violation {
                bound: "A2 pi2 phi <= h",
                u: Some(u),
                w,
                ratio: (ln_a2v - ln_lo).exp(),
            });
        }
    }
    Ok(cert)
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginalCertificate {
    pub setting: RatioSetting,
    pub a1: f64,
    /// min and max of λ/φ over the w-grid; the sandwich needs 1 ≤ λ/φ ≤ A1
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub points: usize,
    pub lower_violations: usize,
    pub upper_violations: usize,
    pub violations: Vec<Violation>,
}

impl MarginalCertificate {
    pub fn holds(&self) -> bool {
        self.lower_violations == 0 && self.upper_violations == 0
    }
}

/// Checks φ(w) ≤ λ(w) ≤ A₁ φ(w) on the w-grid, computing λ with `panels`
/// initial quadrature panels.
pub fn certify_marginal(s: &RatioSetting, grid: &GridSpec, panels: usize) -> Result<MarginalCertificate> {
    grid.validate()?;
    let a1 = constant_a1(s)?;
    let ws = grid.w_grid();
    let lambdas: Vec<Result<f64>> = ws.par_iter().map(|&w| marginal_w_density(w, s, panels)).collect();
    let mut cert = MarginalCertificate {
        setting: *s,
        a1,
        ratio_min: f64::INFINITY,
        ratio_max: 0.0,
        points: ws.len(),
        lower_violations: 0,
        upper_violations: 0,
        violations: Vec::new(),
    };
    let tol = 1.0 + grid.slack;
    for (&w, lam) in ws.iter().zip(lambdas) {
        let lam = lam?;
        let phi = ln_phi(w, s.m1, s.m2).exp();
        let r = lam / phi;
        cert.ratio_min = cert.ratio_min.min(r);
        cert.ratio_max = cert.ratio_max.max(r);
        if phi > lam * tol {
            cert.lower_violations += 1;
            cert.violations.push(Violation { bound: "phi <= lambda", u: None, w, ratio: phi / lam });
        }
        if lam > a1 * phi * tol {
            cert.upper_violations += 1;
            cert.violations.push(Violation { bound: "lambda <= A1 phi", u: None, w, ratio: lam / (a1 * phi) });
        }
    }
    Ok(cert)
}
