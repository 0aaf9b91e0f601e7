//! Law of Ω = t₁⋯t_{n2}, a product of i.i.d. Beta((ρ+½)/2, ρ/2) factors:
//! sampling, Mellin moments and a numeric density and distribution function.
//!
//! The numeric law works with Z = −ln Ω, a sum of n2 i.i.d. copies of
//! −ln t. The first n2 − 1 factors are discretized on a uniform grid by
//! splitting each cell's exact mass between its endpoints so the cell mean is
//! kept, then convolved by FFT. The last factor enters through its exact
//! distribution function, which keeps the result monotone and avoids the
//! endpoint singularity of the factor density.

use rand_distr::{Beta, Distribution};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::approx::approx_shape;
use crate::dist::{beta_cdf, beta_pdf, BetaShape};
use crate::error::{domain, Result};
use crate::rng::{par_draw, Seed};
use crate::specfun::{digamma, ln_beta_raw, ln_gamma_raw, reg_inc_beta_raw, RealPos};

/// ρ and the number of factors n2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ProductSpec {
    rho: u32,
    n2: u32,
}

impl ProductSpec {
    pub fn new(rho: u32, n2: u32) -> Result<Self> {
        if rho == 0 || n2 == 0 {
            return domain(format!("product law needs rho >= 1 and n2 >= 1, got rho={rho}, n2={n2}"));
        }
        Ok(Self { rho, n2 })
    }

    pub fn rho(&self) -> u32 {
        self.rho
    }

    pub fn n2(&self) -> u32 {
        self.n2
    }

    /// Shape of each factor.
    pub fn factor_shape(&self) -> BetaShape {
        approx_shape(RealPos::new(self.rho as f64).expect("rho >= 1"))
    }

    /// ln [Γ((2ρ+½)/2)/Γ((ρ+½)/2)]^{n2}, the normalizing prefactor of the
    /// G-function form. The numeric law never uses it.
    pub fn ln_printed_prefactor(&self) -> f64 {
        let rho = self.rho as f64;
        self.n2 as f64 * (ln_gamma_raw(0.5 * (2.0 * rho + 0.5)) - ln_gamma_raw(0.5 * (rho + 0.5)))
    }
}

/// `n` draws of Ω.
pub fn omega_sample(spec: ProductSpec, n: usize, seed: Seed) -> Vec<f64> {
    let s = spec.factor_shape();
    let law = Beta::new(s.alpha, s.beta).expect("valid shape");
    let k = spec.n2;
    par_draw(n, seed, |rng| (0..k).map(|_| law.sample(rng)).product())
}

/// E[Ω^k] = [B(a + k, b)/B(a, b)]^{n2} for k > −a.
pub fn omega_moment(spec: ProductSpec, k: f64) -> Result<f64> {
    let s = spec.factor_shape();
    if !(k > -s.alpha) || !k.is_finite() {
        return domain(format!("Mellin moment needs k > -{}, got {k}", s.alpha));
    }
    Ok((spec.n2 as f64 * (ln_beta_raw(s.alpha + k, s.beta) - ln_beta_raw(s.alpha, s.beta))).exp())
}

/// E[−ln Ω] = n2 (ψ(a + b) − ψ(a)).
pub fn mean_neg_log(spec: ProductSpec) -> f64 {
    let s = spec.factor_shape();
    let psi = |x: f64| digamma(RealPos::new(x).expect("positive"));
    spec.n2 as f64 * (psi(s.alpha + s.beta) - psi(s.alpha))
}

/// Default number of cells on the z grid.
pub const DEFAULT_NODES: usize = 1 << 14;

/// Tail mass allowed beyond the end of the z grid.
const TAIL_MASS: f64 = 1e-12;

/// The numeric law of Ω, tabulated once and evaluated many times.
#[derive(Debug, Clone)]
pub struct OmegaLaw {
    spec: ProductSpec,
    /// cell width of the factor discretization; tables use spacing h/2
    h: f64,
    z_max: f64,
    /// P(Z ≤ i·h/2)
    cdf_z: Vec<f64>,
    /// density of Z at (i + ½)·h/2, from differences of `cdf_z`
    pdf_z: Vec<f64>,
}

/// P(−ln t ≤ z) for one factor, i.e. P(t ≥ e^{−z}).
fn factor_cdf_z(z: f64, s: BetaShape) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    reg_inc_beta_raw(-(-z).exp_m1(), s.beta, s.alpha).expect("valid shapes")
}

/// Smallest z with P(Z > z) below `TAIL_MASS` by a Chernoff bound, Z the full sum.
fn z_upper(spec: ProductSpec) -> f64 {
    let s = spec.factor_shape();
    let theta = 0.5 * s.alpha;
    let ln_mgf = spec.n2 as f64 * (ln_beta_raw(s.alpha - theta, s.beta) - ln_beta_raw(s.alpha, s.beta));
    let chernoff = (ln_mgf - TAIL_MASS.ln()) / theta;
    // one factor alone must also be well inside the grid
    let single = (-(TAIL_MASS * s.alpha).ln() - ln_beta_raw(s.alpha, s.beta)) / s.alpha;
    chernoff.max(single).max(1.0)
}

fn fft_convolve(planner: &mut FftPlanner<f64>, x: &[f64], y: &[f64], len: usize) -> Vec<f64> {
    let n = (x.len() + y.len()).next_power_of_two();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let load = |v: &[f64]| {
        let mut buf: Vec<Complex<f64>> = v.iter().map(|&r| Complex::new(r, 0.0)).collect();
        buf.resize(n, Complex::new(0.0, 0.0));
        buf
    };
    let (mut a, mut b) = (load(x), load(y));
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (p, q) in a.iter_mut().zip(&b) {
        *p *= q;
    }
    inv.process(&mut a);
    a.iter().take(len).map(|c| c.re / n as f64).collect()
}

/// `p` convolved with itself `times` times (`times` ≥ 1), truncated to p.len().
fn fft_power(planner: &mut FftPlanner<f64>, p: &[f64], times: u32) -> Vec<f64> {
    let len = p.len();
    let n = 2 * len.next_power_of_two();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = p.iter().map(|&r| Complex::new(r, 0.0)).collect();
    buf.resize(n, Complex::new(0.0, 0.0));
    fwd.process(&mut buf);
    for c in buf.iter_mut() {
        *c = c.powu(times);
    }
    inv.process(&mut buf);
    buf.iter().take(len).map(|c| (c.re / n as f64).max(0.0)).collect()
}

impl OmegaLaw {
    pub fn new(spec: ProductSpec) -> Result<Self> {
        Self::with_nodes(spec, DEFAULT_NODES)
    }

    /// Tabulates the law on `nodes` cells (at least 256).
    pub fn with_nodes(spec: ProductSpec, nodes: usize) -> Result<Self> {
        if nodes < 256 {
            return domain(format!("omega grid needs at least 256 nodes, got {nodes}"));
        }
        let s = spec.factor_shape();
        let z_max = z_upper(spec);
        let h = z_max / nodes as f64;
        let half = 0.5 * h;
        // exact factor cdf on the h/2 lattice
        let g: Vec<f64> = (0..=2 * nodes).map(|i| factor_cdf_z(i as f64 * half, s)).collect();
        let cdf_z = if spec.n2 == 1 {
            g
        } else {
            let mut planner = FftPlanner::new();
            // Each cell mass of one factor is split between the cell's two
            // endpoints so that the within-cell mean is preserved.
            let mut atoms = vec![0.0; nodes + 1];
            for j in 0..nodes {
                let (g0, gm, g1) = (g[2 * j], g[2 * j + 1], g[2 * j + 2]);
                let m = (g1 - g0).max(0.0);
                if m == 0.0 {
                    continue;
                }
                // ∫ z dG over the cell, with ∫ G dz by Simpson's rule
                let z0 = j as f64 * h;
                let partial = (z0 + h) * g1 - z0 * g0 - h / 6.0 * (g0 + 4.0 * gm + g1);
                let frac = ((partial / m - z0) / h).clamp(0.0, 1.0);
                atoms[j] += m * (1.0 - frac);
                atoms[j + 1] += m * frac;
            }
            atoms.truncate(nodes);
            let q = fft_power(&mut planner, &atoms, spec.n2 - 1);
            // Atom J of the (n2−1)-fold sum sits at J·h, i.e. index 2J on the h/2 lattice:
            // F_Z(i·h/2) = Σ_J q_J G((i − 2J)·h/2).
            let mut spread = vec![0.0; 2 * nodes + 1];
            for (j, &m) in q.iter().enumerate() {
                spread[2 * j] = m;
            }
            let raw = fft_convolve(&mut planner, &spread, &g, 2 * nodes + 1);
            let mut run: f64 = 0.0;
            raw.into_iter()
                .map(|v| {
                    run = run.max(v.clamp(0.0, 1.0));
                    run
                })
                .collect()
        };
        let pdf_z = cdf_z.windows(2).map(|w| (w[1] - w[0]) / half).collect();
        Ok(Self { spec, h, z_max, cdf_z, pdf_z })
    }

    pub fn spec(&self) -> ProductSpec {
        self.spec
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    pub fn cell_width(&self) -> f64 {
        self.h
    }

    fn cdf_z_at(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        let t = z / (0.5 * self.h);
        let i = t.floor() as usize;
        if i + 1 >= self.cdf_z.len() {
            return 1.0;
        }
        let f = t - i as f64;
        self.cdf_z[i] * (1.0 - f) + self.cdf_z[i + 1] * f
    }

    fn pdf_z_at(&self, z: f64) -> f64 {
        let half = 0.5 * self.h;
        // pdf_z[i] lives at (i + ½)·half
        let t = z / half - 0.5;
        if t < 0.0 {
            return self.pdf_z[0] * (z / (0.5 * half)).clamp(0.0, 1.0);
        }
        let i = t.floor() as usize;
        if i + 1 >= self.pdf_z.len() {
            return 0.0;
        }
        let f = t - i as f64;
        self.pdf_z[i] * (1.0 - f) + self.pdf_z[i + 1] * f
    }

    /// P(Ω ≤ w).
    pub fn cdf(&self, w: f64) -> Result<f64> {
        check_unit(w)?;
        if self.spec.n2 == 1 {
            return Ok(beta_cdf(w, self.spec.factor_shape()));
        }
        Ok((1.0 - self.cdf_z_at(-w.ln())).clamp(0.0, 1.0))
    }

    /// Density of Ω at w.
    pub fn pdf(&self, w: f64) -> Result<f64> {
        check_unit(w)?;
        if self.spec.n2 == 1 {
            return beta_pdf(w, self.spec.factor_shape());
        }
        Ok(self.pdf_z_at(-w.ln()) / w)
    }
}

fn check_unit(w: f64) -> Result<()> {
    if w > 0.0 && w < 1.0 {
        Ok(())
    } else {
        domain(format!("omega law is evaluated on (0, 1), got {w}"))
    }
}

/// Numeric density of Ω on `grid`.
pub fn omega_pdf_numeric(spec: ProductSpec, grid: &[f64]) -> Result<Vec<f64>> {
    grid.iter().try_for_each(|&w| check_unit(w))?;
    let law = OmegaLaw::new(spec)?;
    grid.iter().map(|&w| law.pdf(w)).collect()
}

/// Numeric distribution function of Ω at one point. Build an [`OmegaLaw`]
/// when evaluating many points.
pub fn omega_cdf_numeric(spec: ProductSpec, w: f64) -> Result<f64> {
    check_unit(w)?;
    OmegaLaw::new(spec)?.cdf(w)
}
