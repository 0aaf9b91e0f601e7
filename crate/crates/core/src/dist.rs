//! F and Beta laws (density, distribution function, seeded sampler) and a
//! row sampler for the multivariate t.

use rand::Rng;
use rand_distr::{Beta, ChiSquared, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::Matrix;
use crate::rng::{par_draw, Seed};
use crate::specfun::{ln_beta_raw, reg_inc_beta_raw, RealPos};

/// Largest shape or degrees-of-freedom value accepted by the analytic laws.
/// The incomplete-Beta continued fraction converges well inside its
/// iteration budget up to this size.
pub const MAX_SHAPE: f64 = 1e6;

fn checked(name: &str, v: f64) -> Result<f64> {
    let v = RealPos::new(v).map_err(|_| Error::Domain(format!("{name} must be positive and finite, got {v}")))?;
    if v.get() > MAX_SHAPE {
        return domain(format!("{name} = {} exceeds the supported maximum {MAX_SHAPE:e}", v.get()));
    }
    Ok(v.get())
}

fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    reg_inc_beta_raw(x, a, b).expect("incomplete beta converges for shapes up to MAX_SHAPE")
}

/// Degrees of freedom of an F law: numerator `m`, denominator `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FParams {
    m: f64,
    nu: f64,
}

impl FParams {
    pub fn new(m: f64, nu: f64) -> Result<Self> {
        Ok(Self { m: checked("numerator df", m)?, nu: checked("denominator df", nu)? })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// E[Y] = ν/(ν − 2), defined for ν > 2.
    pub fn mean(&self) -> Option<f64> {
        (self.nu > 2.0).then(|| self.nu / (self.nu - 2.0))
    }

    /// Var[Y], defined for ν > 4.
    pub fn variance(&self) -> Option<f64> {
        let (m, n) = (self.m, self.nu);
        (n > 4.0).then(|| 2.0 * n * n * (m + n - 2.0) / (m * (n - 2.0).powi(2) * (n - 4.0)))
    }
}

/// Density of F(m, ν) at y > 0.
pub fn f_pdf(y: f64, p: FParams) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return domain(format!("F density needs y > 0, got {y}"));
    }
    let (m, nu) = (p.m, p.nu);
    let ln = 0.5 * m * (m / nu).ln() + (0.5 * m - 1.0) * y.ln()
        - 0.5 * (m + nu) * (m * y / nu).ln_1p()
        - ln_beta_raw(0.5 * m, 0.5 * nu);
    Ok(ln.exp())
}

/// Distribution function of F(m, ν); zero for y ≤ 0.
pub fn f_cdf(y: f64, p: FParams) -> f64 {
    if !(y > 0.0) {
        return 0.0;
    }
    if y == f64::INFINITY {
        return 1.0;
    }
    let (m, nu) = (p.m, p.nu);
    let my = m * y;
    if my <= nu {
        inc_beta(my / (my + nu), 0.5 * m, 0.5 * nu)
    } else {
        1.0 - inc_beta(nu / (my + nu), 0.5 * nu, 0.5 * m)
    }
}

/// `n` i.i.d. F(m, ν) draws, built as a ratio of scaled Gamma variates.
pub fn f_sample(p: FParams, n: usize, seed: Seed) -> Vec<f64> {
    let num = Gamma::new(0.5 * p.m, 1.0).expect("validated shape");
    let den = Gamma::new(0.5 * p.nu, 1.0).expect("validated shape");
    let (hm, hn) = (0.5 * p.m, 0.5 * p.nu);
    par_draw(n, seed, |rng| {
        let a: f64 = num.sample(rng);
        let b: f64 = den.sample(rng);
        (a / hm) / (b / hn)
    })
}

/// `n` draws of W = Y1/(Y1 + Y2) with independent Y1 ~ `y1`, Y2 ~ `y2`.
pub fn f_proportion_sample(y1: FParams, y2: FParams, n: usize, seed: Seed) -> Vec<f64> {
    let g = |s: f64| Gamma::new(s, 1.0).expect("validated shape");
    let (n1, d1, n2, d2) = (g(0.5 * y1.m), g(0.5 * y1.nu), g(0.5 * y2.m), g(0.5 * y2.nu));
    par_draw(n, seed, |rng| {
        let a = (n1.sample(rng) / (0.5 * y1.m)) / (d1.sample(rng) / (0.5 * y1.nu));
        let b = (n2.sample(rng) / (0.5 * y2.m)) / (d2.sample(rng) / (0.5 * y2.nu));
        a / (a + b)
    })
}

/// Shape pair (α, β) of a Beta law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaShape {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaShape {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        Ok(Self { alpha: checked("alpha", alpha)?, beta: checked("beta", beta)? })
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn ln_beta(&self) -> f64 {
        ln_beta_raw(self.alpha, self.beta)
    }
}

/// Beta density on the open interval (0, 1).
pub fn beta_pdf(x: f64, s: BetaShape) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return domain(format!("Beta density needs 0 < x < 1, got {x}"));
    }
    Ok(beta_ln_pdf_raw(x, s).exp())
}

pub(crate) fn beta_ln_pdf_raw(x: f64, s: BetaShape) -> f64 {
    (s.alpha - 1.0) * x.ln() + (s.beta - 1.0) * (-x).ln_1p() - s.ln_beta()
}

/// Beta distribution function, clamped to 0 below the support and 1 above.
pub fn beta_cdf(x: f64, s: BetaShape) -> f64 {
    if !(x > 0.0) {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        inc_beta(x, s.alpha, s.beta)
    }
}

/// Upper tail 1 − F(x) evaluated without cancellation.
pub fn beta_sf(x: f64, s: BetaShape) -> f64 {
    if !(x > 0.0) {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        inc_beta(1.0 - x, s.beta, s.alpha)
    }
}

pub fn beta_sample(s: BetaShape, n: usize, seed: Seed) -> Vec<f64> {
    let law = Beta::new(s.alpha, s.beta).expect("validated shape");
    par_draw(n, seed, |rng| law.sample(rng))
}

/// Parameters of a ρ-variate t law: dimension, degrees of freedom and scale Σ.
#[derive(Debug, Clone)]
pub struct MvtParams {
    dim: usize,
    dof: f64,
    scale: Matrix,
    chol: Matrix,
}

impl MvtParams {
    pub fn new(dim: usize, dof: f64, scale: Matrix) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("multivariate t dimension must be at least 1".into()));
        }
        let dof = RealPos::new(dof).map_err(|_| Error::Config(format!("dof must be positive, got {dof}")))?;
        if scale.rows() != dim || scale.cols() != dim {
            return Err(Error::Config(format!(
                "scale matrix is {}x{}, expected {dim}x{dim}",
                scale.rows(),
                scale.cols()
            )));
        }
        for i in 0..dim {
            for j in 0..i {
                let (a, b) = (scale[(i, j)], scale[(j, i)]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::Config(format!("scale matrix is not symmetric at ({i},{j})")));
                }
            }
        }
        let chol = scale.cholesky()?;
        Ok(Self { dim, dof: dof.get(), scale, chol })
    }

    /// Identity scale.
    pub fn standard(dim: usize, dof: f64) -> Result<Self> {
        Self::new(dim, dof, Matrix::identity(dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn scale(&self) -> &Matrix {
        &self.scale
    }

    fn draw_row<R: Rng + ?Sized>(&self, chi: &ChiSquared<f64>, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(rng)).collect();
        let w = (chi.sample(rng) / self.dof).sqrt();
        (0..self.dim)
            .map(|i| (0..=i).map(|k| self.chol[(i, k)] * z[k]).sum::<f64>() / w)
            .collect()
    }
}

/// `n_rows` independent rows of a multivariate t, each a Σ-correlated
/// Gaussian row divided by √(χ²_ν/ν).
pub fn mvt_sample_rows(p: &MvtParams, n_rows: usize, seed: Seed) -> Matrix {
    let chi = ChiSquared::new(p.dof).expect("validated dof");
    let rows = par_draw(n_rows, seed, |rng| p.draw_row(&chi, rng));
    let data = rows.concat();
    Matrix::from_vec(n_rows, p.dim, data).expect("row lengths match dim")
}

/// Same as [`mvt_sample_rows`] but sequential on a caller-provided generator;
/// used when many small matrices are drawn inside an outer parallel loop.
pub fn mvt_sample_rows_with<R: Rng + ?Sized>(p: &MvtParams, n_rows: usize, rng: &mut R) -> Matrix {
    let chi = ChiSquared::new(p.dof).expect("validated dof");
    let mut data = Vec::with_capacity(n_rows * p.dim);
    for _ in 0..n_rows {
        data.extend(p.draw_row(&chi, rng));
    }
    Matrix::from_vec(n_rows, p.dim, data).expect("row lengths match dim")
}
