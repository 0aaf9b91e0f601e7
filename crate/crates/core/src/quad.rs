//! One-dimensional quadrature: globally adaptive Gauss–Kronrod (7/15) and
//! double-exponential (tanh–sinh) rules.
//!
//! Gauss–Kronrod is the workhorse for smooth integrands split into panels.
//! Tanh–sinh copes with integrable endpoint singularities and is used where
//! densities blow up at 0 or 1.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-14, rel_tol: 1e-12, max_panels: 4000 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Panel { a, b, value: kronrod * half, error: ((kronrod - gauss) * half).abs() }
}

/// Globally adaptive Gauss–Kronrod over the panels delimited by `breaks`
/// (strictly increasing, at least two points).
pub fn integrate_panels<F: Fn(f64) -> f64>(f: F, breaks: &[f64], opts: QuadOptions) -> Result<Integral> {
    if breaks.len() < 2 || breaks.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("quadrature breakpoints must be strictly increasing".into()));
    }
    let mut heap: BinaryHeap<Panel> = breaks.windows(2).map(|w| gk15(&f, w[0], w[1])).collect();
    let mut evaluations = 15 * heap.len();
    loop {
        let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        if !value.is_finite() {
            return Err(Error::Numeric(format!(
                "quadrature produced a non-finite value on [{}, {}]",
                breaks[0],
                breaks[breaks.len() - 1]
            )));
        }
        if error <= opts.abs_tol.max(opts.rel_tol * value.abs()) {
            return Ok(Integral { value, abs_error: error, evaluations });
        }
        if heap.len() >= opts.max_panels {
            return Err(Error::Numeric(format!(
                "adaptive quadrature exhausted {} panels on [{}, {}]: value {value:e}, error estimate {error:e}",
                opts.max_panels,
                breaks[0],
                breaks[breaks.len() - 1]
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Panel can no longer be split in floating point; accept what we have.
            let rest: f64 = heap.iter().map(|p| p.value).sum();
            return Ok(Integral { value: rest + worst.value, abs_error: error, evaluations });
        }
        heap.push(gk15(&f, worst.a, mid));
        heap.push(gk15(&f, mid, worst.b));
        evaluations += 30;
    }
}

/// Adaptive Gauss–Kronrod on a single finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<Integral> {
    integrate_panels(f, &[a, b], opts)
}

/// Tanh–sinh quadrature on a finite interval `[a, b]`.
///
/// Nodes are placed by their distance to the nearer endpoint, so integrands
/// with integrable singularities at `a` or `b` are handled as long as the
/// singular endpoint is representable without cancellation (e.g. 0 or 1).
pub fn integrate_tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<Integral> {
    const T_MAX: f64 = 6.5;
    const MAX_LEVEL: u32 = 10;
    let half = 0.5 * (b - a);
    let mut evaluations = 0usize;

    let term = |t: f64, evals: &mut usize| -> f64 {
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        let e = (-2.0 * u.abs()).exp();
        // distance of the node from the nearer endpoint, in units of `half`
        let delta = 2.0 * e / (1.0 + e);
        let weight = std::f64::consts::FRAC_PI_2 * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        if weight == 0.0 || delta == 0.0 {
            return 0.0;
        }
        let x = if u < 0.0 { a + half * delta } else { b - half * delta };
        if x <= a || x >= b {
            return 0.0;
        }
        *evals += 1;
        let fx = f(x);
        if fx == 0.0 {
            0.0
        } else {
            weight * fx
        }
    };

    let mut h = 1.0;
    let mut sum = term(0.0, &mut evaluations);
    let mut k = 1.0;
    while k * h <= T_MAX {
        sum += term(k * h, &mut evaluations) + term(-k * h, &mut evaluations);
        k += 1.0;
    }
    let mut estimate = sum * h * half;
    for _level in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut k = 1.0;
        while k * h <= T_MAX {
            sum += term(k * h, &mut evaluations) + term(-k * h, &mut evaluations);
            k += 2.0;
        }
        let next = sum * h * half;
        if !next.is_finite() {
            return Err(Error::Numeric("tanh-sinh quadrature produced a non-finite value".into()));
        }
        let diff = (next - estimate).abs();
        estimate = next;
        if diff <= rel_tol * estimate.abs() || diff < 1e-300 {
            return Ok(Integral { value: estimate, abs_error: diff, evaluations });
        }
    }
    Err(Error::Numeric(format!(
        "tanh-sinh quadrature did not reach relative tolerance {rel_tol:e} on [{a}, {b}]"
    )))
}

/// Breakpoints `0, lo, lo·r, …, hi` with roughly geometric spacing; useful for
/// integrands on (0, ∞) truncated at `hi`.
pub fn geometric_breaks(lo: f64, hi: f64, panels_per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10().max(1.0);
    let n = ((decades * panels_per_decade as f64).ceil() as usize).max(1);
    let ratio = (hi / lo).powf(1.0 / n as f64);
    let mut out = Vec::with_capacity(n + 2);
    out.push(0.0);
    let mut x = lo;
    for _ in 0..n {
        out.push(x);
        x *= ratio;
    }
    out.push(hi);
    out.dedup_by(|b, a| !(*b > *a));
    out
}
