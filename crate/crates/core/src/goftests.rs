//! Empirical distribution functions and goodness-of-fit statistics:
//! Kolmogorov–Smirnov (one- and two-sample), Anderson–Darling (one-sample and
//! the standardized two-sample statistic with midranks) and the
//! total-variation distance between two ECDFs on [0, 1].

use serde::Serialize;

use crate::error::{domain, Result};

/// Right-continuous step function of a finite sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(sample: &[f64]) -> Result<Self> {
        if sample.is_empty() {
            return domain("empirical distribution of an empty sample");
        }
        if sample.iter().any(|v| v.is_nan()) {
            return domain("sample contains NaN");
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    /// #{values ≤ x}/n.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.n() as f64
    }
}

pub fn ecdf(sample: &[f64]) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(sample)
}

pub fn ecdf_eval(e: &EmpiricalCdf, x: f64) -> f64 {
    e.eval(x)
}

/// Significance levels with tabulated critical values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Alpha {
    #[serde(rename = "0.01")]
    OnePercent,
    #[serde(rename = "0.05")]
    FivePercent,
}

impl Alpha {
    pub fn value(self) -> f64 {
        match self {
            Alpha::OnePercent => 0.01,
            Alpha::FivePercent => 0.05,
        }
    }

    pub fn from_value(a: f64) -> Result<Self> {
        if a == 0.01 {
            Ok(Alpha::OnePercent)
        } else if a == 0.05 {
            Ok(Alpha::FivePercent)
        } else {
            domain(format!("alpha must be 0.01 or 0.05, got {a}"))
        }
    }

    /// Asymptotic Kolmogorov quantile c(α).
    pub fn kolmogorov(self) -> f64 {
        match self {
            Alpha::OnePercent => 1.628,
            Alpha::FivePercent => 1.358,
        }
    }

    /// Critical point of the standardized two-sample Anderson–Darling statistic.
    pub fn ad_two_sample(self) -> f64 {
        match self {
            Alpha::OnePercent => 3.752,
            Alpha::FivePercent => 1.960,
        }
    }

    /// Critical point of the one-sample A² against a fully specified law.
    pub fn ad_one_sample(self) -> f64 {
        match self {
            Alpha::OnePercent => 3.857,
            Alpha::FivePercent => 2.492,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GofResult {
    pub statistic: f64,
    pub n: usize,
    /// second sample size for two-sample tests
    pub n2: Option<usize>,
    pub alpha: f64,
    pub critical_value: f64,
    /// statistic below the critical value: no evidence the laws differ
    pub identical: bool,
}

impl GofResult {
    fn new(statistic: f64, n: usize, n2: Option<usize>, alpha: Alpha, critical_value: f64) -> Self {
        Self { statistic, n, n2, alpha: alpha.value(), critical_value, identical: statistic < critical_value }
    }
}

/// sup |ECDF − F| evaluated on both sides of every jump.
pub fn ks_statistic(sample: &EmpiricalCdf, cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sample.n() as f64;
    let xs = sample.sorted_values();
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        // a run of ties jumps once
        let mut j = i;
        while j + 1 < xs.len() && xs[j + 1] == xs[i] {
            j += 1;
        }
        let f = cdf(xs[i]);
        d = d.max((j + 1) as f64 / n - f).max(f - i as f64 / n);
        i = j + 1;
    }
    d
}

pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64, alpha: Alpha) -> Result<GofResult> {
    let e = EmpiricalCdf::new(sample)?;
    let d = ks_statistic(&e, cdf);
    let n = e.n();
    Ok(GofResult::new(d, n, None, alpha, alpha.kolmogorov() / (n as f64).sqrt()))
}

/// sup |ECDF_a − ECDF_b| over the merged sample.
pub fn ks_two_statistic(a: &EmpiricalCdf, b: &EmpiricalCdf) -> f64 {
    let (xa, xb) = (a.sorted_values(), b.sorted_values());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let v = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] == v {
            i += 1;
        }
        while j < xb.len() && xb[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    // once one sample is exhausted the gap only shrinks towards 0
    d.max((i as f64 / na - j as f64 / nb).abs())
}

pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: Alpha) -> Result<GofResult> {
    let (ea, eb) = (EmpiricalCdf::new(a)?, EmpiricalCdf::new(b)?);
    let d = ks_two_statistic(&ea, &eb);
    let (na, nb) = (ea.n() as f64, eb.n() as f64);
    let crit = alpha.kolmogorov() * ((na + nb) / (na * nb)).sqrt();
    Ok(GofResult::new(d, ea.n(), Some(eb.n()), alpha, crit))
}

/// Midrank k-sample A²_akN and its null variance for k = 2.
fn ad_midrank(samples: [&[f64]; 2]) -> (f64, f64) {
    let k = samples.len() as f64;
    let mut sorted: Vec<Vec<f64>> = samples.iter().map(|s| s.to_vec()).collect();
    for s in &mut sorted {
        s.sort_by(f64::total_cmp);
    }
    let mut pooled: Vec<f64> = sorted.concat();
    pooled.sort_by(f64::total_cmp);
    let big_n = pooled.len() as f64;
    let mut distinct: Vec<(f64, f64)> = Vec::new();
    for &v in &pooled {
        match distinct.last_mut() {
            Some((z, l)) if *z == v => *l += 1.0,
            _ => distinct.push((v, 1.0)),
        }
    }
    let mut a2 = 0.0;
    for s in &sorted {
        let ni = s.len() as f64;
        let mut inner = 0.0;
        let mut b_cum = 0.0;
        for &(z, l) in &distinct {
            b_cum += l;
            let m = s.partition_point(|&v| v <= z) as f64;
            let f = m - s.partition_point(|&v| v < z) as f64;
            let ba = b_cum - 0.5 * l;
            let ma = m - 0.5 * f;
            let denom = ba * (big_n - ba) - 0.25 * big_n * l;
            if denom > 0.0 {
                inner += l / big_n * (big_n * ma - ni * ba).powi(2) / denom;
            }
        }
        a2 += inner / ni;
    }
    a2 *= (big_n - 1.0) / big_n;

    let hh: f64 = sorted.iter().map(|s| 1.0 / s.len() as f64).sum();
    let nn = pooled.len();
    let h: f64 = (1..nn).map(|i| 1.0 / i as f64).sum();
    let mut g = 0.0;
    // g = Σ_{i=1}^{N−2} Σ_{j=i+1}^{N−1} 1/((N−i) j), with suffix sums over j
    let mut suffix = 0.0;
    for i in (1..nn.saturating_sub(1)).rev() {
        suffix += 1.0 / (i + 1) as f64;
        g += suffix / (big_n - i as f64);
    }
    let a = (4.0 * g - 6.0) * (k - 1.0) + (10.0 - 6.0 * g) * hh;
    let b = (2.0 * g - 4.0) * k * k + 8.0 * h * k + (2.0 * g - 14.0 * h - 4.0) * hh - 8.0 * h + 4.0 * g - 6.0;
    let c = (6.0 * h + 2.0 * g - 2.0) * k * k + (4.0 * h - 4.0 * g + 6.0) * k + (2.0 * h - 6.0) * hh + 4.0 * h;
    let d = (2.0 * h + 6.0) * k * k - 4.0 * h * k;
    let var = (a * big_n.powi(3) + b * big_n * big_n + c * big_n + d)
        / ((big_n - 1.0) * (big_n - 2.0) * (big_n - 3.0));
    (a2, var)
}

/// Standardized two-sample Anderson–Darling statistic (A² − 1)/σ with
/// midranks for ties. Needs at least four pooled observations.
pub fn ad_two_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return domain("Anderson-Darling needs two nonempty samples");
    }
    if a.len() + b.len() < 4 {
        return domain("Anderson-Darling needs at least 4 pooled observations");
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return domain("sample contains NaN");
    }
    let (a2, var) = ad_midrank([a, b]);
    Ok((a2 - 1.0) / var.sqrt())
}

pub fn ad_two_sample(a: &[f64], b: &[f64], alpha: Alpha) -> Result<GofResult> {
    let t = ad_two_statistic(a, b)?;
    Ok(GofResult::new(t, a.len(), Some(b.len()), alpha, alpha.ad_two_sample()))
}

/// One-sample A² against a fully specified distribution function.
pub fn ad_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64, alpha: Alpha) -> Result<GofResult> {
    let e = EmpiricalCdf::new(sample)?;
    let xs = e.sorted_values();
    let n = xs.len() as f64;
    let clamp = |p: f64| p.clamp(1e-300, 1.0 - f64::EPSILON / 2.0);
    let f: Vec<f64> = xs.iter().map(|&x| clamp(cdf(x))).collect();
    let s: f64 = (0..xs.len())
        .map(|i| (2 * i + 1) as f64 * (f[i].ln() + (-f[xs.len() - 1 - i]).ln_1p()))
        .sum();
    let a2 = -n - s / n;
    Ok(GofResult::new(a2, e.n(), None, alpha, alpha.ad_one_sample()))
}

/// ½ ∫₀¹ |F_a(t) − F_b(t)| dt, exact over the merged jump grid.
pub fn tv_distance(a: &EmpiricalCdf, b: &EmpiricalCdf) -> Result<f64> {
    let inside = |e: &EmpiricalCdf| {
        let v = e.sorted_values();
        v[0] >= 0.0 && v[v.len() - 1] <= 1.0
    };
    if !inside(a) || !inside(b) {
        return domain("total-variation distance needs samples in [0, 1]");
    }
    let mut knots: Vec<f64> = a.sorted_values().iter().chain(b.sorted_values()).copied().collect();
    knots.push(0.0);
    knots.push(1.0);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let total: f64 = knots.windows(2).map(|w| (a.eval(w[0]) - b.eval(w[0])).abs() * (w[1] - w[0])).sum();
    Ok(0.5 * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{par_draw, Seed};
    use proptest::prelude::*;
    use rand::Rng;

    fn uniform(n: usize, seed: u64) -> Vec<f64> {
        par_draw(n, Seed(seed), |r| r.random::<f64>())
    }

    #[test]
    fn ecdf_basics() {
        let e = ecdf(&[3.0, 1.0, 2.0]).unwrap();
        assert!((ecdf_eval(&e, 2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(3.0), 1.0);
        assert!(ecdf(&[]).is_err());
        assert!(ecdf(&[f64::NAN]).is_err());
    }

    #[test]
    fn ecdf_of_uniforms() {
        let e = ecdf(&uniform(100_000, 3)).unwrap();
        assert!(ks_statistic(&e, |x| x.clamp(0.0, 1.0)) < 0.01);
    }

    #[test]
    fn ks_one_sample_by_enumeration() {
        let n = 9;
        let xs: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
        // brute force over a fine grid including both sides of every jump
        let e = ecdf(&xs).unwrap();
        let mut brute: f64 = 0.0;
        for &x in &xs {
            brute = brute.max((e.eval(x) - x).abs()).max((e.eval(x - 1e-12) - x).abs());
        }
        let r = ks_one_sample(&xs, |x| x, Alpha::OnePercent).unwrap();
        assert!((r.statistic - brute).abs() < 1e-11);
        assert!((r.statistic - 0.1).abs() < 1e-12);
        assert!((r.critical_value - 1.628 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ks_single_point_at_median() {
        let r = ks_one_sample(&[0.5], |x| x, Alpha::OnePercent).unwrap();
        assert_eq!(r.statistic, 0.5);
    }

    #[test]
    fn ks_two_sample_examples() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0], Alpha::OnePercent).unwrap().statistic, 1.0);
        assert_eq!(ks_two_sample(&[1.0, 3.0], &[2.0, 4.0], Alpha::OnePercent).unwrap().statistic, 0.5);
        let a = uniform(200, 1);
        let r = ks_two_sample(&a, &a, Alpha::OnePercent).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.critical_value - 0.1628).abs() < 1e-12);
        let a = [0.12, 0.5, 0.33, 0.91, 0.07, 0.64, 0.28];
        let b = [0.45, 0.81, 0.99, 0.73, 0.58, 0.2];
        // scipy.stats.ks_2samp
        let d = ks_two_sample(&a, &b, Alpha::OnePercent).unwrap().statistic;
        assert!((d - 0.404_761_904_761_904_77).abs() < 1e-15);
    }

    #[test]
    fn ks_two_sample_with_ties() {
        let d = ks_two_sample(&[1.0, 2.0, 2.0, 3.0], &[2.0, 2.0, 4.0], Alpha::OnePercent).unwrap().statistic;
        // at x = 2: 3/4 vs 2/3; at x = 1: 1/4 vs 0; at 3: 1 vs 2/3
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ad_matches_scipy() {
        // scipy.stats.anderson_ksamp(..., midrank=True).statistic
        let a = [0.12, 0.5, 0.33, 0.91, 0.07, 0.64, 0.28];
        let b = [0.45, 0.81, 0.99, 0.73, 0.58, 0.2];
        let t = ad_two_statistic(&a, &b).unwrap();
        assert!((t - 0.067_188_409_172_527_69).abs() < 1e-12, "{t}");
        let c = [1.0, 2.0, 2.0, 3.0, 5.0, 5.0, 5.0, 8.0];
        let d = [2.0, 3.0, 3.0, 4.0, 5.0, 7.0, 9.0, 9.0, 10.0];
        let t = ad_two_statistic(&c, &d).unwrap();
        assert!((t - 0.498_871_444_699_135_64).abs() < 1e-12, "{t}");
    }

    #[test]
    fn ad_identical_samples_negative() {
        let a = uniform(200, 8);
        let r = ad_two_sample(&a, &a, Alpha::OnePercent).unwrap();
        assert!(r.statistic < 0.0);
        assert!(r.identical);
        assert!(ad_two_statistic(&[1.0], &[2.0]).is_err());
        assert!(ad_two_statistic(&[], &[2.0, 3.0, 4.0, 5.0]).is_err());
    }

    #[test]
    fn ad_detects_shift() {
        let a = uniform(200, 8);
        let b: Vec<f64> = uniform(200, 9).iter().map(|v| v * 0.7).collect();
        let r = ad_two_sample(&a, &b, Alpha::OnePercent).unwrap();
        assert!(!r.identical, "{}", r.statistic);
    }

    #[test]
    fn ad_one_sample_reference() {
        let x = [0.1, 0.25, 0.4, 0.62, 0.77, 0.9];
        let r = ad_one_sample(&x, |v| v, Alpha::OnePercent).unwrap();
        // direct evaluation of the A² sum
        assert!((r.statistic - 0.128_972_969_485_783_3).abs() < 1e-13);
        assert_eq!(r.critical_value, 3.857);
    }

    #[test]
    fn tv_examples() {
        let a = ecdf(&[0.2, 0.5]).unwrap();
        assert_eq!(tv_distance(&a, &a).unwrap(), 0.0);
        let z = ecdf(&[0.0]).unwrap();
        let o = ecdf(&[1.0]).unwrap();
        assert!((tv_distance(&z, &o).unwrap() - 0.5).abs() < 1e-15);
        assert!(tv_distance(&ecdf(&[1.5]).unwrap(), &a).is_err());
        // F_a − F_b = 1/2 on [0.2, 0.5) plus 0 elsewhere against the point mass at 0.5
        let b = ecdf(&[0.5]).unwrap();
        assert!((tv_distance(&a, &b).unwrap() - 0.5 * 0.5 * 0.3).abs() < 1e-15);
    }

    #[test]
    fn statistics_invariant_under_monotone_map() {
        let a = uniform(300, 4);
        let b: Vec<f64> = uniform(250, 5).iter().map(|v| v.powf(1.3)).collect();
        let cube = |v: &Vec<f64>| v.iter().map(|x| x.powi(3)).collect::<Vec<_>>();
        let d1 = ks_two_sample(&a, &b, Alpha::OnePercent).unwrap().statistic;
        let d2 = ks_two_sample(&cube(&a), &cube(&b), Alpha::OnePercent).unwrap().statistic;
        assert_eq!(d1, d2);
        let s1 = ad_two_statistic(&a, &b).unwrap();
        let s2 = ad_two_statistic(&cube(&a), &cube(&b)).unwrap();
        assert!((s1 - s2).abs() < 1e-12);
        let k1 = ks_one_sample(&a, |x| x, Alpha::OnePercent).unwrap().statistic;
        let k2 = ks_one_sample(&cube(&a), |x| x.cbrt(), Alpha::OnePercent).unwrap().statistic;
        assert!((k1 - k2).abs() < 1e-12);
    }

    #[test]
    fn alpha_values() {
        assert_eq!(Alpha::from_value(0.05).unwrap(), Alpha::FivePercent);
        assert!(Alpha::from_value(0.1).is_err());
        let r = ks_two_sample(&[0.1, 0.2], &[0.3], Alpha::FivePercent).unwrap();
        assert_eq!(r.alpha, 0.05);
        assert_eq!(r.n2, Some(1));
    }

    proptest! {
        #[test]
        fn ks_two_symmetric(seed in 0u64..5000, na in 1usize..60, nb in 1usize..60) {
            let a = uniform(na, seed);
            let b = uniform(nb, seed + 7919);
            let (x, y) = (EmpiricalCdf::new(&a).unwrap(), EmpiricalCdf::new(&b).unwrap());
            prop_assert_eq!(ks_two_statistic(&x, &y), ks_two_statistic(&y, &x));
        }

        #[test]
        fn tv_is_a_metric(seed in 0u64..5000) {
            let e: Vec<EmpiricalCdf> = (0..3).map(|k| EmpiricalCdf::new(&uniform(40 + k * 7, seed * 3 + k as u64)).unwrap()).collect();
            let d = |i: usize, j: usize| tv_distance(&e[i], &e[j]).unwrap();
            prop_assert_eq!(d(0, 0), 0.0);
            prop_assert!((d(0, 1) - d(1, 0)).abs() < 1e-12);
            prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12);
            prop_assert!(d(0, 1) > 0.0);
        }
    }
}
