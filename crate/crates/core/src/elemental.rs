//! Elemental sets of a design matrix and their regression weights
//! ω_E = |X_Eᵀ X_E| / |Xᵀ X|, the telescoping chain of determinant ratios, and
//! a generator of t-distributed design matrices.
//!
//! Subsets are 0-based and hold as many rows as X has columns.

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{mvt_sample_rows_with, MvtParams};
use crate::error::{domain, Error, Result};
use crate::linalg::{r_append_row, r_transpose_solve, Matrix};
use crate::rng::Seed;

/// Largest number of subsets `all_weights` enumerates by default.
pub const DEFAULT_CAP: u64 = 1_000_000;

/// A full-column-rank design matrix with at least as many rows as columns.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    x: Matrix,
    ln_det_gram: f64,
}

impl DesignMatrix {
    pub fn new(x: Matrix) -> Result<Self> {
        if x.cols() == 0 {
            return domain("design matrix needs at least one column");
        }
        if x.rows() < x.cols() {
            return domain(format!("design matrix has {} rows but needs at least {}", x.rows(), x.cols()));
        }
        let ln_det_gram = x.log_det_gram();
        // Hadamard: |X'X| ≤ ∏ ‖x_j‖²; a ratio at rounding level is a rank defect
        let ln_hadamard: f64 = (0..x.cols())
            .map(|j| (0..x.rows()).map(|i| x[(i, j)] * x[(i, j)]).sum::<f64>().ln())
            .sum();
        let floor = 2.0 * (100.0 * x.rows() as f64 * f64::EPSILON).ln();
        if !ln_det_gram.is_finite() || ln_det_gram - ln_hadamard < floor {
            return Err(Error::Rank("design matrix is not of full column rank (|X'X| = 0)".into()));
        }
        Ok(Self { x, ln_det_gram })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.x
    }

    pub fn rows(&self) -> usize {
        self.x.rows()
    }

    /// Columns, which is also the size of every elemental set.
    pub fn cols(&self) -> usize {
        self.x.cols()
    }

    pub fn ln_det_gram(&self) -> f64 {
        self.ln_det_gram
    }

    fn check_set(&self, e: &[usize]) -> Result<()> {
        if e.len() != self.cols() {
            return domain(format!("elemental set has {} rows, expected {}", e.len(), self.cols()));
        }
        if e.windows(2).any(|w| w[0] >= w[1]) {
            return domain(format!("elemental set {e:?} must be strictly increasing"));
        }
        if e.iter().any(|&i| i >= self.rows()) {
            return domain(format!("elemental set {e:?} refers to rows beyond {}", self.rows()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElementalWeight {
    pub indices: Vec<usize>,
    pub weight: f64,
}

/// C(n, k), saturating at `u64::MAX`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Lexicographic k-subsets of 0..n.
#[derive(Debug, Clone)]
pub struct Subsets {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Subsets {
    pub fn new(n: usize, k: usize) -> Self {
        Self { n, current: (k <= n).then(|| (0..k).collect()) }
    }
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let cur = self.current.as_mut().unwrap();
        let k = cur.len();
        match (0..k).rev().find(|&i| cur[i] < self.n - k + i) {
            Some(i) => {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
            }
            None => self.current = None,
        }
        Some(out)
    }
}

/// All (p+1)-subsets of the `l` rows, lexicographically.
pub fn enumerate_elemental(l: usize, p: usize) -> Result<Vec<Vec<usize>>> {
    if l < p + 1 {
        return domain(format!("need l >= p + 1 for elemental sets, got l={l}, p={p}"));
    }
    Ok(Subsets::new(l, p + 1).collect())
}

/// ω_E for one elemental set. A singular X_E has weight 0.
pub fn weight_of_set(x: &DesignMatrix, e: &[usize]) -> Result<f64> {
    x.check_set(e)?;
    Ok(weight_unchecked(x, e))
}

fn weight_unchecked(x: &DesignMatrix, e: &[usize]) -> f64 {
    let (sign, ln_abs) = x.x.select_rows(e).log_det();
    if sign == 0.0 {
        return 0.0;
    }
    (2.0 * ln_abs - x.ln_det_gram).exp()
}

/// Weights of every elemental set, refusing more than `cap` sets.
pub fn all_weights(x: &DesignMatrix, cap: u64) -> Result<Vec<ElementalWeight>> {
    let count = binomial(x.rows() as u64, x.cols() as u64);
    if count > cap {
        return Err(Error::Size(format!(
            "{count} elemental sets exceed the cap of {cap}; use sampled-sets mode instead"
        )));
    }
    let sets: Vec<Vec<usize>> = Subsets::new(x.rows(), x.cols()).collect();
    Ok(sets
        .into_par_iter()
        .map(|indices| {
            let weight = weight_unchecked(x, &indices);
            ElementalWeight { indices, weight }
        })
        .collect())
}

/// Ratios t_i = |M_{i−1}| / |M_i| as the rows outside `e` are added in index
/// order to M₀ = X_Eᵀ X_E. Their product is ω_E.
pub fn chain_ratios(x: &DesignMatrix, e: &[usize]) -> Result<Vec<f64>> {
    x.check_set(e)?;
    let mut r = x.x.select_rows(e).qr_r();
    if (0..x.cols()).any(|k| r[(k, k)] == 0.0) {
        return Err(Error::Rank(format!("elemental set {e:?} is singular")));
    }
    let mut ratios = Vec::with_capacity(x.rows() - x.cols());
    let mut next = e.iter().peekable();
    for i in 0..x.rows() {
        if next.peek() == Some(&&i) {
            next.next();
            continue;
        }
        let row = x.x.row(i);
        let q: f64 = r_transpose_solve(&r, row).iter().map(|z| z * z).sum();
        ratios.push(1.0 / (1.0 + q));
        r_append_row(&mut r, row);
    }
    Ok(ratios)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SimulationMode {
    /// every elemental set of every matrix
    All,
    /// one uniformly chosen set per matrix
    SampledSets,
}

/// One simulated design with `l` rows from the t law `p`, with a leading
/// constant column when `intercept` is set.
pub fn generate_design(p: &MvtParams, l: usize, intercept: bool, seed: Seed) -> Result<DesignMatrix> {
    let cols = p.dim() + intercept as usize;
    if l < cols {
        return domain(format!("need at least {cols} rows for {cols}-column designs, got l={l}"));
    }
    let mut rng = seed.stream(0);
    generate_with(p, l, intercept, &mut rng)
}

fn generate_with<R: rand::Rng + ?Sized>(p: &MvtParams, l: usize, intercept: bool, rng: &mut R) -> Result<DesignMatrix> {
    let t = mvt_sample_rows_with(p, l, rng);
    if !intercept {
        return DesignMatrix::new(t);
    }
    let cols = p.dim() + 1;
    let mut data = Vec::with_capacity(l * cols);
    for r in 0..l {
        data.push(1.0);
        data.extend_from_slice(t.row(r));
    }
    DesignMatrix::new(Matrix::from_vec(l, cols, data)?)
}

/// A weight drawn by [`simulate_weights`], labelled by matrix and set (0-based).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedWeight {
    pub matrix: usize,
    pub indices: Vec<usize>,
    pub weight: f64,
}

/// Draws `n_matrices` designs via [`generate_design`] and returns elemental
/// weights. Matrix i uses seed.derive(i), so the output does not depend on
/// the thread count.
pub fn simulate_weights(
    p: &MvtParams,
    l: usize,
    n_matrices: usize,
    seed: Seed,
    mode: SimulationMode,
    intercept: bool,
) -> Result<Vec<SimulatedWeight>> {
    let cols = p.dim() + intercept as usize;
    if l < cols {
        return domain(format!("need at least {cols} rows for {cols}-column designs, got l={l}"));
    }
    if mode == SimulationMode::All && binomial(l as u64, cols as u64) > DEFAULT_CAP {
        return Err(Error::Size(format!(
            "C({l}, {cols}) elemental sets per matrix exceed the cap of {DEFAULT_CAP}; use sampled-sets mode"
        )));
    }
    let per_matrix: Vec<Result<Vec<SimulatedWeight>>> = (0..n_matrices)
        .into_par_iter()
        .map(|matrix| {
            let mut rng = seed.derive(matrix as u64).stream(0);
            let x = generate_with(p, l, intercept, &mut rng)?;
            match mode {
                SimulationMode::All => Ok(all_weights(&x, DEFAULT_CAP)?
                    .into_iter()
                    .map(|w| SimulatedWeight { matrix, indices: w.indices, weight: w.weight })
                    .collect()),
                SimulationMode::SampledSets => {
                    let mut indices = sample_indices(&mut rng, l, cols).into_vec();
                    indices.sort_unstable();
                    let weight = weight_unchecked(&x, &indices);
                    Ok(vec![SimulatedWeight { matrix, indices, weight }])
                }
            }
        })
        .collect();
    let mut out = Vec::new();
    for w in per_matrix {
        out.extend(w?);
    }
    Ok(out)
}

/// The weights alone from [`simulate_weights`].
pub fn simulate_weight_distribution(
    p: &MvtParams,
    l: usize,
    n_matrices: usize,
    seed: Seed,
    mode: SimulationMode,
    intercept: bool,
) -> Result<Vec<f64>> {
    Ok(simulate_weights(p, l, n_matrices, seed, mode, intercept)?.into_iter().map(|w| w.weight).collect())
}

/// Parses a headerless CSV of reals, one observation per line.
pub fn parse_matrix_csv(text: &str) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Config(format!("matrix file: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Config(format!("line {line}: '{f}' is not a finite number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Config(format!(
                    "line {line}: expected {} fields, found {}",
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Config("matrix file contains no rows".into()));
    }
    Matrix::from_rows(&rows)
}
