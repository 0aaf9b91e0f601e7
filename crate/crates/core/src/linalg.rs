//! Small dense row-major matrices with the factorizations the rest of the
//! crate needs: Cholesky, partially pivoted LU log-determinants, SPD solves
//! and Householder QR with Givens row updates.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Domain(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Domain("ragged matrix rows".into()));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Xᵀ X.
    pub fn gram(&self) -> Matrix {
        let c = self.cols;
        let mut g = Matrix::zeros(c, c);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..c {
                for b in a..c {
                    g.data[a * c + b] += r[a] * r[b];
                }
            }
        }
        for a in 0..c {
            for b in 0..a {
                g.data[a * c + b] = g.data[b * c + a];
            }
        }
        g
    }

    /// The submatrix formed by the listed rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }

    pub fn scale_columns(&self, d: &[f64]) -> Matrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            for (j, dj) in d.iter().enumerate() {
                out.data[i * self.cols + j] *= dj;
            }
        }
        out
    }

    /// Lower Cholesky factor of a symmetric positive-definite matrix.
    pub fn cholesky(&self) -> Result<Matrix> {
        if self.rows != self.cols {
            return Err(Error::Domain("cholesky needs a square matrix".into()));
        }
        let n = self.rows;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Config(format!("matrix is not positive definite (pivot {j} = {d:e})")));
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }

    /// Sign and log-magnitude of the determinant via partially pivoted LU.
    /// A singular matrix yields sign 0 and `-inf`.
    pub fn log_det(&self) -> (f64, f64) {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        let mut a = self.data.clone();
        let mut sign = 1.0;
        let mut log_abs = 0.0;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap();
            if pmax == 0.0 {
                return (0.0, f64::NEG_INFINITY);
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                sign = -sign;
            }
            let pivot = a[k * n + k];
            if pivot < 0.0 {
                sign = -sign;
            }
            log_abs += pivot.abs().ln();
            for i in (k + 1)..n {
                let factor = a[i * n + k] / pivot;
                if factor != 0.0 {
                    for j in (k + 1)..n {
                        a[i * n + j] -= factor * a[k * n + j];
                    }
                }
            }
        }
        (sign, log_abs)
    }

    /// The cols×cols upper-triangular factor R of a Householder QR of X,
    /// so that XᵀX = RᵀR. A dependent column leaves a zero on the diagonal.
    pub fn qr_r(&self) -> Matrix {
        let (m, n) = (self.rows, self.cols);
        assert!(m >= n, "QR needs rows >= cols");
        let mut a = self.data.clone();
        for k in 0..n {
            let norm = (k..m).map(|i| a[i * n + k] * a[i * n + k]).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let alpha = if a[k * n + k] > 0.0 { -norm } else { norm };
            let mut v: Vec<f64> = (k..m).map(|i| a[i * n + k]).collect();
            v[0] -= alpha;
            let vv: f64 = v.iter().map(|x| x * x).sum();
            for j in k..n {
                let dot: f64 = v.iter().enumerate().map(|(r, vr)| vr * a[(k + r) * n + j]).sum();
                let f = 2.0 * dot / vv;
                for (r, vr) in v.iter().enumerate() {
                    a[(k + r) * n + j] -= f * vr;
                }
            }
        }
        let mut r = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                r[(i, j)] = a[i * n + j];
            }
        }
        r
    }

    /// ln |XᵀX| from a Householder QR of X, without forming the Gram matrix.
    /// Returns `-inf` when a column is dependent on the previous ones.
    pub fn log_det_gram(&self) -> f64 {
        let r = self.qr_r();
        (0..self.cols).map(|k| 2.0 * r[(k, k)].abs().ln()).sum()
    }

    pub fn det(&self) -> f64 {
        let (s, l) = self.log_det();
        s * l.exp()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn add_outer(&mut self, x: &[f64]) {
        let n = self.cols;
        for a in 0..n {
            for b in 0..n {
                self.data[a * n + b] += x[a] * x[b];
            }
        }
    }
}

/// Solves L Lᵀ y = x for a lower Cholesky factor `l`.
pub fn cholesky_solve(l: &Matrix, x: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = x.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// Solves Rᵀ z = x for an upper-triangular `r`.
pub fn r_transpose_solve(r: &Matrix, x: &[f64]) -> Vec<f64> {
    let n = r.rows();
    let mut z = x.to_vec();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= r[(k, i)] * z[k];
        }
        z[i] = s / r[(i, i)];
    }
    z
}

/// Updates `r` to the R factor of the matrix with row `x` appended, by Givens rotations.
pub fn r_append_row(r: &mut Matrix, x: &[f64]) {
    let n = r.rows();
    let mut w = x.to_vec();
    for k in 0..n {
        let (a, b) = (r[(k, k)], w[k]);
        let h = a.hypot(b);
        if h == 0.0 {
            continue;
        }
        let (c, s) = (a / h, b / h);
        for j in k..n {
            let (rkj, wj) = (r[(k, j)], w[j]);
            r[(k, j)] = c * rkj + s * wj;
            w[j] = c * wj - s * rkj;
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}
