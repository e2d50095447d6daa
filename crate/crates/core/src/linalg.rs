//! Dense symmetric-matrix primitives: cyclic Jacobi eigendecomposition,
//! Cholesky factorization, log-determinants and Mahalanobis forms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;
const OFFDIAG_TOL: f64 = 1e-12;

/// Square symmetric matrix, stored in full row-major form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix dimension must be at least 1");
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    /// Builds a matrix from full row-major entries. Entries must be finite and
    /// symmetric to within rounding (1e-10 relative to the largest entry); the
    /// stored matrix is the exact symmetrization.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("matrix dimension must be at least 1".into()));
        }
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut data = data;
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                let diff = (a - b).abs();
                if diff > 1e-10 * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::NotSymmetric {
                        row: i,
                        col: j,
                        diff,
                    });
                }
                let avg = 0.5 * (a + b);
                data[i * n + j] = avg;
                data[j * n + i] = avg;
            }
        }
        Ok(Self { n, data })
    }

    /// Builds a matrix from its packed lower triangle (row i holds entries 0..=i).
    pub fn from_lower(n: usize, lower: &[f64]) -> Result<Self> {
        if lower.len() != n * (n + 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: n * (n + 1) / 2,
                found: lower.len(),
            });
        }
        if lower.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        let mut m = Self::zeros(n.max(1));
        let mut k = 0;
        for i in 0..n {
            for j in 0..=i {
                m.set(i, j, lower[k]);
                k += 1;
            }
        }
        Ok(m)
    }

    /// Packed lower triangle, row by row.
    pub fn lower(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * (self.n + 1) / 2);
        for i in 0..self.n {
            out.extend_from_slice(&self.data[i * self.n..i * self.n + i + 1]);
        }
        out
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both (i, j) and (j, i).
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += value;
        }
    }

    /// Entry-wise `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &SymMatrix, b: f64) -> SymMatrix {
        assert_eq!(self.n, other.n);
        SymMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }

    /// `U diag(values) Uᵀ` for a row-major `n×n` basis whose columns are the vectors.
    pub fn from_spectrum(basis: &[f64], values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = (0..n)
                    .map(|k| basis[i * n + k] * values[k] * basis[j * n + k])
                    .sum();
                m.set(i, j, v);
            }
        }
        m
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigenvalues in non-increasing order with the matching orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDecomposition {
    pub eigvals: Vec<f64>,
    /// Row-major `n×n`; column `k` is the eigenvector of `eigvals[k]`.
    pub basis: Vec<f64>,
}

impl EigenDecomposition {
    pub fn n(&self) -> usize {
        self.eigvals.len()
    }

    #[inline]
    pub fn basis_entry(&self, row: usize, col: usize) -> f64 {
        self.basis[row * self.n() + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|r| self.basis[r * n + col]).collect()
    }

    /// `basis · diag(eigvals) · basisᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        SymMatrix::from_spectrum(&self.basis, &self.eigvals)
    }
}

/// Cyclic Jacobi eigendecomposition with threshold sweeps.
///
/// The output is deterministic: eigenvalues are sorted in non-increasing order
/// (ties keep their diagonal position) and each eigenvector is signed so that
/// its largest-magnitude entry is positive.
pub fn sym_eig(a: &SymMatrix) -> Result<EigenDecomposition> {
    let n = a.n;
    if a.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix entries"));
    }
    let mut m = a.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let tol = OFFDIAG_TOL * a.frobenius_norm();

    let off_norm = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                s += m[p * n + q] * m[p * n + q];
            }
        }
        (2.0 * s).sqrt()
    };

    let mut converged = false;
    for sweep in 0..MAX_SWEEPS {
        let off = off_norm(&m);
        if off <= tol {
            converged = true;
            break;
        }
        let threshold = if sweep < 3 {
            let abs_sum: f64 = (0..n)
                .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
                .map(|(p, q)| m[p * n + q].abs())
                .sum();
            0.2 * abs_sum / (n * n) as f64
        } else {
            0.0
        };
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 || apq.abs() <= threshold {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                m[p * n + p] -= t * apq;
                m[q * n + q] += t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = m[r * n + p];
                        let arq = m[r * n + q];
                        let np = c * arp - s * arq;
                        let nq = s * arp + c * arq;
                        m[r * n + p] = np;
                        m[p * n + r] = np;
                        m[r * n + q] = nq;
                        m[q * n + r] = nq;
                    }
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = c * vrp - s * vrq;
                    v[r * n + q] = s * vrp + c * vrq;
                }
            }
        }
    }
    if !converged {
        let residual = off_norm(&m);
        if residual > tol {
            return Err(Error::NoConvergence {
                sweeps: MAX_SWEEPS,
                residual,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]).then(i.cmp(&j)));
    let eigvals: Vec<f64> = order.iter().map(|&i| m[i * n + i]).collect();
    let mut basis = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        let mut pivot = 0;
        for r in 1..n {
            if v[r * n + src].abs() > v[pivot * n + src].abs() {
                pivot = r;
            }
        }
        let sign = if v[pivot * n + src] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            basis[r * n + col] = sign * v[r * n + src];
        }
    }
    Ok(EigenDecomposition { eigvals, basis })
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn new(a: &SymMatrix) -> Result<Self> {
        let n = a.n;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(Self { n, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| 2.0 * self.l[i * self.n + i].ln()).sum()
    }

    /// Solves `L y = b` by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            y[i] = (b[i] - dot(row, &y[..i])) / self.l[i * n + i];
        }
        y
    }

    /// `dᵀ A⁻¹ d` as `|L⁻¹ d|²`.
    pub fn quad_form(&self, d: &[f64]) -> f64 {
        let n = self.n;
        let mut y = [0.0f64; 64];
        let mut heap;
        let y: &mut [f64] = if n <= y.len() {
            &mut y[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        let mut acc = 0.0;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let yi = (d[i] - dot(row, &y[..i])) / self.l[i * n + i];
            y[i] = yi;
            acc += yi * yi;
        }
        acc
    }

    /// `L z`.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| dot(&self.l[i * n..i * n + i + 1], &z[..=i]))
            .collect()
    }
}

/// Natural-log determinant of a positive-definite matrix via Cholesky.
pub fn log_det_psd(a: &SymMatrix) -> Result<f64> {
    Ok(Cholesky::new(a)?.log_det())
}

/// `(x - mean)ᵀ cov⁻¹ (x - mean)` without forming the inverse.
pub fn mahalanobis_sq(x: &[f64], mean: &[f64], cov: &SymMatrix) -> Result<f64> {
    let n = cov.n();
    for len in [x.len(), mean.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    let d: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    Ok(Cholesky::new(cov)?.quad_form(&d))
}
