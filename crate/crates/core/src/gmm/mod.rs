//! The shared mixture dictionary `{(π_c, μ_c, R_c)}` with cached spectral
//! decompositions, plus labeling, sampling and separability analysis.

mod em;
mod io;

pub use em::{average_log_likelihood, fit_em, fit_em_traced, run_em_from, EmConfig, EmFit, EmTrace};
pub use io::{DICT_MAGIC, DICT_VERSION};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{sym_eig, Cholesky, EigenDecomposition, SymMatrix};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A Gaussian mixture with per-component eigendecompositions and Cholesky factors.
#[derive(Debug, Clone)]
pub struct MixtureDictionary {
    priors: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<SymMatrix>,
    eigs: Vec<EigenDecomposition>,
    chol: Vec<Cholesky>,
    /// `ln π_c − ½ ln det R_c`
    log_weight: Vec<f64>,
}

impl PartialEq for MixtureDictionary {
    fn eq(&self, other: &Self) -> bool {
        self.priors == other.priors
            && self.means == other.means
            && self.covariances == other.covariances
            && self.eigs == other.eigs
    }
}

impl MixtureDictionary {
    /// Validates the parameters, renormalizes the priors and computes the
    /// eigendecomposition of every covariance.
    pub fn new(priors: Vec<f64>, means: Vec<Vec<f64>>, covariances: Vec<SymMatrix>) -> Result<Self> {
        let sum: f64 = priors.iter().sum();
        if !sum.is_finite() || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDictionary(format!("priors sum to {sum}")));
        }
        let priors: Vec<f64> = priors.iter().map(|p| p / sum).collect();
        let eigs = covariances.iter().map(sym_eig).collect::<Result<Vec<_>>>()?;
        Self::assemble(priors, means, covariances, eigs)
    }

    /// Builds a dictionary from stored parts without recomputing eigenpairs.
    /// The eigenpairs must reproduce each covariance within 1e-8 relative
    /// Frobenius norm.
    pub fn from_parts(
        priors: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<SymMatrix>,
        eigs: Vec<EigenDecomposition>,
    ) -> Result<Self> {
        let sum: f64 = priors.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDictionary(format!("priors sum to {sum}")));
        }
        if eigs.len() != covariances.len() {
            return Err(Error::InvalidDictionary("eigendecomposition count differs from K".into()));
        }
        for (c, (cov, e)) in covariances.iter().zip(&eigs).enumerate() {
            if e.n() != cov.n() || e.basis.len() != cov.n() * cov.n() {
                return Err(Error::InvalidDictionary(format!("component {c}: eigendecomposition shape")));
            }
            let err = cov.combine(1.0, &e.reconstruct(), -1.0).frobenius_norm();
            if err > 1e-8 * cov.frobenius_norm() {
                return Err(Error::InvalidDictionary(format!(
                    "component {c}: eigenpairs do not reproduce the covariance (error {err:e})"
                )));
            }
        }
        Self::assemble(priors, means, covariances, eigs)
    }

    fn assemble(
        priors: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<SymMatrix>,
        eigs: Vec<EigenDecomposition>,
    ) -> Result<Self> {
        let k = priors.len();
        if k == 0 {
            return Err(Error::InvalidDictionary("no components".into()));
        }
        if means.len() != k || covariances.len() != k {
            return Err(Error::InvalidDictionary("component arrays differ in length".into()));
        }
        let n = covariances[0].n();
        for (c, p) in priors.iter().enumerate() {
            if !(p.is_finite() && *p > 0.0) {
                return Err(Error::InvalidDictionary(format!("prior {c} is {p}")));
            }
        }
        for c in 0..k {
            if means[c].len() != n || covariances[c].n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: if means[c].len() != n { means[c].len() } else { covariances[c].n() },
                });
            }
            if means[c].iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("component mean"));
            }
        }
        let chol = covariances.iter().map(Cholesky::new).collect::<Result<Vec<_>>>()?;
        let log_weight = priors
            .iter()
            .zip(&chol)
            .map(|(p, l)| p.ln() - 0.5 * l.log_det())
            .collect();
        Ok(Self {
            priors,
            means,
            covariances,
            eigs,
            chol,
            log_weight,
        })
    }

    /// Single-component dictionary.
    pub fn single(mean: Vec<f64>, covariance: SymMatrix) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![covariance])
    }

    /// The moment-matched single Gaussian: overall mean and covariance of the mixture.
    pub fn pooled(&self) -> Result<Self> {
        let n = self.n();
        let mut mean = vec![0.0; n];
        for (p, m) in self.priors.iter().zip(&self.means) {
            for (a, b) in mean.iter_mut().zip(m) {
                *a += p * b;
            }
        }
        let mut cov = SymMatrix::zeros(n);
        for c in 0..self.k() {
            let p = self.priors[c];
            let m = &self.means[c];
            for i in 0..n {
                for j in 0..=i {
                    let v = cov.get(i, j)
                        + p * (self.covariances[c].get(i, j) + (m[i] - mean[i]) * (m[j] - mean[j]));
                    cov.set(i, j, v);
                }
            }
        }
        Self::single(mean, cov)
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.priors.len()
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.covariances[0].n()
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn mean(&self, c: usize) -> &[f64] {
        &self.means[c]
    }

    pub fn covariances(&self) -> &[SymMatrix] {
        &self.covariances
    }

    pub fn covariance(&self, c: usize) -> &SymMatrix {
        &self.covariances[c]
    }

    pub fn eig(&self, c: usize) -> &EigenDecomposition {
        &self.eigs[c]
    }

    pub fn eigs(&self) -> &[EigenDecomposition] {
        &self.eigs
    }

    pub fn cholesky(&self, c: usize) -> &Cholesky {
        &self.chol[c]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigs.iter().map(|e| e.eigvals[0]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Per-dimension signal energy `(1/n) Σ_c π_c (tr R_c + |μ_c|²)`.
    pub fn energy_per_dim(&self) -> f64 {
        let n = self.n() as f64;
        self.priors
            .iter()
            .zip(&self.covariances)
            .zip(&self.means)
            .map(|((p, r), m)| p * (r.trace() + m.iter().map(|v| v * v).sum::<f64>()))
            .sum::<f64>()
            / n
    }

    /// Label entropy `H(π)` in bits.
    pub fn label_entropy_bits(&self) -> f64 {
        crate::entropy_bits(&self.priors)
    }

    /// MAP score `ln π_c − ½ ln det R_c − ½ (x−μ_c)ᵀ R_c⁻¹ (x−μ_c)` for every component.
    pub fn map_scores(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let n = self.n();
        let mut d = vec![0.0; n];
        for c in 0..self.k() {
            for ((di, xi), mi) in d.iter_mut().zip(x).zip(&self.means[c]) {
                *di = xi - mi;
            }
            out.push(self.log_weight[c] - 0.5 * self.chol[c].quad_form(&d));
        }
    }

    /// `ln π_c + ln N(x; μ_c, R_c)` for every component.
    pub fn log_joint(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.k());
        self.map_scores(x, &mut out);
        let shift = 0.5 * self.n() as f64 * LN_2PI;
        out.iter_mut().for_each(|v| *v -= shift);
        out
    }

    /// Posterior component probabilities, computed in the log domain.
    pub fn responsibilities(&self, x: &[f64]) -> Vec<f64> {
        let mut l = self.log_joint(x);
        let lse = log_sum_exp(&l);
        l.iter_mut().for_each(|v| *v = (*v - lse).exp());
        l
    }

    /// `ln p(x)` under the mixture.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        log_sum_exp(&self.log_joint(x))
    }

    /// Most probable component; ties go to the smallest index.
    pub fn map_label(&self, x: &[f64]) -> usize {
        let mut scores = Vec::with_capacity(self.k());
        self.map_scores(x, &mut scores);
        argmax(&scores)
    }

    /// MAP labels for every row of `samples`.
    pub fn map_labels(&self, samples: &LabeledSamples) -> Vec<usize> {
        crate::par::map_indexed(samples.len(), |t| self.map_label(samples.row(t)))
    }

    /// Draws `count` vectors with their generating labels.
    pub fn sample(&self, count: usize, seed: u64) -> LabeledSamples {
        let n = self.n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cdf = Vec::with_capacity(self.k());
        let mut acc = 0.0;
        for p in &self.priors {
            acc += p;
            cdf.push(acc);
        }
        let mut data = Vec::with_capacity(count * n);
        let mut labels = Vec::with_capacity(count);
        let mut z = vec![0.0; n];
        for _ in 0..count {
            let u: f64 = rng.random::<f64>() * acc;
            let c = cdf.iter().position(|&f| u < f).unwrap_or(self.k() - 1);
            for zi in z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            let lz = self.chol[c].mul_lower(&z);
            data.extend(lz.iter().zip(&self.means[c]).map(|(a, m)| a + m));
            labels.push(c);
        }
        LabeledSamples {
            n,
            data,
            labels: Some(labels),
        }
    }

    /// Bhattacharyya distance between components `c` and `j`.
    pub fn bhattacharyya_distance(&self, c: usize, j: usize) -> Result<f64> {
        let avg = self.covariances[c].combine(0.5, &self.covariances[j], 0.5);
        let chol = Cholesky::new(&avg)?;
        let d: Vec<f64> = self.means[c].iter().zip(&self.means[j]).map(|(a, b)| a - b).collect();
        let maha = chol.quad_form(&d);
        let det_term = chol.log_det() - 0.5 * (self.chol[c].log_det() + self.chol[j].log_det());
        Ok((0.125 * maha + 0.5 * det_term).max(0.0))
    }

    /// `Σ_{c<j} √(π_c π_j) e^{−B_{c,j}}`, clamped to `[0, 1]`.
    pub fn map_error_union_bound(&self) -> Result<f64> {
        let mut total = 0.0;
        for c in 0..self.k() {
            for j in c + 1..self.k() {
                let b = self.bhattacharyya_distance(c, j)?;
                total += (self.priors[c] * self.priors[j]).sqrt() * (-b).exp();
            }
        }
        Ok(total.clamp(0.0, 1.0))
    }

    /// Same dictionary with every mean shifted by `offset`.
    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        let means = self
            .means
            .iter()
            .map(|m| m.iter().zip(offset).map(|(a, b)| a + b).collect())
            .collect();
        Self::from_parts(self.priors.clone(), means, self.covariances.clone(), self.eigs.clone())
    }
}

/// Row-major sample matrix with optional generating labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSamples {
    n: usize,
    data: Vec<f64>,
    labels: Option<Vec<usize>>,
}

impl LabeledSamples {
    pub fn new(n: usize, data: Vec<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("sample dimension must be at least 1".into()));
        }
        if !data.len().is_multiple_of(n) {
            return Err(Error::DimensionMismatch {
                expected: n * (data.len() / n + 1),
                found: data.len(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != data.len() / n {
                return Err(Error::DimensionMismatch {
                    expected: data.len() / n,
                    found: l.len(),
                });
            }
        }
        Ok(Self { n, data, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(1, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(n, data, None)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.n..(t + 1) * self.n]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn into_parts(self) -> (usize, Vec<f64>, Option<Vec<usize>>) {
        (self.n, self.data, self.labels)
    }

    /// Mean squared norm per dimension, `Σ|x|² / (m n)`.
    pub fn energy_per_dim(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64
    }

    /// Sample mean and maximum-likelihood (1/m) covariance.
    pub fn mean_and_covariance(&self) -> (Vec<f64>, SymMatrix) {
        let n = self.n;
        let m = self.len().max(1) as f64;
        let mut mean = vec![0.0; n];
        for row in self.rows() {
            for (a, b) in mean.iter_mut().zip(row) {
                *a += b;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m);
        let mut cov = SymMatrix::zeros(n);
        let mut acc = vec![0.0; n * (n + 1) / 2];
        let mut d = vec![0.0; n];
        for row in self.rows() {
            for ((di, x), mu) in d.iter_mut().zip(row).zip(&mean) {
                *di = x - mu;
            }
            let mut k = 0;
            for i in 0..n {
                for j in 0..=i {
                    acc[k] += d[i] * d[j];
                    k += 1;
                }
            }
        }
        let mut k = 0;
        for i in 0..n {
            for j in 0..=i {
                cov.set(i, j, acc[k] / m);
                k += 1;
            }
        }
        (mean, cov)
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
