//! Seeded synthetic mixtures: uniform-simplex priors, zero means, eigenvalues
//! uniform in a range and Haar-like orthonormal bases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gmm::{LabeledSamples, MixtureDictionary};
use crate::linalg::SymMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthSpec {
    pub k: usize,
    pub n: usize,
    pub seed: u64,
    pub variance_range: (f64, f64),
    pub sample_count: usize,
}

impl SynthSpec {
    pub fn new(k: usize, n: usize, seed: u64) -> Self {
        Self { k, n, seed, variance_range: (0.1, 10.0), sample_count: 100_000 }
    }

    pub fn with_samples(mut self, count: usize) -> Self {
        self.sample_count = count;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.variance_range;
        if self.k == 0 || self.n == 0 {
            return Err(Error::Domain("synthetic mixture needs k ≥ 1 and n ≥ 1".into()));
        }
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Domain(format!("variance range [{lo}, {hi}] must be positive and ordered")));
        }
        if self.sample_count == 0 {
            return Err(Error::Domain("sample count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Orthonormal `n × n` matrix (row-major) from modified Gram–Schmidt on a
/// standard-normal matrix; the implied triangular factor has a positive diagonal.
pub fn random_orthonormal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut cols: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let mut ok = true;
        for j in 0..n {
            for i in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let proj: f64 = done[i].iter().zip(&rest[0]).map(|(a, b)| a * b).sum();
                rest[0].iter_mut().zip(&done[i]).for_each(|(b, a)| *b -= proj * a);
            }
            let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 1e-10) {
                ok = false;
                break;
            }
            cols[j].iter_mut().for_each(|v| *v /= norm);
        }
        if ok {
            let mut q = vec![0.0; n * n];
            for (j, col) in cols.iter().enumerate() {
                for (i, v) in col.iter().enumerate() {
                    q[i * n + j] = *v;
                }
            }
            return q;
        }
    }
}

/// Draws the dictionary and `sample_count` labeled samples from it.
pub fn synth_mixture(spec: &SynthSpec) -> Result<(MixtureDictionary, LabeledSamples)> {
    let dict = synth_dictionary(spec)?;
    let samples = dict.sample(spec.sample_count, spec.seed.wrapping_add(0x5eed));
    Ok((dict, samples))
}

pub fn synth_dictionary(spec: &SynthSpec) -> Result<MixtureDictionary> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (k, n) = (spec.k, spec.n);
    let raw: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = raw.iter().sum();
    let priors: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let (lo, hi) = spec.variance_range;
    let covariances = (0..k)
        .map(|_| {
            let eigvals: Vec<f64> = (0..n).map(|_| if hi > lo { rng.random_range(lo..hi) } else { lo }).collect();
            let basis = random_orthonormal(n, &mut rng);
            SymMatrix::from_spectrum(&basis, &eigvals)
        })
        .collect();
    MixtureDictionary::new(priors, vec![vec![0.0; n]; k], covariances)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 12;
        let q = random_orthonormal(n, &mut rng);
        for a in 0..n {
            for b in 0..n {
                let d: f64 = (0..n).map(|i| q[i * n + a] * q[i * n + b]).sum();
                assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spectra_priors_and_determinism() {
        let spec = SynthSpec::new(6, 10, 42).with_samples(60_000);
        let (d, s) = synth_mixture(&spec).unwrap();
        assert_eq!(d.k(), 6);
        assert!((d.priors().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for e in d.eigs() {
            assert!(e.eigvals.iter().all(|&l| (0.1 - 1e-9..=10.0 + 1e-9).contains(&l)));
        }
        assert!(d.means().iter().flatten().all(|&m| m == 0.0));
        let labels = s.labels().unwrap();
        for (c, &p) in d.priors().iter().enumerate() {
            let f = labels.iter().filter(|&&l| l == c).count() as f64 / labels.len() as f64;
            let se = (p * (1.0 - p) / labels.len() as f64).sqrt();
            assert!((f - p).abs() <= 3.0 * se + 1e-12, "component {c}: {f} vs {p}");
        }
        let (d2, s2) = synth_mixture(&spec).unwrap();
        assert_eq!(d2, d);
        assert_eq!(s2.as_slice(), s.as_slice());
    }

    #[test]
    fn single_component() {
        let (d, _) = synth_mixture(&SynthSpec::new(1, 4, 1).with_samples(10)).unwrap();
        assert_eq!(d.k(), 1);
        assert_eq!(d.priors(), &[1.0]);
        assert!(synth_mixture(&SynthSpec::new(0, 4, 1)).is_err());
    }
}
