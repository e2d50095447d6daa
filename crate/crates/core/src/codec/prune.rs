use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::MixtureDictionary;

/// One component restricted to its eigenmodes above the water level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedComponent {
    pub mean: Vec<f64>,
    /// Retained eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Retained eigenvectors, one `n`-vector per eigenvalue.
    pub basis: Vec<Vec<f64>>,
}

/// What a decoder needs at a fixed water level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedDictionary {
    pub level: f64,
    pub n: usize,
    /// Checksum of the full dictionary this was cut from.
    pub source_checksum: u64,
    pub priors: Vec<f64>,
    pub components: Vec<PrunedComponent>,
}

impl PrunedDictionary {
    pub fn k(&self) -> usize {
        self.priors.len()
    }

    /// `L_c(μ)` for every component.
    pub fn retained(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.eigenvalues.len()).collect()
    }

    /// Retained eigenpairs as a fraction of `K·n`.
    pub fn memory_ratio(&self) -> f64 {
        self.retained().iter().sum::<usize>() as f64 / (self.k() * self.n) as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        let consistent = p.components.len() == p.k()
            && p.components.iter().all(|c| {
                c.mean.len() == p.n
                    && c.basis.len() == c.eigenvalues.len()
                    && c.basis.iter().all(|u| u.len() == p.n)
                    && c.eigenvalues.iter().all(|&l| l > p.level)
            });
        if !consistent || !(p.level > 0.0) {
            return Err(Error::InvalidDictionary("pruned dictionary is inconsistent".into()));
        }
        Ok(p)
    }
}

/// Keeps exactly the modes with `λ > μ`.
pub fn prune_dictionary(dict: &MixtureDictionary, level: f64) -> Result<PrunedDictionary> {
    if !(level > 0.0) {
        return Err(Error::Domain(format!("water level must be positive, got {level}")));
    }
    let components = (0..dict.k())
        .map(|c| {
            let eig = dict.eig(c);
            let keep = eig.eigvals.iter().take_while(|&&l| l > level).count();
            PrunedComponent {
                mean: dict.mean(c).to_vec(),
                eigenvalues: eig.eigvals[..keep].to_vec(),
                basis: (0..keep).map(|i| eig.column(i)).collect(),
            }
        })
        .collect();
    Ok(PrunedDictionary {
        level,
        n: dict.n(),
        source_checksum: dict.checksum(),
        priors: dict.priors().to_vec(),
        components,
    })
}
