//! Reverse waterfilling over the pooled eigenmodes of every component with a
//! single global water level, the converse/achievability sandwich, the
//! entropy decomposition, and the per-class (WUTC) allocator used as a baseline.
//!
//! Rates are in bits per source dimension and distortions are per-dimension
//! mean squared error.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gmm::MixtureDictionary;

const BISECTION_ITERS: usize = 200;
const RATE_BRACKET_FLOOR: f64 = 1e-15;

/// One transform mode `(c, i)` of the bathtub: height `λ_{c,i}`, width `π_c / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mode {
    pub component: usize,
    pub index: usize,
    pub eigenvalue: f64,
    pub weight: f64,
}

/// Every eigenmode of every component, component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledSpectrum {
    k: usize,
    n: usize,
    modes: Vec<Mode>,
    max_eigenvalue: f64,
}

impl PooledSpectrum {
    /// `eigenvalues[c]` lists the `n` eigenvalues of component `c`.
    pub fn new(priors: &[f64], eigenvalues: &[Vec<f64>]) -> Result<Self> {
        let k = priors.len();
        if k == 0 || eigenvalues.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: eigenvalues.len(),
            });
        }
        let n = eigenvalues[0].len();
        if n == 0 {
            return Err(Error::Domain("empty spectrum".into()));
        }
        let mut modes = Vec::with_capacity(k * n);
        let mut max_eigenvalue = 0.0f64;
        for (c, (p, vals)) in priors.iter().zip(eigenvalues).enumerate() {
            if vals.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: vals.len(),
                });
            }
            for (i, &l) in vals.iter().enumerate() {
                if !(l > 0.0 && l.is_finite()) {
                    return Err(Error::NotPositiveDefinite { pivot: i, value: l });
                }
                max_eigenvalue = max_eigenvalue.max(l);
                modes.push(Mode {
                    component: c,
                    index: i,
                    eigenvalue: l,
                    weight: p / n as f64,
                });
            }
        }
        Ok(Self {
            k,
            n,
            modes,
            max_eigenvalue,
        })
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.max_eigenvalue
    }

    pub fn total_weight(&self) -> f64 {
        self.modes.iter().map(|m| m.weight).sum()
    }

    /// Distortion with every mode submerged, `Σ weight · λ`.
    pub fn max_distortion(&self) -> f64 {
        self.modes.iter().map(|m| m.weight * m.eigenvalue).sum()
    }

    fn check_level(level: f64) -> Result<()> {
        if !(level > 0.0) || level.is_nan() {
            return Err(Error::Domain(format!("water level must be positive, got {level}")));
        }
        Ok(())
    }

    fn rate_at(&self, level: f64) -> f64 {
        self.modes
            .iter()
            .filter(|m| m.eigenvalue > level)
            .map(|m| m.weight * 0.5 * (m.eigenvalue / level).log2())
            .sum()
    }

    fn distortion_at(&self, level: f64) -> f64 {
        self.modes.iter().map(|m| m.weight * m.eigenvalue.min(level)).sum()
    }

    /// `(R(μ), D(μ))`.
    pub fn evaluate(&self, level: f64) -> Result<RdPair> {
        Self::check_level(level)?;
        Ok(RdPair {
            rate: self.rate_at(level),
            distortion: self.distortion_at(level),
        })
    }

    /// Water level whose conditional rate equals `rate` (bits/dim).
    pub fn solve_level_for_rate(&self, rate: f64) -> Result<f64> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::Domain(format!("rate target must be non-negative, got {rate}")));
        }
        if rate == 0.0 {
            return Ok(self.max_eigenvalue);
        }
        let mut lo = (RATE_BRACKET_FLOOR * self.max_eigenvalue).ln();
        let mut hi = self.max_eigenvalue.ln();
        let max_rate = self.rate_at(lo.exp());
        if max_rate < rate {
            return Err(Error::Domain(format!(
                "rate {rate} exceeds the attainable {max_rate} bits/dim at the bracket floor"
            )));
        }
        let mut best = (f64::INFINITY, hi.exp());
        for _ in 0..BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            let level = mid.exp();
            let r = self.rate_at(level);
            let err = (r - rate).abs();
            if err < best.0 {
                best = (err, level);
            }
            if err <= 1e-13 * rate.max(1.0) || mid == lo || mid == hi {
                break;
            }
            if r > rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(best.1)
    }

    /// Water level whose distortion equals `distortion`.
    pub fn solve_level_for_distortion(&self, distortion: f64) -> Result<f64> {
        let d_max = self.max_distortion();
        if !(distortion > 0.0 && distortion <= d_max) {
            return Err(Error::Domain(format!(
                "distortion {distortion} outside the attainable interval (0, {d_max}]"
            )));
        }
        if distortion == d_max {
            return Ok(self.max_eigenvalue);
        }
        let (mut lo, mut hi) = (0.0f64, self.max_eigenvalue);
        for _ in 0..BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            let d = self.distortion_at(mid);
            if d == distortion {
                return Ok(mid);
            }
            if d < distortion {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // D is linear between consecutive eigenvalues; finish on that segment.
        let level = 0.5 * (lo + hi);
        let (mut submerged, mut active_weight) = (0.0, 0.0);
        for m in &self.modes {
            if m.eigenvalue > level {
                active_weight += m.weight;
            } else {
                submerged += m.weight * m.eigenvalue;
            }
        }
        if active_weight > 0.0 {
            let exact = (distortion - submerged) / active_weight;
            if exact > 0.0 && (exact - level).abs() <= (hi - lo).max(f64::EPSILON * level) * 4.0 {
                let a = (self.distortion_at(exact) - distortion).abs();
                let b = (self.distortion_at(level) - distortion).abs();
                if a <= b {
                    return Ok(exact);
                }
            }
        }
        Ok(level)
    }

    /// Per-mode rates and distortions at water level `level`.
    pub fn allocation(&self, level: f64) -> Result<WaterAllocation> {
        Self::check_level(level)?;
        let entries = self
            .modes
            .iter()
            .map(|m| ModeAlloc::at_level(m.eigenvalue, m.weight, level))
            .collect();
        let table = ModeTable {
            k: self.k,
            n: self.n,
            entries,
        };
        Ok(WaterAllocation {
            level,
            rate: table.rate(),
            distortion: table.distortion(),
            table,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RdPair {
    pub rate: f64,
    pub distortion: f64,
}

/// Rate and distortion assigned to one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeAlloc {
    pub eigenvalue: f64,
    pub weight: f64,
    pub rate: f64,
    pub distortion: f64,
    pub active: bool,
}

impl ModeAlloc {
    pub fn at_level(eigenvalue: f64, weight: f64, level: f64) -> Self {
        // λ = μ counts as inactive: [·]₊ is zero there.
        let active = eigenvalue > level;
        Self {
            eigenvalue,
            weight,
            rate: if active { 0.5 * (eigenvalue / level).log2() } else { 0.0 },
            distortion: eigenvalue.min(level),
            active,
        }
    }
}

/// Per-mode allocation for all `K × n` modes, component-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeTable {
    k: usize,
    n: usize,
    entries: Vec<ModeAlloc>,
}

impl ModeTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, component: usize, index: usize) -> &ModeAlloc {
        &self.entries[component * self.n + index]
    }

    pub fn component(&self, component: usize) -> &[ModeAlloc] {
        &self.entries[component * self.n..(component + 1) * self.n]
    }

    pub fn entries(&self) -> &[ModeAlloc] {
        &self.entries
    }

    /// `L_c = |{i : active}|`.
    pub fn active_count(&self, component: usize) -> usize {
        self.component(component).iter().filter(|m| m.active).count()
    }

    pub fn rate(&self) -> f64 {
        self.entries.iter().map(|m| m.weight * m.rate).sum()
    }

    pub fn distortion(&self) -> f64 {
        self.entries.iter().map(|m| m.weight * m.distortion).sum()
    }
}

/// Allocation induced by one global water level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaterAllocation {
    pub level: f64,
    pub rate: f64,
    pub distortion: f64,
    pub table: ModeTable,
}

/// Converse and achievability rates at one water level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichBounds {
    pub level: f64,
    pub distortion: f64,
    pub r_cond: f64,
    pub label_rate: f64,
    pub r_upper: f64,
    pub log2k_over_n: f64,
}

/// Differential-entropy decomposition in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyTerms {
    pub h_cond: f64,
    pub h_label: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Per-class water levels with one rate budget per class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WutcAllocation {
    pub levels: Vec<f64>,
    pub rate: f64,
    pub distortion: f64,
    pub table: ModeTable,
}

pub fn pooled_spectrum(dict: &MixtureDictionary) -> Result<PooledSpectrum> {
    let vals: Vec<Vec<f64>> = dict.eigs().iter().map(|e| e.eigvals.clone()).collect();
    PooledSpectrum::new(dict.priors(), &vals)
}

pub fn evaluate(spectrum: &PooledSpectrum, level: f64) -> Result<RdPair> {
    spectrum.evaluate(level)
}

pub fn solve_level_for_rate(spectrum: &PooledSpectrum, rate: f64) -> Result<f64> {
    spectrum.solve_level_for_rate(rate)
}

pub fn solve_level_for_distortion(spectrum: &PooledSpectrum, distortion: f64) -> Result<f64> {
    spectrum.solve_level_for_distortion(distortion)
}

pub fn allocation(spectrum: &PooledSpectrum, level: f64) -> Result<WaterAllocation> {
    spectrum.allocation(level)
}

pub fn sandwich(dict: &MixtureDictionary, level: f64) -> Result<SandwichBounds> {
    let rd = pooled_spectrum(dict)?.evaluate(level)?;
    let n = dict.n() as f64;
    let label_rate = dict.label_entropy_bits() / n;
    Ok(SandwichBounds {
        level,
        distortion: rd.distortion,
        r_cond: rd.rate,
        label_rate,
        r_upper: rd.rate + label_rate,
        log2k_over_n: (dict.k() as f64).log2() / n,
    })
}

pub fn entropy_terms(dict: &MixtureDictionary) -> Result<EntropyTerms> {
    let n = dict.n() as f64;
    let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
    let mut h_cond = 0.0;
    for (p, cov) in dict.priors().iter().zip(dict.covariances()) {
        let ln_det = crate::linalg::log_det_psd(cov)?;
        h_cond += p * 0.5 * (n * two_pi_e.log2() + ln_det / std::f64::consts::LN_2);
    }
    let h_label = dict.label_entropy_bits();
    Ok(EntropyTerms {
        h_cond,
        h_label,
        lower: h_cond,
        upper: h_cond + h_label,
    })
}

/// Each class spends exactly `rate` bits/dim on its own spectrum.
pub fn wutc_allocation(dict: &MixtureDictionary, rate: f64) -> Result<WutcAllocation> {
    if !(rate >= 0.0) {
        return Err(Error::Domain(format!("rate must be non-negative, got {rate}")));
    }
    let (k, n) = (dict.k(), dict.n());
    let mut levels = Vec::with_capacity(k);
    let mut entries = Vec::with_capacity(k * n);
    for (c, p) in dict.priors().iter().enumerate() {
        let class = PooledSpectrum::new(&[1.0], std::slice::from_ref(&dict.eig(c).eigvals))?;
        let level = class.solve_level_for_rate(rate)?;
        levels.push(level);
        entries.extend(
            dict.eig(c)
                .eigvals
                .iter()
                .map(|&l| ModeAlloc::at_level(l, p / n as f64, level)),
        );
    }
    let table = ModeTable { k, n, entries };
    Ok(WutcAllocation {
        levels,
        rate: table.rate(),
        distortion: table.distortion(),
        table,
    })
}
