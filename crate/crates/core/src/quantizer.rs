//! Entropy-constrained scalar quantization of `N(0, λ)` transform coefficients.
//!
//! A mid-tread uniform quantizer whose step is chosen so the entropy of its
//! index under the Gaussian model equals the allocated rate. Each index is
//! reconstructed at the Gaussian centroid of its cell. The step, index model
//! and reconstruction table are pure functions of `(λ, r)`, so the decoder
//! rebuilds them without any side information.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{corrupt, Error, Result};

/// Two-sided standard-normal tail beyond this point is below 1e-12.
const CLIP_Z: f64 = 7.2;
const ENTROPY_TOL: f64 = 1e-9;
/// Largest alphabet the 16-bit frequency model can carry with room to spare.
pub const MAX_ALPHABET: usize = 1 << 15;
/// Unit-variance step range; the lower end keeps the alphabet under `MAX_ALPHABET`.
const STEP_BRACKET: (f64, f64) = (2.0 * CLIP_Z / (MAX_ALPHABET as f64 - 8.0), 100.0);

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarQuantizer {
    variance: f64,
    target_rate: f64,
    step: f64,
    clip_index: u32,
    /// Probability of each index in `-clip_index..=clip_index`.
    probs: Vec<f64>,
    /// Reconstruction of index `k ≥ 0`; negative indices mirror it.
    levels: Vec<f64>,
    entropy: f64,
    distortion: f64,
}

fn q_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z * std::f64::consts::FRAC_1_SQRT_2)
}

fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Index model and clip index of a unit-variance quantizer with step `delta`.
fn unit_model(delta: f64) -> (u32, Vec<f64>) {
    let clip = ((CLIP_Z / delta - 0.5).ceil().max(1.0)) as u32;
    let mut half = Vec::with_capacity(clip as usize + 1);
    half.push(1.0 - 2.0 * q_tail(0.5 * delta));
    for k in 1..clip {
        let a = (k as f64 - 0.5) * delta;
        half.push(q_tail(a) - q_tail(a + delta));
    }
    half.push(q_tail((clip as f64 - 0.5) * delta));
    let mut probs = Vec::with_capacity(2 * clip as usize + 1);
    probs.extend(half.iter().rev());
    probs.extend(&half[1..]);
    (clip, probs)
}

fn entropy_of(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Probability mass and first moment of a unit normal on `[a, b)`, with `b = None` for `[a, ∞)`.
fn cell_moments(a: f64, b: Option<f64>) -> (f64, f64) {
    match b {
        Some(b) => (q_tail(a) - q_tail(b), phi(a) - phi(b)),
        None => (q_tail(a), phi(a)),
    }
}

/// Centroids of the non-negative cells of a unit-variance quantizer.
fn unit_levels(delta: f64, clip: u32) -> Vec<f64> {
    let mut levels = Vec::with_capacity(clip as usize + 1);
    levels.push(0.0);
    for k in 1..=clip {
        let a = (k as f64 - 0.5) * delta;
        let b = (k < clip).then_some(a + delta);
        let (p, m) = cell_moments(a, b);
        let mid = k as f64 * delta;
        let c = if p > 1e-300 { m / p } else { mid };
        levels.push(if c.is_finite() { c.clamp(a, b.unwrap_or(f64::INFINITY)) } else { mid });
    }
    levels
}

/// Expected squared error of a unit-variance quantizer, in closed form over cells.
fn unit_distortion(delta: f64, levels: &[f64]) -> f64 {
    // E[(Z - c)²; a < Z < b] = P(1 + c²) − (bφ(b) − aφ(a)) − 2c(φ(a) − φ(b))
    let clip = levels.len() - 1;
    let h = 0.5 * delta;
    let mut total = (1.0 - 2.0 * q_tail(h)) - 2.0 * h * phi(h);
    let mut tail = 0.0;
    for (k, &c) in levels.iter().enumerate().skip(1) {
        let a = (k as f64 - 0.5) * delta;
        let b = (k < clip).then_some(a + delta);
        let (p, m) = cell_moments(a, b);
        let bphi = b.map_or(0.0, |b| b * phi(b));
        tail += p * (1.0 + c * c) - (bphi - a * phi(a)) - 2.0 * c * m;
    }
    total += 2.0 * tail;
    total.max(0.0)
}

impl ScalarQuantizer {
    /// Designs the quantizer for variance `variance` at `rate` bits.
    pub fn design(variance: f64, rate: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::Domain(format!("quantizer variance must be positive, got {variance}")));
        }
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::Domain(format!("quantizer rate must be non-negative, got {rate}")));
        }
        if rate == 0.0 {
            return Ok(Self {
                variance,
                target_rate: 0.0,
                step: 0.0,
                clip_index: 0,
                probs: vec![1.0],
                levels: vec![0.0],
                entropy: 0.0,
                distortion: variance,
            });
        }
        let (mut lo, mut hi) = (STEP_BRACKET.0.ln(), STEP_BRACKET.1.ln());
        let h_max = entropy_of(&unit_model(STEP_BRACKET.0).1);
        if rate > h_max {
            return Err(Error::Domain(format!(
                "rate {rate} exceeds the largest supported quantizer rate {h_max:.3}"
            )));
        }
        let mut best = (f64::INFINITY, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let h = entropy_of(&unit_model(mid.exp()).1);
            let err = (h - rate).abs();
            if err < best.0 {
                best = (err, mid);
            }
            if err <= ENTROPY_TOL || mid == lo || mid == hi {
                break;
            }
            if h > rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let delta = best.1.exp();
        let (clip, probs) = unit_model(delta);
        let unit = unit_levels(delta, clip);
        let sigma = variance.sqrt();
        Ok(Self {
            variance,
            target_rate: rate,
            step: delta * sigma,
            clip_index: clip,
            entropy: entropy_of(&probs),
            distortion: variance * unit_distortion(delta, &unit),
            levels: unit.iter().map(|l| l * sigma).collect(),
            probs,
        })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn target_rate(&self) -> f64 {
        self.target_rate
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn clip_index(&self) -> u32 {
        self.clip_index
    }

    /// Index probabilities for `-clip_index..=clip_index`.
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Model entropy of the index in bits.
    pub fn entropy(&self) -> f64 {
        self.entropy
    }

    /// Expected squared error for an `N(0, λ)` input.
    pub fn expected_distortion(&self) -> f64 {
        self.distortion
    }

    /// Reconstruction values for indices `0..=clip_index`.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn is_degenerate(&self) -> bool {
        self.clip_index == 0
    }

    pub fn quantize(&self, s: f64) -> i32 {
        if self.clip_index == 0 {
            return 0;
        }
        let lim = self.clip_index as f64;
        (s / self.step).round().clamp(-lim, lim) as i32
    }

    pub fn dequantize(&self, index: i32) -> Result<f64> {
        if index.unsigned_abs() > self.clip_index {
            return Err(corrupt(0, format!("index {index} outside ±{}", self.clip_index)));
        }
        let level = self.levels[index.unsigned_abs() as usize];
        Ok(if index < 0 { -level } else { level })
    }
}

pub fn design_ecsq(variance: f64, rate: f64) -> Result<ScalarQuantizer> {
    ScalarQuantizer::design(variance, rate)
}

/// Designs quantizers for a list of `(λ, r)` pairs, sharing one design per
/// pair after rounding both to 1e-9. The first pair in input order fixes the
/// exact values of its group, so the result depends only on the input list.
pub fn design_bank(pairs: &[(f64, f64)]) -> Result<Vec<Arc<ScalarQuantizer>>> {
    let key = |(l, r): (f64, f64)| ((l * 1e9).round() as i128, (r * 1e9).round() as i128);
    let mut groups: HashMap<(i128, i128), usize> = HashMap::new();
    let mut unique = Vec::new();
    let slot: Vec<usize> = pairs
        .iter()
        .map(|&p| {
            *groups.entry(key(p)).or_insert_with(|| {
                unique.push(p);
                unique.len() - 1
            })
        })
        .collect();
    let designed = crate::par::map_slice(&unique, |&(l, r)| ScalarQuantizer::design(l, r).map(Arc::new));
    let designed = designed.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(slot.into_iter().map(|i| Arc::clone(&designed[i])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Composite Simpson quadrature of the squared error against the Gaussian
    /// density, applied cell by cell so the integrand is smooth on each piece.
    fn quadrature_distortion(q: &ScalarQuantizer) -> f64 {
        let sigma = q.variance().sqrt();
        let density = |x: f64| (-0.5 * x * x / q.variance()).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let simpson = |lo: f64, hi: f64, c: f64| {
            let steps = 2000;
            let h = (hi - lo) / steps as f64;
            let f = |x: f64| (x - c) * (x - c) * density(x);
            let mut s = f(lo) + f(hi);
            for i in 1..steps {
                s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let lim = q.clip_index() as i32;
        let far = 12.0 * sigma;
        (-lim..=lim)
            .map(|k| {
                let lo = if k == -lim { -far } else { (k as f64 - 0.5) * q.step() };
                let hi = if k == lim { far } else { (k as f64 + 0.5) * q.step() };
                simpson(lo, hi.max(lo), q.dequantize(k).unwrap())
            })
            .sum()
    }

    #[test]
    fn zero_rate_is_degenerate() {
        let q = design_ecsq(2.5, 0.0).unwrap();
        assert!(q.is_degenerate());
        assert_eq!(q.quantize(123.0), 0);
        assert_eq!(q.dequantize(0).unwrap(), 0.0);
        assert_eq!(q.expected_distortion(), 2.5);
        assert!(matches!(design_ecsq(1.0, -0.5), Err(Error::Domain(_))));
        assert!(matches!(design_ecsq(0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn quantize_examples() {
        let q = ScalarQuantizer {
            variance: 1.0,
            target_rate: 1.0,
            step: 1.0,
            clip_index: 3,
            probs: vec![1.0 / 7.0; 7],
            levels: vec![0.0, 1.0, 2.0, 3.0],
            entropy: 7f64.log2(),
            distortion: 0.0,
        };
        assert_eq!(q.quantize(0.0), 0);
        assert_eq!(q.quantize(1.4), 1);
        assert_eq!(q.quantize(10.0), 3);
        assert_eq!(q.quantize(-10.0), -3);
        assert_eq!(q.dequantize(1).unwrap(), 1.0);
        assert!(matches!(q.dequantize(4), Err(Error::CorruptStream { .. })));
        // half-step bound over one period of the unclipped range
        for i in 0..=7000 {
            let s = -3.0 + i as f64 * 6.0 / 7000.0;
            assert!((s - q.dequantize(q.quantize(s)).unwrap()).abs() <= 0.5 + 1e-15);
        }
    }

    #[test]
    fn entropy_matches_target() {
        for &r in &[0.25, 0.5, 1.0, 2.0, 3.5, 5.0, 8.0] {
            let q = design_ecsq(1.0, r).unwrap();
            assert!((q.entropy() - r).abs() <= 1e-6, "r={r}: H={}", q.entropy());
            assert!(q.entropy() <= r + 1e-6);
            assert!((q.probabilities().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            let lim = q.clip_index() as f64;
            assert!(2.0 * q_tail((lim + 0.5) * q.step()) < 1e-12);
        }
    }

    #[test]
    fn closed_form_distortion_matches_quadrature() {
        for &(l, r) in &[(1.0, 2.0), (1.0, 0.3), (3.0, 4.0), (0.2, 1.0)] {
            let q = design_ecsq(l, r).unwrap();
            let quad = quadrature_distortion(&q);
            assert!(
                (q.expected_distortion() - quad).abs() <= 1e-7 * quad,
                "λ={l} r={r}: {} vs {quad}",
                q.expected_distortion()
            );
        }
    }

    #[test]
    fn monte_carlo_distortion_matches_model() {
        let q = design_ecsq(1.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let m = 200_000;
        let errs: Vec<f64> = (0..m)
            .map(|_| {
                let s: f64 = normal.sample(&mut rng);
                let e = s - q.dequantize(q.quantize(s)).unwrap();
                e * e
            })
            .collect();
        let mean = errs.iter().sum::<f64>() / m as f64;
        let var = errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (m - 1) as f64;
        let se = (var / m as f64).sqrt();
        assert!((mean - q.expected_distortion()).abs() <= 3.0 * se);
    }

    #[test]
    fn operational_point_lies_above_shannon_curve() {
        let limit = 0.5 * (std::f64::consts::PI * std::f64::consts::E / 6.0).log2();
        for &r in &[0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0] {
            let q = design_ecsq(1.0, r).unwrap();
            let shannon = 0.5 * (1.0 / q.expected_distortion()).log2();
            let gap = q.entropy() - shannon.max(0.0);
            assert!(gap > 0.0 && gap < limit + 0.01, "r={r}: gap {gap}");
        }
        let q = design_ecsq(1.0, 6.0).unwrap();
        let gap = 6.0 - 0.5 * (1.0 / q.expected_distortion()).log2();
        assert!((gap - limit).abs() < 0.005, "high-rate gap {gap}");
    }

    #[test]
    fn centroids_sit_inside_their_cells_and_beat_midpoints() {
        for &r in &[0.1, 1.0, 3.0] {
            let q = design_ecsq(2.0, r).unwrap();
            let d = q.step();
            let lv = q.levels();
            for (k, &c) in lv.iter().enumerate().skip(1) {
                assert!(c >= (k as f64 - 0.5) * d && c <= (k as f64 + 0.5) * d || k == lv.len() - 1 && c >= (k as f64 - 0.5) * d);
            }
            let mut midpoint = q.clone();
            midpoint.levels = (0..lv.len()).map(|k| k as f64 * d).collect();
            assert!(q.expected_distortion() < quadrature_distortion(&midpoint));
        }
    }

    #[test]
    fn bank_shares_designs() {
        let bank = design_bank(&[(1.0, 2.0), (4.0, 1.0), (1.0 + 1e-12, 2.0), (1.0, 0.0)]).unwrap();
        assert!(Arc::ptr_eq(&bank[0], &bank[2]));
        assert!(!Arc::ptr_eq(&bank[0], &bank[1]));
        assert!(bank[3].is_degenerate());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn scale_equivariance(r in 0.25f64..8.0, a in 0.1f64..10.0, l in 0.1f64..10.0) {
            let q = design_ecsq(l, r).unwrap();
            let s = design_ecsq(a * a * l, r).unwrap();
            prop_assert!((s.step() - a * q.step()).abs() <= 1e-9 * s.step());
            prop_assert_eq!(s.clip_index(), q.clip_index());
            for (x, y) in s.levels().iter().zip(q.levels()) {
                prop_assert!((x - a * y).abs() <= 1e-9 * (1.0 + x.abs()));
            }
            for (x, y) in s.probabilities().iter().zip(q.probabilities()) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }

        #[test]
        fn model_entropy_matches_rate(r in 0.25f64..8.0) {
            let q = design_ecsq(1.0, r).unwrap();
            prop_assert!((q.entropy() - r).abs() <= 1e-6);
        }
    }
}
