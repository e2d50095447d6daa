//! Rate–distortion sweeps over a grid of water levels.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::codec::{
    encode_stream_at_level, label_rate, mse_per_dim, wutc_encode_stream_with, CodecConfig, CodecMode, Encoded,
    LabelSource, Tau,
};
use crate::error::{Error, Result};
use crate::gmm::{LabeledSamples, MixtureDictionary};
use crate::par;
use crate::ratealloc::{pooled_spectrum, sandwich};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Curve {
    TheoryLower,
    TheoryUpper,
    Genie,
    Map,
    Tc,
    Wutc,
}

impl Curve {
    pub const ALL: [Curve; 6] = [Self::TheoryLower, Self::TheoryUpper, Self::Genie, Self::Map, Self::Tc, Self::Wutc];

    pub fn name(self) -> &'static str {
        match self {
            Self::TheoryLower => "theory-lower",
            Self::TheoryUpper => "theory-upper",
            Self::Genie => "genie",
            Self::Map => "map",
            Self::Tc => "tc",
            Self::Wutc => "wutc",
        }
    }
}

impl FromStr for Curve {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown curve {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub levels: Vec<f64>,
    pub curves: Vec<Curve>,
    pub tau: Tau,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { levels: log_levels(1e-5, 1e1, 50), curves: Curve::ALL.to_vec(), tau: Tau::Finite(1) }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.levels.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Domain("sweep levels must be positive and finite".into()));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("sweep levels must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// `count` points spaced evenly in `log10` between `lo` and `hi` inclusive.
pub fn log_levels(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| match i {
            0 => lo,
            _ if i == count - 1 => hi,
            _ => 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RdPoint {
    pub curve: Curve,
    pub mu: f64,
    pub rate: f64,
    /// Squared error over squared signal norm, both per dimension.
    pub nmse: f64,
    pub label_bits: f64,
    pub coef_bits: f64,
    /// Fraction of vectors whose coded label differs from the generating one.
    pub map_disagreement: Option<f64>,
}

fn disagreement(labels: &[usize], oracle: Option<&[usize]>) -> Option<f64> {
    oracle.map(|o| {
        let miss = labels.iter().zip(o).filter(|(a, b)| a != b).count();
        miss as f64 / labels.len().max(1) as f64
    })
}

/// Runs every requested curve at every level. Points are returned sorted by
/// curve and then by level, independent of how the work was scheduled.
pub fn rd_sweep(dict: &MixtureDictionary, samples: &LabeledSamples, spec: &SweepSpec) -> Result<Vec<RdPoint>> {
    spec.validate()?;
    if dict.n() != samples.n() {
        return Err(Error::DimensionMismatch { expected: dict.n(), found: samples.n() });
    }
    let energy = samples.energy_per_dim();
    if !(energy > 0.0) {
        return Err(Error::Domain("samples have zero energy".into()));
    }
    let oracle = samples.labels();
    let wants = |c: Curve| spec.curves.contains(&c);
    if wants(Curve::Genie) && oracle.is_none() {
        return Err(Error::Domain("the genie curve needs samples with generating labels".into()));
    }
    let map_labels = if spec.tau == Tau::Finite(1) && (wants(Curve::Map) || wants(Curve::Wutc)) {
        Some(dict.map_labels(samples))
    } else {
        None
    };
    let map_source = || map_labels.as_deref().map_or(LabelSource::Map, LabelSource::Oracle);
    let tc_dict = if wants(Curve::Tc) {
        let (mean, cov) = samples.mean_and_covariance();
        Some(MixtureDictionary::single(mean, cov)?)
    } else {
        None
    };
    let spectrum = pooled_spectrum(dict)?;
    let lbl = label_rate(dict, spec.tau);

    let point = |curve: Curve, mu: f64, enc: &Encoded, dis: Option<f64>| RdPoint {
        curve,
        mu,
        rate: enc.bitstream.payload_bits_per_dim(),
        nmse: mse_per_dim(samples.as_slice(), &enc.reconstruction) / energy,
        label_bits: enc.bitstream.label_bits_per_dim(),
        coef_bits: enc.bitstream.coefficient_bits_per_dim(),
        map_disagreement: dis,
    };

    let jobs: Vec<(Curve, f64)> = spec
        .curves
        .iter()
        .flat_map(|&c| spec.levels.iter().map(move |&mu| (c, mu)))
        .collect();
    let results = par::map_slice(&jobs, |&(curve, mu)| -> Result<RdPoint> {
        let cfg = |mode| CodecConfig::new(mode, 0.0).with_tau(spec.tau);
        Ok(match curve {
            Curve::TheoryLower | Curve::TheoryUpper => {
                let b = sandwich(dict, mu)?;
                let upper = curve == Curve::TheoryUpper;
                RdPoint {
                    curve,
                    mu,
                    rate: if upper { b.r_upper } else { b.r_cond },
                    nmse: b.distortion / energy,
                    label_bits: if upper { b.label_rate } else { 0.0 },
                    coef_bits: b.r_cond,
                    map_disagreement: None,
                }
            }
            Curve::Genie => {
                let enc = encode_stream_at_level(samples, dict, &cfg(CodecMode::PrismGenie), mu, LabelSource::Oracle(oracle.unwrap()))?;
                point(curve, mu, &enc, Some(0.0))
            }
            Curve::Map => {
                let enc = encode_stream_at_level(samples, dict, &cfg(CodecMode::PrismMap), mu, map_source())?;
                point(curve, mu, &enc, disagreement(&enc.labels, oracle))
            }
            Curve::Tc => {
                let tc = tc_dict.as_ref().unwrap();
                let enc = encode_stream_at_level(samples, tc, &cfg(CodecMode::TcSingle), mu, LabelSource::Map)?;
                point(curve, mu, &enc, None)
            }
            Curve::Wutc => {
                // same coefficient budget as the global allocation at this level
                let budget = spectrum.evaluate(mu)?.rate;
                let c = CodecConfig::new(CodecMode::Wutc, budget + lbl).with_tau(spec.tau);
                let enc = wutc_encode_stream_with(samples, dict, &c, map_source())?;
                point(curve, mu, &enc, disagreement(&enc.labels, oracle))
            }
        })
    });
    let mut points = results.into_iter().collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.curve.cmp(&b.curve).then(a.mu.total_cmp(&b.mu)));
    Ok(points)
}

pub const CSV_HEADER: &str = "curve,mu,rate_bits_per_dim,nmse,label_bits_per_dim,coef_bits_per_dim,map_disagreement";

/// CSV text with one row per point; an empty last column means not applicable.
pub fn to_csv(points: &[RdPoint]) -> String {
    let mut out = String::with_capacity(64 * (points.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in points {
        let dis = p.map_disagreement.map(|d| d.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.curve.name(),
            p.mu,
            p.rate,
            p.nmse,
            p.label_bits,
            p.coef_bits,
            dis
        );
    }
    out
}

/// Points of one curve, in increasing level order.
pub fn curve_points(points: &[RdPoint], curve: Curve) -> Vec<RdPoint> {
    points.iter().filter(|p| p.curve == curve).copied().collect()
}

/// Rate of `curve` at distortion `nmse`, interpolated linearly in `ln D`.
/// `None` outside the sampled range.
pub fn rate_at_distortion(curve: &[RdPoint], nmse: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.nmse.ln(), p.rate)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let x = nmse.ln();
    pts.windows(2).find(|w| w[0].0 <= x && x <= w[1].0).map(|w| {
        let (a, b) = (w[0], w[1]);
        if b.0 == a.0 {
            a.1.min(b.1)
        } else {
            a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
        }
    })
}

/// Distortion of `curve` at `rate`, interpolated linearly in `ln D`.
pub fn distortion_at_rate(curve: &[RdPoint], rate: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.rate, p.nmse.ln())).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(2).find(|w| w[0].0 <= rate && rate <= w[1].0).map(|w| {
        let (a, b) = (w[0], w[1]);
        if b.0 == a.0 {
            a.1.min(b.1).exp()
        } else {
            (a.1 + (b.1 - a.1) * (rate - a.0) / (b.0 - a.0)).exp()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_mixture, SynthSpec};

    #[test]
    fn default_grid() {
        let s = SweepSpec::default();
        assert_eq!(s.levels.len(), 50);
        assert_eq!(s.levels[0], 1e-5);
        assert_eq!(s.levels[49], 10.0);
        assert!(s.validate().is_ok());
        let bad = SweepSpec { levels: vec![1.0, 1.0], ..SweepSpec::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn small_sweep_is_sane() {
        let (d, s) = synth_mixture(&SynthSpec::new(3, 6, 21).with_samples(4000)).unwrap();
        let spec = SweepSpec { levels: log_levels(1e-2, 1e1, 6), ..SweepSpec::default() };
        let pts = rd_sweep(&d, &s, &spec).unwrap();
        assert_eq!(pts.len(), 6 * 6);
        let h = d.label_entropy_bits() / d.n() as f64;
        let lower = curve_points(&pts, Curve::TheoryLower);
        let upper = curve_points(&pts, Curve::TheoryUpper);
        for (l, u) in lower.iter().zip(&upper) {
            assert!((u.rate - l.rate - h).abs() < 1e-12);
        }
        for curve in Curve::ALL {
            let c = curve_points(&pts, curve);
            assert!(c.windows(2).all(|w| w[0].mu < w[1].mu));
            for w in c.windows(2) {
                assert!(w[1].rate <= w[0].rate + 1e-9, "{curve:?} rate not monotone");
                assert!(w[1].nmse >= w[0].nmse - 1e-9, "{curve:?} distortion not monotone");
            }
        }
        // the top level submerges every mode
        let top = curve_points(&pts, Curve::Genie).last().copied().unwrap();
        assert_eq!(top.coef_bits, 0.0);
        assert!((top.nmse - 1.0).abs() < 0.05);
        let csv = to_csv(&pts);
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 37);
        assert_eq!(to_csv(&rd_sweep(&d, &s, &spec).unwrap()), csv);
    }

    #[test]
    fn interpolation() {
        let mk = |rate, nmse| RdPoint {
            curve: Curve::Map,
            mu: 1.0,
            rate,
            nmse,
            label_bits: 0.0,
            coef_bits: rate,
            map_disagreement: None,
        };
        let c = vec![mk(2.0, 0.01), mk(1.0, 0.1)];
        let mid = (0.01f64 * 0.1).sqrt();
        assert!((rate_at_distortion(&c, mid).unwrap() - 1.5).abs() < 1e-12);
        assert!((distortion_at_rate(&c, 1.5).unwrap() - mid).abs() < 1e-15);
        assert!(rate_at_distortion(&c, 0.5).is_none());
    }
}
