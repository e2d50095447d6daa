//! End-to-end encoder and decoder.
//!
//! Each vector gets a component label (MAP or supplied), is centered on that
//! component's mean and rotated into its eigenbasis, and the coefficients on
//! active modes are quantized by per-mode ECSQ. Labels go into a Huffman-coded
//! segment and quantizer indices into one range-coded segment.

pub mod bitstream;
pub mod prune;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

pub use bitstream::{Bitstream, StreamHeader, HEADER_LEN, STREAM_MAGIC, STREAM_VERSION};
pub use prune::{prune_dictionary, PrunedComponent, PrunedDictionary};

use crate::coding::{build_label_code, BitReader, BitWriter, FrequencyModel, RangeDecoder, RangeEncoder};
use crate::error::{corrupt, Error, Result};
use crate::gmm::{argmax, LabeledSamples, MixtureDictionary};
use crate::par;
use crate::quantizer::{design_bank, ScalarQuantizer};
use crate::ratealloc::{pooled_spectrum, wutc_allocation, ModeAlloc, ModeTable, WaterAllocation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodecMode {
    /// Labels chosen by the MAP rule.
    #[serde(rename = "prismquant-map")]
    PrismMap,
    /// Labels supplied by the caller, typically the generating components.
    #[serde(rename = "prismquant-genie")]
    PrismGenie,
    /// One Gaussian for everything.
    TcSingle,
    /// Every class spends the same coefficient rate on its own spectrum.
    Wutc,
}

impl CodecMode {
    pub const ALL: [CodecMode; 4] = [Self::PrismMap, Self::PrismGenie, Self::TcSingle, Self::Wutc];

    pub fn code(self) -> u8 {
        match self {
            Self::PrismMap => 0,
            Self::PrismGenie => 1,
            Self::TcSingle => 2,
            Self::Wutc => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::PrismMap => "prismquant-map",
            Self::PrismGenie => "prismquant-genie",
            Self::TcSingle => "tc-single",
            Self::Wutc => "wutc",
        }
    }
}

impl fmt::Display for CodecMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CodecMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown codec mode {s:?}")))
    }
}

/// Number of consecutive vectors sharing one transmitted label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tau {
    Finite(u32),
    /// One label for the whole stream, with its cost treated as zero.
    Infinite,
}

impl Tau {
    pub fn code(self) -> u32 {
        match self {
            Self::Finite(t) => t,
            Self::Infinite => 0,
        }
    }

    pub fn from_code(code: u32) -> Self {
        if code == 0 {
            Self::Infinite
        } else {
            Self::Finite(code)
        }
    }

    fn window(self, count: usize) -> usize {
        match self {
            Self::Finite(t) => t as usize,
            Self::Infinite => count.max(1),
        }
    }

    /// Labels transmitted for a stream of `count` vectors.
    pub fn label_count(self, count: usize) -> usize {
        count.div_ceil(self.window(count))
    }
}

impl fmt::Display for Tau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(t) => write!(f, "{t}"),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Tau {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inf" | "infinite" | "∞" => Ok(Self::Infinite),
            _ => match s.parse::<u32>() {
                Ok(t) if t >= 1 => Ok(Self::Finite(t)),
                _ => Err(Error::Domain(format!("label amortization must be a positive integer or inf, got {s:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecConfig {
    pub mode: CodecMode,
    /// Total budget in bits per dimension, labels included.
    pub total_rate: f64,
    pub tau: Tau,
}

impl CodecConfig {
    pub fn new(mode: CodecMode, total_rate: f64) -> Self {
        Self { mode, total_rate, tau: Tau::Finite(1) }
    }

    pub fn with_tau(mut self, tau: Tau) -> Self {
        self.tau = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_rate >= 0.0 && self.total_rate.is_finite()) {
            return Err(Error::Domain(format!("total rate must be non-negative, got {}", self.total_rate)));
        }
        if self.tau == Tau::Finite(0) {
            return Err(Error::Domain("label amortization must be at least 1".into()));
        }
        Ok(())
    }
}

/// Label cost `H(π)/(τ·n)` in bits per dimension.
pub fn label_rate(dict: &MixtureDictionary, tau: Tau) -> f64 {
    match tau {
        Tau::Infinite => 0.0,
        Tau::Finite(t) => dict.label_entropy_bits() / (t as f64 * dict.n() as f64),
    }
}

/// Coefficient budget `R_tot − R_lbl`; a budget below the label cost is an error.
pub fn coefficient_budget(dict: &MixtureDictionary, cfg: &CodecConfig) -> Result<f64> {
    cfg.validate()?;
    let lbl = label_rate(dict, cfg.tau);
    if cfg.total_rate < lbl {
        return Err(Error::InfeasibleBudget { requested: cfg.total_rate, minimum: lbl });
    }
    Ok((cfg.total_rate - lbl).max(0.0))
}

/// Where labels come from.
#[derive(Debug, Clone, Copy)]
pub enum LabelSource<'a> {
    Map,
    /// Per-vector labels supplied by the caller.
    Oracle(&'a [usize]),
}

#[derive(Debug, Clone)]
struct ComponentPlan {
    mean: Vec<f64>,
    /// Eigenvectors of active modes, in eigenvalue order.
    basis: Vec<Vec<f64>>,
    quantizers: Vec<Arc<ScalarQuantizer>>,
    models: Vec<Arc<FrequencyModel>>,
}

/// Everything both ends need to map vectors to indices and back at a fixed allocation.
#[derive(Debug, Clone)]
pub struct CodingPlan {
    n: usize,
    components: Vec<ComponentPlan>,
}

struct ActiveModes {
    mean: Vec<f64>,
    basis: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    rates: Vec<f64>,
}

impl CodingPlan {
    /// Plan for the active modes of `table`, which must be built from `dict`.
    pub fn from_table(dict: &MixtureDictionary, table: &ModeTable) -> Result<Self> {
        if table.k() != dict.k() || table.n() != dict.n() {
            return Err(Error::DimensionMismatch { expected: dict.k() * dict.n(), found: table.k() * table.n() });
        }
        let comps = (0..dict.k())
            .map(|c| {
                let eig = dict.eig(c);
                let mut m = ActiveModes {
                    mean: dict.mean(c).to_vec(),
                    basis: Vec::new(),
                    eigenvalues: Vec::new(),
                    rates: Vec::new(),
                };
                for (i, a) in table.component(c).iter().enumerate() {
                    if a.active {
                        m.basis.push(eig.column(i));
                        m.eigenvalues.push(a.eigenvalue);
                        m.rates.push(a.rate);
                    }
                }
                m
            })
            .collect();
        Self::assemble(dict.n(), comps)
    }

    /// Plan at the pruned dictionary's own water level.
    pub fn from_pruned(p: &PrunedDictionary) -> Result<Self> {
        let comps = p
            .components
            .iter()
            .map(|c| ActiveModes {
                mean: c.mean.clone(),
                basis: c.basis.clone(),
                eigenvalues: c.eigenvalues.clone(),
                rates: c.eigenvalues.iter().map(|&l| ModeAlloc::at_level(l, 0.0, p.level).rate).collect(),
            })
            .collect();
        Self::assemble(p.n, comps)
    }

    fn assemble(n: usize, comps: Vec<ActiveModes>) -> Result<Self> {
        let pairs: Vec<(f64, f64)> = comps
            .iter()
            .flat_map(|m| m.eigenvalues.iter().copied().zip(m.rates.iter().copied()))
            .collect();
        let quantizers = design_bank(&pairs)?;
        let models = par::map_slice(&quantizers, |q| FrequencyModel::from_probabilities(q.probabilities()).map(Arc::new))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let mut at = 0;
        let components = comps
            .into_iter()
            .map(|m| {
                let len = m.basis.len();
                let plan = ComponentPlan {
                    mean: m.mean,
                    basis: m.basis,
                    quantizers: quantizers[at..at + len].to_vec(),
                    models: models[at..at + len].to_vec(),
                };
                at += len;
                plan
            })
            .collect();
        Ok(Self { n, components })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// `L_c`, the number of coded coefficients for component `c`.
    pub fn active_modes(&self, c: usize) -> usize {
        self.components[c].basis.len()
    }

    pub fn quantizer(&self, c: usize, i: usize) -> &ScalarQuantizer {
        &self.components[c].quantizers[i]
    }

    /// Quantizer indices of `x` coded as component `c`.
    pub fn encode_vector(&self, x: &[f64], c: usize) -> Vec<i32> {
        let comp = &self.components[c];
        comp.basis
            .iter()
            .zip(&comp.quantizers)
            .map(|(u, q)| {
                let s: f64 = u.iter().zip(x).zip(&comp.mean).map(|((u, x), m)| u * (x - m)).sum();
                q.quantize(s)
            })
            .collect()
    }

    /// Writes `μ_c + Σ_active u_i ŝ_i` into `out`.
    pub fn decode_into(&self, c: usize, indices: &[i32], out: &mut [f64]) -> Result<()> {
        let comp = &self.components[c];
        if indices.len() != comp.basis.len() {
            return Err(Error::DimensionMismatch { expected: comp.basis.len(), found: indices.len() });
        }
        out.copy_from_slice(&comp.mean);
        for ((u, q), &idx) in comp.basis.iter().zip(&comp.quantizers).zip(indices) {
            let s = q.dequantize(idx)?;
            for (o, u) in out.iter_mut().zip(u) {
                *o += u * s;
            }
        }
        Ok(())
    }

    pub fn decode_vector(&self, c: usize, indices: &[i32]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n];
        self.decode_into(c, indices, &mut out)?;
        Ok(out)
    }

    /// Model entropy of the indices in bits, summed over the active modes of `c`.
    pub fn model_rate_bits(&self, c: usize) -> f64 {
        self.components[c].quantizers.iter().map(|q| q.entropy()).sum()
    }
}

/// Encodes one vector: returns its label and the indices of its active modes.
pub fn encode_vector(
    x: &[f64],
    dict: &MixtureDictionary,
    alloc: &WaterAllocation,
    label: Option<usize>,
) -> Result<(usize, Vec<i32>)> {
    check_dim(dict.n(), x.len())?;
    let c = match label {
        Some(c) if c >= dict.k() => return Err(Error::Domain(format!("label {c} outside 0..{}", dict.k()))),
        Some(c) => c,
        None => dict.map_label(x),
    };
    let plan = CodingPlan::from_table(dict, &alloc.table)?;
    Ok((c, plan.encode_vector(x, c)))
}

pub fn decode_vector(label: usize, indices: &[i32], dict: &MixtureDictionary, alloc: &WaterAllocation) -> Result<Vec<f64>> {
    if label >= dict.k() {
        return Err(corrupt(0, format!("label {label} outside 0..{}", dict.k())));
    }
    CodingPlan::from_table(dict, &alloc.table)?.decode_vector(label, indices)
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Encoder output: the stream plus what the decoder will reproduce.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub bitstream: Bitstream,
    /// Label used for each vector.
    pub labels: Vec<usize>,
    /// Row-major reconstruction, identical to what `decode_stream` returns.
    pub reconstruction: Vec<f64>,
}

impl Encoded {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.bitstream.to_bytes()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub n: usize,
    pub labels: Vec<usize>,
    pub reconstruction: Vec<f64>,
}

/// Labels for every window of `window` consecutive vectors.
fn window_labels(dict: &MixtureDictionary, samples: &LabeledSamples, window: usize, source: LabelSource<'_>) -> Result<Vec<usize>> {
    let m = samples.len();
    let windows = m.div_ceil(window.max(1));
    if dict.k() == 1 {
        return Ok(vec![0; windows]);
    }
    match source {
        LabelSource::Oracle(labels) => {
            check_dim(m, labels.len())?;
            if let Some(&c) = labels.iter().find(|&&c| c >= dict.k()) {
                return Err(Error::Domain(format!("label {c} outside 0..{}", dict.k())));
            }
            Ok(labels.iter().step_by(window.max(1)).copied().collect())
        }
        LabelSource::Map if window == 1 => Ok(dict.map_labels(samples)),
        LabelSource::Map => {
            let log_prior: Vec<f64> = dict.priors().iter().map(|p| p.ln()).collect();
            Ok(par::map_indexed(windows, |w| {
                let rows = w * window..((w + 1) * window).min(m);
                let count = rows.len() as f64;
                let mut total = vec![0.0; dict.k()];
                let mut scores = Vec::with_capacity(dict.k());
                for t in rows {
                    dict.map_scores(samples.row(t), &mut scores);
                    total.iter_mut().zip(&scores).for_each(|(a, s)| *a += s);
                }
                // the prior enters once per window, not once per vector
                total.iter_mut().zip(&log_prior).for_each(|(a, lp)| *a -= (count - 1.0) * lp);
                argmax(&total)
            }))
        }
    }
}

fn expand(windows: &[usize], window: usize, m: usize) -> Vec<usize> {
    (0..m).map(|t| windows[t / window.max(1)]).collect()
}

struct StreamSpec {
    mode: CodecMode,
    total_rate: f64,
    tau: Tau,
    level: f64,
}

fn write_stream(
    samples: &LabeledSamples,
    dict: &MixtureDictionary,
    plan: &CodingPlan,
    spec: StreamSpec,
    source: LabelSource<'_>,
) -> Result<Encoded> {
    check_dim(dict.n(), samples.n())?;
    let m = samples.len();
    let window = spec.tau.window(m);
    let windows = window_labels(dict, samples, window, source)?;
    let labels = expand(&windows, window, m);

    let code = build_label_code(dict.priors())?;
    let mut writer = BitWriter::new();
    code.encode_labels(&windows, &mut writer)?;
    let label_bytes = writer.finish();

    let indices = par::map_indexed(m, |t| plan.encode_vector(samples.row(t), labels[t]));
    let mut enc = RangeEncoder::new();
    for (t, idx) in indices.iter().enumerate() {
        let comp = &plan.components[labels[t]];
        for ((model, q), &i) in comp.models.iter().zip(&comp.quantizers).zip(idx) {
            enc.encode(model, (i + q.clip_index() as i32) as usize)?;
        }
    }
    let coefficients = enc.finish();

    let n = dict.n();
    let rows = par::map_indexed(m, |t| plan.decode_vector(labels[t], &indices[t]));
    let mut reconstruction = Vec::with_capacity(m * n);
    for r in rows {
        reconstruction.extend(r?);
    }
    Ok(Encoded {
        bitstream: Bitstream {
            header: StreamHeader {
                mode: spec.mode,
                n: n as u32,
                k: dict.k() as u32,
                total_rate: spec.total_rate,
                count: m as u64,
                tau: spec.tau,
                checksum: dict.checksum(),
                level: spec.level,
            },
            labels: label_bytes,
            coefficients,
        },
        labels,
        reconstruction,
    })
}

fn label_source<'a>(mode: CodecMode, samples: &'a LabeledSamples) -> Result<LabelSource<'a>> {
    match mode {
        CodecMode::PrismGenie => samples
            .labels()
            .map(LabelSource::Oracle)
            .ok_or_else(|| Error::Domain("genie mode needs samples with generating labels".into())),
        _ => Ok(LabelSource::Map),
    }
}

fn single_gaussian(dict: &MixtureDictionary) -> Result<MixtureDictionary> {
    if dict.k() == 1 {
        Ok(dict.clone())
    } else {
        dict.pooled()
    }
}

/// Encodes `samples` at the configured total rate.
///
/// `tc-single` collapses a multi-component dictionary to its moment-matched
/// single Gaussian; `wutc` is forwarded to [`wutc_encode_stream`].
pub fn encode_stream(samples: &LabeledSamples, dict: &MixtureDictionary, cfg: &CodecConfig) -> Result<Encoded> {
    if cfg.mode == CodecMode::Wutc {
        return wutc_encode_stream(samples, dict, cfg);
    }
    let single;
    let dict = if cfg.mode == CodecMode::TcSingle {
        single = single_gaussian(dict)?;
        &single
    } else {
        dict
    };
    let budget = coefficient_budget(dict, cfg)?;
    let spectrum = pooled_spectrum(dict)?;
    let level = spectrum.solve_level_for_rate(budget)?;
    encode_stream_at_level(samples, dict, cfg, level, label_source(cfg.mode, samples)?)
}

/// Encodes at an explicit global water level, bypassing the rate solve.
pub fn encode_stream_at_level(
    samples: &LabeledSamples,
    dict: &MixtureDictionary,
    cfg: &CodecConfig,
    level: f64,
    labels: LabelSource<'_>,
) -> Result<Encoded> {
    cfg.validate()?;
    if cfg.mode == CodecMode::Wutc {
        return Err(Error::Domain("wutc uses per-class levels, not a global water level".into()));
    }
    if cfg.mode == CodecMode::TcSingle && dict.k() != 1 {
        return Err(Error::Domain("tc-single needs a single-component dictionary".into()));
    }
    let alloc = pooled_spectrum(dict)?.allocation(level)?;
    let plan = CodingPlan::from_table(dict, &alloc.table)?;
    let spec = StreamSpec { mode: cfg.mode, total_rate: cfg.total_rate, tau: cfg.tau, level };
    write_stream(samples, dict, &plan, spec, labels)
}

/// Baseline with an equal coefficient rate per class.
pub fn wutc_encode_stream(samples: &LabeledSamples, dict: &MixtureDictionary, cfg: &CodecConfig) -> Result<Encoded> {
    wutc_encode_stream_with(samples, dict, cfg, LabelSource::Map)
}

pub fn wutc_encode_stream_with(
    samples: &LabeledSamples,
    dict: &MixtureDictionary,
    cfg: &CodecConfig,
    labels: LabelSource<'_>,
) -> Result<Encoded> {
    let cfg = CodecConfig { mode: CodecMode::Wutc, ..*cfg };
    let budget = coefficient_budget(dict, &cfg)?;
    let alloc = wutc_allocation(dict, budget)?;
    let plan = CodingPlan::from_table(dict, &alloc.table)?;
    let spec = StreamSpec { mode: cfg.mode, total_rate: cfg.total_rate, tau: cfg.tau, level: 0.0 };
    write_stream(samples, dict, &plan, spec, labels)
}

fn check_header(h: &StreamHeader, k: usize, n: usize, checksum: u64) -> Result<()> {
    if h.checksum != checksum {
        return Err(Error::DictionaryMismatch { expected: h.checksum, found: checksum });
    }
    check_dim(h.n as usize, n)?;
    check_dim(h.k as usize, k)
}

/// Decodes a serialized stream with the full dictionary.
pub fn decode_stream(bytes: &[u8], dict: &MixtureDictionary) -> Result<Decoded> {
    decode_bitstream(&Bitstream::from_bytes(bytes)?, dict)
}

pub fn decode_bitstream(stream: &Bitstream, dict: &MixtureDictionary) -> Result<Decoded> {
    let h = &stream.header;
    let single;
    let dict = if h.mode == CodecMode::TcSingle {
        single = single_gaussian(dict)?;
        &single
    } else {
        dict
    };
    check_header(h, dict.k(), dict.n(), dict.checksum())?;
    let plan = match h.mode {
        CodecMode::Wutc => {
            let cfg = CodecConfig { mode: h.mode, total_rate: h.total_rate, tau: h.tau };
            let budget = coefficient_budget(dict, &cfg)?;
            CodingPlan::from_table(dict, &wutc_allocation(dict, budget)?.table)?
        }
        _ => {
            if !(h.level > 0.0) {
                return Err(corrupt(44, format!("invalid water level {}", h.level)));
            }
            let alloc = pooled_spectrum(dict)?.allocation(h.level)?;
            CodingPlan::from_table(dict, &alloc.table)?
        }
    };
    decode_payload(stream, &plan, dict.priors())
}

/// Decodes with only the retained modes. The stream must have been coded at
/// the pruned dictionary's level from the dictionary it was cut from.
pub fn decode_stream_pruned(bytes: &[u8], pruned: &PrunedDictionary) -> Result<Decoded> {
    let stream = Bitstream::from_bytes(bytes)?;
    let h = &stream.header;
    if h.mode == CodecMode::Wutc {
        return Err(Error::Domain("wutc streams have per-class levels and cannot use a pruned dictionary".into()));
    }
    check_header(h, pruned.k(), pruned.n, pruned.source_checksum)?;
    if h.level.to_bits() != pruned.level.to_bits() {
        return Err(Error::Domain(format!(
            "stream level {} differs from the pruned dictionary level {}",
            h.level, pruned.level
        )));
    }
    decode_payload(&stream, &CodingPlan::from_pruned(pruned)?, &pruned.priors)
}

fn shift_offset(base: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::CorruptStream { offset, reason } => Error::CorruptStream { offset: offset + base, reason },
        other => other,
    }
}

fn decode_payload(stream: &Bitstream, plan: &CodingPlan, priors: &[f64]) -> Result<Decoded> {
    let h = &stream.header;
    let m = usize::try_from(h.count).map_err(|_| corrupt(24, "vector count overflows"))?;
    let window = h.tau.window(m);

    let code = build_label_code(priors)?;
    let mut reader = BitReader::new(&stream.labels);
    let windows = code
        .decode_labels(&mut reader, h.tau.label_count(m))
        .map_err(shift_offset(stream.label_offset()))?;
    if reader.bits_read().div_ceil(8) != stream.labels.len() {
        return Err(corrupt(stream.label_offset() + reader.bits_read().div_ceil(8), "unused bytes in the label segment"));
    }
    let labels = expand(&windows, window, m);

    let base = stream.coefficient_offset();
    let symbols: usize = labels.iter().map(|&c| plan.active_modes(c)).sum();
    let mut indices = Vec::with_capacity(m);
    if symbols == 0 {
        if !stream.coefficients.is_empty() {
            return Err(corrupt(base, "coefficient segment should be empty"));
        }
        indices.resize(m, Vec::new());
    } else {
        let mut dec = RangeDecoder::new(&stream.coefficients).map_err(shift_offset(base))?;
        for &c in &labels {
            let comp = &plan.components[c];
            let idx = comp
                .models
                .iter()
                .zip(&comp.quantizers)
                .map(|(model, q)| Ok(dec.decode(model)? as i32 - q.clip_index() as i32))
                .collect::<Result<Vec<i32>>>()
                .map_err(shift_offset(base))?;
            indices.push(idx);
        }
        if dec.bytes_consumed() != stream.coefficients.len() {
            return Err(corrupt(base + dec.bytes_consumed(), "unused bytes in the coefficient segment"));
        }
    }

    let n = plan.n();
    let rows = par::map_indexed(m, |t| plan.decode_vector(labels[t], &indices[t]));
    let mut reconstruction = Vec::with_capacity(m * n);
    for r in rows {
        reconstruction.extend(r?);
    }
    Ok(Decoded { n, labels, reconstruction })
}

/// Mean squared error per dimension between two row-major blocks.
pub fn mse_per_dim(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let chunks = par::map_chunks(a, par::REDUCE_CHUNK, |start, c| {
        c.iter().zip(&b[start..start + c.len()]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
    });
    chunks.iter().sum::<f64>() / a.len() as f64
}

#[cfg(test)]
mod tests;
