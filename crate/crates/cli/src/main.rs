//! `prismquant` command-line driver.
//!
//! Every command prints one JSON summary line on stdout. Failures print a
//! single `error: ...` line on stderr and exit with status 1; argument errors
//! exit with status 2.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use prismquant::codec::{decode_stream_pruned, mse_per_dim, PrunedDictionary};
use prismquant::dataset::{partition_dataset, reassemble, BlockLayout, Dataset, ElementType};
use prismquant::gmm::fit_em_traced;
use prismquant::ratealloc::{entropy_terms, pooled_spectrum, sandwich};
use prismquant::sweep::{log_levels, rd_sweep, to_csv, Curve, SweepSpec};
use prismquant::{
    decode_stream, encode_stream, entropy_bits, prune_dictionary, CodecConfig, CodecMode, EmConfig, LabeledSamples,
    MixtureDictionary, SynthSpec, Tau,
};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "prismquant", version, about = "Gaussian-mixture transform codec")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random mixture dictionary and samples from it.
    Synth(SynthArgs),
    /// Fit a mixture dictionary to a dataset with EM.
    Fit(FitArgs),
    /// Cut records into real blocks of a fixed length.
    Ingest(IngestArgs),
    /// Encode a dataset into a bitstream.
    Encode(EncodeArgs),
    /// Decode a bitstream back into a dataset.
    Decode(DecodeArgs),
    /// Rate bounds of a dictionary at one water level or rate.
    Bounds(BoundsArgs),
    /// Rate-distortion curves over a grid of water levels, written as CSV.
    Sweep(SweepArgs),
    /// Drop every eigenmode that is inactive at a water level.
    Prune(PruneArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0.1)]
    min_variance: f64,
    #[arg(long, default_value_t = 10.0)]
    max_variance: f64,
    /// Output dataset (PQDATA1).
    #[arg(long)]
    out: PathBuf,
    /// Output dictionary (PQDICT).
    #[arg(long)]
    dict: PathBuf,
    /// Generating labels as a JSON array.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    /// Raw records (PQDATA1, real or complex).
    #[arg(long)]
    input: PathBuf,
    /// Block length.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
    /// Layout sidecar needed to reassemble decoded blocks.
    #[arg(long)]
    layout: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    /// Total rate in bits per dimension, labels included.
    #[arg(long)]
    rate: f64,
    #[arg(long, default_value = "prismquant-map")]
    mode: CodecMode,
    /// Vectors per label, or `inf`.
    #[arg(long, default_value = "1")]
    tau: Tau,
    /// Generating labels, required by `prismquant-genie`.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    stream: PathBuf,
    /// Full dictionary (PQDICT).
    #[arg(long, conflicts_with = "pruned", required_unless_present = "pruned")]
    dict: Option<PathBuf>,
    /// Pruned dictionary (JSON) written by `prune`.
    #[arg(long)]
    pruned: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Reassemble records with this layout sidecar from `ingest`.
    #[arg(long)]
    layout: Option<PathBuf>,
    /// Write the decoded labels as a JSON array.
    #[arg(long)]
    labels_out: Option<PathBuf>,
    /// Original dataset, to report the reconstruction NMSE.
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, conflicts_with = "rate", required_unless_present = "rate")]
    level: Option<f64>,
    /// Conditional rate in bits per dimension.
    #[arg(long)]
    rate: Option<f64>,
    /// Dataset whose MAP label frequencies give an empirical label entropy.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    dict: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Generating labels; without them the genie curve is skipped.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Number of water levels.
    #[arg(long, default_value_t = 50)]
    levels: usize,
    #[arg(long, default_value_t = 1e-5)]
    min_level: f64,
    #[arg(long, default_value_t = 10.0)]
    max_level: f64,
    /// Comma-separated subset of theory-lower,theory-upper,genie,map,tc,wutc.
    #[arg(long, value_delimiter = ',')]
    curves: Option<Vec<Curve>>,
    #[arg(long, default_value = "1")]
    tau: Tau,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PruneArgs {
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, conflicts_with = "rate", required_unless_present = "rate")]
    level: Option<f64>,
    /// Total rate in bits per dimension; solved to a level as `encode` would.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long, default_value = "1")]
    tau: Tau,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprintln!("{}", e.to_string().lines().next().unwrap_or("error: bad arguments"));
            return ExitCode::from(2);
        }
        Err(e) => e.exit(),
    };
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<Value> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Fit(a) => fit(a),
        Command::Ingest(a) => ingest(a),
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Bounds(a) => bounds(a),
        Command::Sweep(a) => sweep(a),
        Command::Prune(a) => prune(a),
    }
}

fn read_dict(path: &Path) -> Result<MixtureDictionary> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    MixtureDictionary::from_bytes(&bytes).with_context(|| format!("loading dictionary {}", path.display()))
}

fn read_samples(path: &Path, labels: Option<&Path>) -> Result<LabeledSamples> {
    let ds = Dataset::read(path).with_context(|| format!("reading {}", path.display()))?;
    let samples = ds.to_samples().with_context(|| format!("loading {}", path.display()))?;
    match labels {
        None => Ok(samples),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let labels: Vec<usize> = serde_json::from_str(&text).with_context(|| format!("parsing labels {}", p.display()))?;
            let (n, data, _) = samples.into_parts();
            Ok(LabeledSamples::new(n, data, Some(labels))?)
        }
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn synth(a: SynthArgs) -> Result<Value> {
    let spec = SynthSpec {
        variance_range: (a.min_variance, a.max_variance),
        ..SynthSpec::new(a.k, a.n, a.seed).with_samples(a.samples)
    };
    let (dict, samples) = prismquant::synth_mixture(&spec)?;
    Dataset::from_samples(&samples).write(&a.out)?;
    write(&a.dict, dict.to_bytes())?;
    if let Some(p) = &a.labels {
        write(p, serde_json::to_string(samples.labels().unwrap_or_default())?)?;
    }
    Ok(json!({
        "command": "synth",
        "k": dict.k(),
        "n": dict.n(),
        "samples": samples.len(),
        "seed": a.seed,
        "label_entropy_bits": dict.label_entropy_bits(),
        "checksum": format!("{:016x}", dict.checksum()),
    }))
}

fn fit(a: FitArgs) -> Result<Value> {
    let samples = read_samples(&a.data, None)?;
    let cfg = EmConfig { seed: a.seed, max_iters: a.max_iters, restarts: a.restarts, ..EmConfig::default() };
    let fit = fit_em_traced(&samples, a.k, &cfg)?;
    write(&a.out, fit.dictionary.to_bytes())?;
    Ok(json!({
        "command": "fit",
        "k": fit.dictionary.k(),
        "n": fit.dictionary.n(),
        "samples": samples.len(),
        "iterations": fit.trace.loglik.len(),
        "splits": fit.trace.splits,
        "converged": fit.trace.converged,
        "restart": fit.restart,
        "avg_loglik": fit.trace.final_loglik(),
        "checksum": format!("{:016x}", fit.dictionary.checksum()),
    }))
}

fn ingest(a: IngestArgs) -> Result<Value> {
    let raw = Dataset::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let (blocks, layout) = partition_dataset(&raw, a.n)?;
    Dataset::from_samples(&blocks).write(&a.out)?;
    write(&a.layout, serde_json::to_string_pretty(&layout)?)?;
    Ok(json!({
        "command": "ingest",
        "records": layout.records,
        "blocks": blocks.len(),
        "blocks_per_record": layout.blocks_per_record,
        "padding": layout.padding,
        "n": a.n,
    }))
}

fn encode(a: EncodeArgs) -> Result<Value> {
    let dict = read_dict(&a.dict)?;
    let samples = read_samples(&a.data, a.labels.as_deref())?;
    let cfg = CodecConfig::new(a.mode, a.rate).with_tau(a.tau);
    let enc = encode_stream(&samples, &dict, &cfg)?;
    let bytes = enc.to_bytes();
    write(&a.out, &bytes)?;
    let b = &enc.bitstream;
    Ok(json!({
        "command": "encode",
        "mode": a.mode.name(),
        "tau": a.tau.to_string(),
        "vectors": samples.len(),
        "bytes": bytes.len(),
        "level": b.header.level,
        "rate_bits_per_dim": b.payload_bits_per_dim(),
        "label_bits_per_dim": b.label_bits_per_dim(),
        "coef_bits_per_dim": b.coefficient_bits_per_dim(),
        "nmse": mse_per_dim(samples.as_slice(), &enc.reconstruction) / samples.energy_per_dim(),
    }))
}

fn decode(a: DecodeArgs) -> Result<Value> {
    let bytes = std::fs::read(&a.stream).with_context(|| format!("reading {}", a.stream.display()))?;
    let dec = match (&a.dict, &a.pruned) {
        (Some(d), _) => decode_stream(&bytes, &read_dict(d)?)?,
        (None, Some(p)) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            decode_stream_pruned(&bytes, &PrunedDictionary::from_json(&text)?)?
        }
        (None, None) => bail!("one of --dict or --pruned is required"),
    };
    let mut summary = json!({
        "command": "decode",
        "vectors": dec.labels.len(),
        "n": dec.n,
    });
    if let Some(r) = &a.reference {
        let reference = read_samples(r, None)?;
        if reference.as_slice().len() != dec.reconstruction.len() {
            bail!("reference has {} values, stream decodes to {}", reference.as_slice().len(), dec.reconstruction.len());
        }
        summary["nmse"] = json!(mse_per_dim(reference.as_slice(), &dec.reconstruction) / reference.energy_per_dim());
    }
    let out = match &a.layout {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let layout: BlockLayout = serde_json::from_str(&text).with_context(|| format!("parsing layout {}", p.display()))?;
            if layout.block_len != dec.n {
                bail!("layout block length {} differs from stream dimension {}", layout.block_len, dec.n);
            }
            summary["records"] = json!(layout.records);
            reassemble(&dec.reconstruction, &layout)?
        }
        None => Dataset::new(ElementType::F64Real, dec.n, dec.reconstruction)?,
    };
    out.write(&a.out)?;
    if let Some(p) = &a.labels_out {
        write(p, serde_json::to_string(&dec.labels)?)?;
    }
    Ok(summary)
}

fn bounds(a: BoundsArgs) -> Result<Value> {
    let dict = read_dict(&a.dict)?;
    let level = match (a.level, a.rate) {
        (Some(l), _) => l,
        (None, Some(r)) => pooled_spectrum(&dict)?.solve_level_for_rate(r)?,
        (None, None) => bail!("one of --level or --rate is required"),
    };
    let b = sandwich(&dict, level)?;
    let h = entropy_terms(&dict)?;
    let mut summary = json!({
        "command": "bounds",
        "level": b.level,
        "distortion": b.distortion,
        "r_cond": b.r_cond,
        "r_upper": b.r_upper,
        "label_rate": b.label_rate,
        "log2k_over_n": b.log2k_over_n,
        "label_entropy_bits": h.h_label,
        "h_cond_bits": h.h_cond,
    });
    if let Some(p) = &a.data {
        let samples = read_samples(p, None)?;
        let mut counts = vec![0usize; dict.k()];
        dict.map_labels(&samples).into_iter().for_each(|c| counts[c] += 1);
        let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / samples.len().max(1) as f64).collect();
        summary["empirical_label_entropy_bits"] = json!(entropy_bits(&freq));
    }
    Ok(summary)
}

fn sweep(a: SweepArgs) -> Result<Value> {
    let dict = read_dict(&a.dict)?;
    let samples = read_samples(&a.data, a.labels.as_deref())?;
    let curves = a.curves.unwrap_or_else(|| {
        Curve::ALL.into_iter().filter(|&c| c != Curve::Genie || samples.labels().is_some()).collect()
    });
    let spec = SweepSpec { levels: log_levels(a.min_level, a.max_level, a.levels), curves, tau: a.tau };
    let points = rd_sweep(&dict, &samples, &spec)?;
    write(&a.out, to_csv(&points))?;
    Ok(json!({
        "command": "sweep",
        "levels": spec.levels.len(),
        "curves": spec.curves.iter().map(|c| c.name()).collect::<Vec<_>>(),
        "rows": points.len(),
        "vectors": samples.len(),
    }))
}

fn prune(a: PruneArgs) -> Result<Value> {
    let dict = read_dict(&a.dict)?;
    let level = match (a.level, a.rate) {
        (Some(l), _) => l,
        (None, Some(r)) => {
            // same solve as the encoder, so the level matches its header bit for bit
            let cfg = CodecConfig::new(CodecMode::PrismMap, r).with_tau(a.tau);
            pooled_spectrum(&dict)?.solve_level_for_rate(prismquant::codec::coefficient_budget(&dict, &cfg)?)?
        }
        (None, None) => bail!("one of --level or --rate is required"),
    };
    let pruned = prune_dictionary(&dict, level)?;
    write(&a.out, pruned.to_json()?)?;
    Ok(json!({
        "command": "prune",
        "level": level,
        "retained": pruned.retained(),
        "memory_ratio": pruned.memory_ratio(),
    }))
}
