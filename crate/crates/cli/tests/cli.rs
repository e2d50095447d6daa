use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use prismquant::dataset::{Dataset, ElementType};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_prismquant"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

/// Runs a command that must succeed and returns its summary line.
fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1, "summary should be one line: {text}");
    serde_json::from_str(&text).unwrap()
}

/// Runs a command that must fail and returns its single diagnostic line.
fn fails(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = run(dir, args);
    assert!(!out.status.success(), "{args:?} should fail");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "diagnostic should be one line: {err}");
    (out.status.code().unwrap(), err.trim_end().to_string())
}

fn workdir() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().to_path_buf();
    ok(&path, &["synth", "--k", "3", "--n", "6", "--seed", "5", "--samples", "3000", "--out", "d.pqd", "--dict", "t.pqdict", "--labels", "l.json"]);
    (dir, path)
}

#[test]
fn encode_decode_roundtrip_matches_encoder_reconstruction() {
    let (_tmp, dir) = workdir();
    let enc = ok(&dir, &["encode", "--data", "d.pqd", "--dict", "t.pqdict", "--rate", "1.2", "--out", "s.pqbs"]);
    assert_eq!(enc["mode"], "prismquant-map");
    assert!((enc["rate_bits_per_dim"].as_f64().unwrap() - 1.2).abs() < 0.1);
    let dec = ok(&dir, &["decode", "--stream", "s.pqbs", "--dict", "t.pqdict", "--out", "r.pqd", "--reference", "d.pqd", "--labels-out", "dl.json"]);
    assert_eq!(dec["vectors"], 3000);
    assert_eq!(dec["nmse"], enc["nmse"]);
    let labels: Vec<usize> = serde_json::from_str(&std::fs::read_to_string(dir.join("dl.json")).unwrap()).unwrap();
    assert_eq!(labels.len(), 3000);
    assert!(labels.iter().all(|&c| c < 3));

    ok(&dir, &["prune", "--dict", "t.pqdict", "--rate", "1.2", "--out", "p.json"]);
    ok(&dir, &["decode", "--stream", "s.pqbs", "--pruned", "p.json", "--out", "rp.pqd"]);
    assert_eq!(std::fs::read(dir.join("r.pqd")).unwrap(), std::fs::read(dir.join("rp.pqd")).unwrap());
}

#[test]
fn every_mode_encodes() {
    let (_tmp, dir) = workdir();
    for mode in ["prismquant-map", "prismquant-genie", "tc-single", "wutc"] {
        for tau in ["1", "4", "inf"] {
            let enc = ok(&dir, &["encode", "--data", "d.pqd", "--dict", "t.pqdict", "--labels", "l.json", "--rate", "2", "--mode", mode, "--tau", tau, "--out", "s.pqbs"]);
            let dec = ok(&dir, &["decode", "--stream", "s.pqbs", "--dict", "t.pqdict", "--out", "r.pqd", "--reference", "d.pqd"]);
            assert_eq!(dec["nmse"], enc["nmse"], "{mode} tau {tau}");
        }
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let (_tmp, dir) = workdir();
    for out in ["a", "b"] {
        ok(&dir, &["encode", "--data", "d.pqd", "--dict", "t.pqdict", "--rate", "0.8", "--out", &format!("{out}.pqbs")]);
        ok(&dir, &["sweep", "--dict", "t.pqdict", "--data", "d.pqd", "--labels", "l.json", "--levels", "6", "--out", &format!("{out}.csv")]);
        ok(&dir, &["fit", "--data", "d.pqd", "--k", "3", "--seed", "1", "--max-iters", "30", "--out", &format!("{out}.pqdict")]);
    }
    for ext in ["pqbs", "csv", "pqdict"] {
        assert_eq!(std::fs::read(dir.join(format!("a.{ext}"))).unwrap(), std::fs::read(dir.join(format!("b.{ext}"))).unwrap(), "{ext}");
    }
}

#[test]
fn sweep_csv_is_monotone_per_curve() {
    let (_tmp, dir) = workdir();
    let s = ok(&dir, &["sweep", "--dict", "t.pqdict", "--data", "d.pqd", "--labels", "l.json", "--levels", "12", "--out", "c.csv"]);
    assert_eq!(s["rows"], 72);
    let text = std::fs::read_to_string(dir.join("c.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), prismquant::sweep::CSV_HEADER);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    for pair in rows.windows(2).filter(|w| w[0][0] == w[1][0]) {
        let f = |row: &[&str], i: usize| row[i].parse::<f64>().unwrap();
        assert!(f(&pair[1], 1) > f(&pair[0], 1));
        assert!(f(&pair[1], 2) <= f(&pair[0], 2) + 1e-12, "{pair:?}");
        assert!(f(&pair[1], 3) >= f(&pair[0], 3) - 1e-12, "{pair:?}");
    }
    let no_labels = ok(&dir, &["sweep", "--dict", "t.pqdict", "--data", "d.pqd", "--levels", "3", "--out", "c2.csv"]);
    assert!(!no_labels["curves"].as_array().unwrap().iter().any(|c| c == "genie"));
}

#[test]
fn complex_records_survive_ingest_and_reassembly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data: Vec<f64> = (0..40 * 10).map(|i| ((i * 37) % 101) as f64 / 10.0 - 5.0).collect();
    Dataset::new(ElementType::F64Complex, 5, data).unwrap().write(d.join("raw.pqd")).unwrap();
    let ing = ok(d, &["ingest", "--input", "raw.pqd", "--n", "4", "--out", "b.pqd", "--layout", "layout.json"]);
    assert_eq!(ing["blocks_per_record"], 3);
    assert_eq!(ing["padding"], 2);
    ok(d, &["fit", "--data", "b.pqd", "--k", "1", "--out", "f.pqdict"]);
    ok(d, &["encode", "--data", "b.pqd", "--dict", "f.pqdict", "--rate", "12", "--out", "s.pqbs"]);
    let dec = ok(d, &["decode", "--stream", "s.pqbs", "--dict", "f.pqdict", "--layout", "layout.json", "--out", "back.pqd"]);
    assert_eq!(dec["records"], 40);
    let back = Dataset::read(d.join("back.pqd")).unwrap();
    let raw = Dataset::read(d.join("raw.pqd")).unwrap();
    assert_eq!((back.element, back.record_len, back.records()), (raw.element, raw.record_len, raw.records()));
    let worst = back.data.iter().zip(&raw.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 0.05, "{worst}");

    let (_, msg) = fails(d, &["encode", "--data", "raw.pqd", "--dict", "f.pqdict", "--rate", "1", "--out", "x"]);
    assert!(msg.contains("partitioned"), "{msg}");
}

#[test]
fn bounds_report_both_label_entropies() {
    let (_tmp, dir) = workdir();
    let b = ok(&dir, &["bounds", "--dict", "t.pqdict", "--level", "0.5", "--data", "d.pqd"]);
    let gap = b["r_upper"].as_f64().unwrap() - b["r_cond"].as_f64().unwrap();
    assert!((gap - b["label_entropy_bits"].as_f64().unwrap() / 6.0).abs() < 1e-12);
    assert!(b["empirical_label_entropy_bits"].as_f64().unwrap() > 0.0);
    let r = ok(&dir, &["bounds", "--dict", "t.pqdict", "--rate", "1.0"]);
    assert!((r["r_cond"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn errors_are_one_line_and_nonzero() {
    let (_tmp, dir) = workdir();
    ok(&dir, &["synth", "--k", "2", "--n", "6", "--seed", "9", "--samples", "10", "--out", "o.pqd", "--dict", "other.pqdict"]);
    ok(&dir, &["encode", "--data", "d.pqd", "--dict", "t.pqdict", "--rate", "1", "--out", "s.pqbs"]);

    let (code, msg) = fails(&dir, &["decode", "--stream", "s.pqbs", "--dict", "other.pqdict", "--out", "r.pqd"]);
    assert_eq!(code, 1);
    assert!(msg.starts_with("error: dictionary checksum mismatch"), "{msg}");

    let (code, msg) = fails(&dir, &["encode", "--data", "d.pqd", "--dict", "t.pqdict", "--rate", "0.01", "--out", "x"]);
    assert_eq!(code, 1);
    assert!(msg.contains("infeasible budget"), "{msg}");

    let (code, msg) = fails(&dir, &["encode", "--data", "d.pqd", "--dict", "t.pqdict", "--rate", "1", "--mode", "prismquant-genie", "--out", "x"]);
    assert_eq!(code, 1);
    assert!(msg.contains("generating labels"), "{msg}");

    std::fs::write(dir.join("cut.pqbs"), &std::fs::read(dir.join("s.pqbs")).unwrap()[..40]).unwrap();
    let (code, msg) = fails(&dir, &["decode", "--stream", "cut.pqbs", "--dict", "t.pqdict", "--out", "r.pqd"]);
    assert_eq!(code, 1);
    assert!(msg.contains("corrupt stream"), "{msg}");

    let (code, _) = fails(&dir, &["encode", "--data", "d.pqd", "--dict", "t.pqdict", "--rate", "1", "--mode", "bogus", "--out", "x"]);
    assert_eq!(code, 2);
    let (code, _) = fails(&dir, &["decode", "--stream", "s.pqbs", "--out", "r.pqd"]);
    assert_eq!(code, 2);
    let (code, msg) = fails(&dir, &["fit", "--data", "missing.pqd", "--k", "2", "--out", "x"]);
    assert_eq!(code, 1);
    assert!(msg.contains("missing.pqd"), "{msg}");
}
