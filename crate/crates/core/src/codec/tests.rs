use super::*;
use crate::linalg::SymMatrix;
use crate::ratealloc::allocation;
use crate::synth::{synth_mixture, SynthSpec};

fn diag_single(vals: &[f64]) -> MixtureDictionary {
    MixtureDictionary::single(vec![0.0; vals.len()], SymMatrix::diag(vals)).unwrap()
}

fn mixture(seed: u64, count: usize) -> (MixtureDictionary, LabeledSamples) {
    synth_mixture(&SynthSpec::new(4, 6, seed).with_samples(count)).unwrap()
}

#[test]
fn one_active_mode_at_one_bit() {
    let d = diag_single(&[4.0, 1.0]);
    let alloc = allocation(&pooled_spectrum(&d).unwrap(), 1.0).unwrap();
    let plan = CodingPlan::from_table(&d, &alloc.table).unwrap();
    assert_eq!(plan.active_modes(0), 1);
    assert!((plan.quantizer(0, 0).target_rate() - 1.0).abs() < 1e-15);
    let (c, idx) = encode_vector(&[0.3, -2.0], &d, &alloc, None).unwrap();
    assert_eq!((c, idx.len()), (0, 1));
}

#[test]
fn submerged_level_reconstructs_means() {
    let d = MixtureDictionary::new(
        vec![0.5, 0.5],
        vec![vec![1.0, 2.0], vec![-3.0, 0.5]],
        vec![SymMatrix::diag(&[2.0, 1.0]), SymMatrix::diag(&[0.5, 0.25])],
    )
    .unwrap();
    let alloc = allocation(&pooled_spectrum(&d).unwrap(), 2.0).unwrap();
    let (c, idx) = encode_vector(&[0.9, 2.2], &d, &alloc, None).unwrap();
    assert!(idx.is_empty());
    assert_eq!(decode_vector(c, &idx, &d, &alloc).unwrap(), d.mean(c));
    // zero indices on active modes also give the mean
    let alloc = allocation(&pooled_spectrum(&d).unwrap(), 0.1).unwrap();
    assert_eq!(decode_vector(1, &[0, 0], &d, &alloc).unwrap(), d.mean(1));
    assert!(decode_vector(1, &[0], &d, &alloc).is_err());
    assert!(encode_vector(&[1.0], &d, &alloc, None).is_err());
}

#[test]
fn stream_roundtrip_is_bit_exact_for_every_mode() {
    let (d, s) = mixture(11, 3000);
    for mode in CodecMode::ALL {
        for tau in [Tau::Finite(1), Tau::Finite(7), Tau::Infinite] {
            let cfg = CodecConfig::new(mode, 1.2).with_tau(tau);
            let enc = encode_stream(&s, &d, &cfg).unwrap();
            let bytes = enc.to_bytes();
            let dec = decode_stream(&bytes, &d).unwrap();
            assert_eq!(dec.labels, enc.labels, "{mode} τ={tau}");
            assert!(
                dec.reconstruction.iter().zip(&enc.reconstruction).all(|(a, b)| a.to_bits() == b.to_bits()),
                "{mode} τ={tau}"
            );
            assert_eq!(enc.bitstream.header.mode, mode);
            // repeated runs give identical bytes
            assert_eq!(encode_stream(&s, &d, &cfg).unwrap().to_bytes(), bytes);
        }
    }
}

#[test]
fn windows_share_labels() {
    let (d, s) = mixture(12, 100);
    let cfg = CodecConfig::new(CodecMode::PrismMap, 2.0).with_tau(Tau::Finite(8));
    let enc = encode_stream(&s, &d, &cfg).unwrap();
    for w in enc.labels.chunks(8) {
        assert!(w.iter().all(|&c| c == w[0]));
    }
    let cfg = CodecConfig::new(CodecMode::PrismGenie, 2.0).with_tau(Tau::Infinite);
    let enc = encode_stream(&s, &d, &cfg).unwrap();
    assert!(enc.labels.iter().all(|&c| c == s.labels().unwrap()[0]));
}

#[test]
fn pruned_decoder_matches_full_decoder() {
    let (d, s) = mixture(13, 2000);
    let spectrum = pooled_spectrum(&d).unwrap();
    let cfg = CodecConfig::new(CodecMode::PrismMap, 0.0);
    for level in [1e-3, 0.05, 0.7, 3.0, 9.5, 20.0] {
        let enc = encode_stream_at_level(&s, &d, &cfg, level, LabelSource::Map).unwrap();
        let bytes = enc.to_bytes();
        let full = decode_stream(&bytes, &d).unwrap();
        let pruned = prune_dictionary(&d, level).unwrap();
        let lean = decode_stream_pruned(&bytes, &pruned).unwrap();
        assert_eq!(full.labels, lean.labels);
        assert!(full.reconstruction.iter().zip(&lean.reconstruction).all(|(a, b)| a.to_bits() == b.to_bits()));
        if level >= spectrum.max_eigenvalue() {
            assert!(enc.bitstream.coefficients.is_empty());
            assert_eq!(pruned.memory_ratio(), 0.0);
        }
    }
    let pruned = prune_dictionary(&d, 0.5).unwrap();
    let enc = encode_stream_at_level(&s, &d, &cfg, 0.25, LabelSource::Map).unwrap();
    assert!(decode_stream_pruned(&enc.to_bytes(), &pruned).is_err());
}

#[test]
fn dyadic_label_segment() {
    let d = MixtureDictionary::new(
        vec![0.5, 0.25, 0.125, 0.125],
        vec![vec![0.0, 0.0], vec![40.0, 0.0], vec![0.0, 40.0], vec![-40.0, -40.0]],
        vec![SymMatrix::identity(2); 4],
    )
    .unwrap();
    let s = d.sample(40_000, 3);
    let cfg = CodecConfig::new(CodecMode::PrismMap, 2.0);
    let enc = encode_stream(&s, &d, &cfg).unwrap();
    let lbl = enc.bitstream.label_bits_per_dim();
    assert!((lbl - 0.875).abs() < 0.01, "{lbl}");
    assert!((label_rate(&d, Tau::Finite(1)) - 0.875).abs() < 1e-15);
}

#[test]
fn budget_errors() {
    let (d, s) = mixture(14, 10);
    let min = label_rate(&d, Tau::Finite(1));
    match encode_stream(&s, &d, &CodecConfig::new(CodecMode::PrismMap, min / 2.0)) {
        Err(Error::InfeasibleBudget { minimum, .. }) => assert_eq!(minimum, min),
        other => panic!("{other:?}"),
    }
    assert!(encode_stream(&s, &d, &CodecConfig::new(CodecMode::PrismMap, min)).is_ok());
    assert!(encode_stream(&s, &d, &CodecConfig::new(CodecMode::PrismMap, -1.0)).is_err());
    assert!(encode_stream(&s, &d, &CodecConfig::new(CodecMode::PrismMap, 1.0).with_tau(Tau::Finite(0))).is_err());
    let unlabeled = LabeledSamples::new(s.n(), s.as_slice().to_vec(), None).unwrap();
    assert!(encode_stream(&unlabeled, &d, &CodecConfig::new(CodecMode::PrismGenie, 1.0)).is_err());
}

#[test]
fn damaged_streams_are_rejected() {
    let (d, s) = mixture(15, 500);
    let enc = encode_stream(&s, &d, &CodecConfig::new(CodecMode::PrismMap, 1.5)).unwrap();
    let bytes = enc.to_bytes();
    for cut in [10, 60, bytes.len() / 2, bytes.len() - 1] {
        match decode_stream(&bytes[..cut], &d) {
            Err(Error::CorruptStream { offset, .. }) => assert!(offset <= bytes.len()),
            other => panic!("cut {cut}: {:?}", other.map(|_| ())),
        }
    }
    let (other, _) = mixture(16, 1);
    assert!(matches!(decode_stream(&bytes, &other), Err(Error::DictionaryMismatch { .. })));
}

#[test]
fn mode_and_tau_parsing() {
    for m in CodecMode::ALL {
        assert_eq!(m.name().parse::<CodecMode>().unwrap(), m);
        assert_eq!(CodecMode::from_code(m.code()), Some(m));
    }
    assert!("mp3".parse::<CodecMode>().is_err());
    assert_eq!("inf".parse::<Tau>().unwrap(), Tau::Infinite);
    assert_eq!("4".parse::<Tau>().unwrap(), Tau::Finite(4));
    assert!("0".parse::<Tau>().is_err());
    assert_eq!(Tau::Finite(3).label_count(10), 4);
    assert_eq!(Tau::Infinite.label_count(10), 1);
    assert_eq!(Tau::Infinite.label_count(0), 0);
}

#[test]
fn wutc_matches_prismquant_for_identical_classes() {
    let cov = SymMatrix::from_row_major(3, vec![3.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 0.4]).unwrap();
    let d = MixtureDictionary::new(vec![0.5, 0.5], vec![vec![5.0; 3], vec![-5.0; 3]], vec![cov.clone(), cov]).unwrap();
    let s = d.sample(5000, 8);
    let cfg = CodecConfig::new(CodecMode::PrismMap, 1.5);
    let pq = encode_stream(&s, &d, &cfg).unwrap();
    let wu = wutc_encode_stream(&s, &d, &cfg).unwrap();
    assert!((pq.bitstream.payload_bits_per_dim() - wu.bitstream.payload_bits_per_dim()).abs() < 0.02);
    let x = s.as_slice();
    assert!((mse_per_dim(x, &pq.reconstruction) / mse_per_dim(x, &wu.reconstruction) - 1.0).abs() < 0.02);
}
