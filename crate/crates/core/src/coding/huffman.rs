use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::bits::{BitReader, BitWriter};
use crate::error::{corrupt, Error, Result};

const MAX_CODE_LEN: u8 = 64;

/// Canonical Huffman code over component labels `0..K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelCode {
    lengths: Vec<u8>,
    codes: Vec<u64>,
    /// Symbols sorted by `(length, symbol)`, the canonical order.
    sorted: Vec<usize>,
    /// `count[l]` codewords have length `l`.
    count: Vec<usize>,
}

struct Node {
    weight: f64,
    /// Smallest symbol in the subtree; breaks weight ties.
    first: usize,
    id: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // reversed so the max-heap pops the lightest node first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .weight
            .total_cmp(&self.weight)
            .then_with(|| other.first.cmp(&self.first))
    }
}

/// Builds the canonical Huffman code for `priors`.
pub fn build_label_code(priors: &[f64]) -> Result<LabelCode> {
    let k = priors.len();
    if k == 0 {
        return Err(Error::Domain("label code needs at least one symbol".into()));
    }
    if priors.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::Domain("label priors must be finite and non-negative".into()));
    }
    let mut parent = vec![usize::MAX; 2 * k - 1];
    let mut heap: BinaryHeap<Node> = priors
        .iter()
        .enumerate()
        .map(|(i, &w)| Node { weight: w, first: i, id: i })
        .collect();
    let mut next = k;
    while heap.len() > 1 {
        let a = heap.pop().unwrap();
        let b = heap.pop().unwrap();
        parent[a.id] = next;
        parent[b.id] = next;
        heap.push(Node {
            weight: a.weight + b.weight,
            first: a.first.min(b.first),
            id: next,
        });
        next += 1;
    }
    let mut lengths = vec![0u8; k];
    for (s, len) in lengths.iter_mut().enumerate() {
        let mut depth = 0usize;
        let mut node = s;
        while parent[node] != usize::MAX {
            node = parent[node];
            depth += 1;
        }
        if depth > MAX_CODE_LEN as usize {
            return Err(Error::Domain(format!("Huffman codeword for label {s} exceeds 64 bits")));
        }
        *len = depth as u8;
    }
    Ok(LabelCode::from_lengths(lengths))
}

impl LabelCode {
    /// Assigns canonical codewords to the given lengths.
    fn from_lengths(lengths: Vec<u8>) -> Self {
        let mut sorted: Vec<usize> = (0..lengths.len()).collect();
        sorted.sort_by_key(|&s| (lengths[s], s));
        let max_len = lengths.iter().copied().max().unwrap_or(0) as usize;
        let mut count = vec![0usize; max_len + 1];
        lengths.iter().for_each(|&l| count[l as usize] += 1);
        let mut codes = vec![0u64; lengths.len()];
        let mut code = 0u64;
        let mut prev = 0u8;
        for (i, &s) in sorted.iter().enumerate() {
            let l = lengths[s];
            if i > 0 {
                code = (code + 1) << (l - prev);
            }
            codes[s] = code;
            prev = l;
        }
        Self { lengths, codes, sorted, count }
    }

    pub fn k(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[u8] {
        &self.lengths
    }

    pub fn codes(&self) -> &[u64] {
        &self.codes
    }

    /// Expected codeword length in bits under `priors`.
    pub fn expected_length(&self, priors: &[f64]) -> f64 {
        priors.iter().zip(&self.lengths).map(|(p, &l)| p * l as f64).sum()
    }

    pub fn encode_labels(&self, labels: &[usize], writer: &mut BitWriter) -> Result<()> {
        for &c in labels {
            if c >= self.k() {
                return Err(Error::Domain(format!("label {c} outside 0..{}", self.k())));
            }
            writer.write_bits(self.codes[c], self.lengths[c] as u32);
        }
        Ok(())
    }

    pub fn decode_labels(&self, reader: &mut BitReader<'_>, count: usize) -> Result<Vec<usize>> {
        (0..count).map(|_| self.decode_one(reader)).collect()
    }

    fn decode_one(&self, reader: &mut BitReader<'_>) -> Result<usize> {
        let mut code = 0u64;
        let mut first = 0u64;
        let mut index = 0usize;
        if self.count.len() == 1 {
            return Ok(self.sorted[0]);
        }
        for len in 1..self.count.len() {
            code |= reader.read_bit()? as u64;
            let n = self.count[len] as u64;
            if code.wrapping_sub(first) < n {
                return Ok(self.sorted[index + (code - first) as usize]);
            }
            index += n as usize;
            first = (first + n) << 1;
            code <<= 1;
        }
        Err(corrupt(reader.bits_read() / 8, "invalid Huffman codeword"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy_bits;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dyadic_prior() {
        let p = [0.5, 0.25, 0.125, 0.125];
        let code = build_label_code(&p).unwrap();
        assert_eq!(code.lengths(), &[1, 2, 3, 3]);
        assert_eq!(code.expected_length(&p), 1.75);
        assert_eq!(code.codes(), &[0b0, 0b10, 0b110, 0b111]);
    }

    #[test]
    fn three_symbols() {
        let p = [0.4, 0.3, 0.3];
        let code = build_label_code(&p).unwrap();
        assert_eq!(code.lengths(), &[1, 2, 2]);
        assert!((code.expected_length(&p) - 1.6).abs() < 1e-15);
    }

    #[test]
    fn single_symbol_costs_nothing() {
        let code = build_label_code(&[1.0]).unwrap();
        assert_eq!(code.lengths(), &[0]);
        let mut w = BitWriter::new();
        code.encode_labels(&[0, 0, 0], &mut w).unwrap();
        assert_eq!(w.bit_len(), 0);
        let bytes = w.finish();
        assert_eq!(code.decode_labels(&mut BitReader::new(&bytes), 3).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn empty_and_invalid_inputs() {
        let code = build_label_code(&[0.5, 0.5]).unwrap();
        let mut w = BitWriter::new();
        code.encode_labels(&[], &mut w).unwrap();
        assert!(w.finish().is_empty());
        assert!(code.encode_labels(&[2], &mut BitWriter::new()).is_err());
        assert!(matches!(
            code.decode_labels(&mut BitReader::new(&[]), 1),
            Err(Error::CorruptStream { .. })
        ));
    }

    #[test]
    fn dyadic_stream_rate() {
        let p = [0.5, 0.25, 0.125, 0.125];
        let code = build_label_code(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let labels: Vec<usize> = (0..100_000)
            .map(|_| {
                let u: f64 = rng.random();
                p.iter()
                    .scan(0.0, |acc, &q| {
                        *acc += q;
                        Some(*acc)
                    })
                    .position(|c| u < c)
                    .unwrap_or(3)
            })
            .collect();
        let mut w = BitWriter::new();
        code.encode_labels(&labels, &mut w).unwrap();
        let m = labels.len() as f64;
        let lens: Vec<f64> = labels.iter().map(|&c| code.lengths()[c] as f64).collect();
        assert_eq!(w.bit_len() as f64, lens.iter().sum::<f64>());
        let per_label = w.bit_len() as f64 / m;
        let var = lens.iter().map(|l| (l - per_label).powi(2)).sum::<f64>() / (m - 1.0);
        let band = (1e-3 * 1.75f64).max(3.0 * (var / m).sqrt());
        assert!((per_label - 1.75).abs() <= band, "{per_label}");
        let bytes = w.finish();
        assert_eq!(code.decode_labels(&mut BitReader::new(&bytes), labels.len()).unwrap(), labels);
    }

    #[test]
    fn very_skewed_prior_hits_length_limit() {
        let p: Vec<f64> = (0..80).map(|i| 0.5f64.powi(i)).collect();
        assert!(build_label_code(&p).is_err());
    }

    proptest! {
        #[test]
        fn within_one_bit_of_entropy(w in prop::collection::vec(0.01f64..1.0, 1..40)) {
            let s: f64 = w.iter().sum();
            let p: Vec<f64> = w.iter().map(|x| x / s).collect();
            let code = build_label_code(&p).unwrap();
            let h = entropy_bits(&p);
            let l = code.expected_length(&p);
            prop_assert!(l >= h - 1e-12 && l < h + 1.0);
            let kraft: f64 = code.lengths().iter().map(|&l| 0.5f64.powi(l as i32)).sum();
            prop_assert!((kraft - 1.0).abs() < 1e-12 || p.len() == 1);
        }

        #[test]
        fn roundtrip(w in prop::collection::vec(0.01f64..1.0, 1..20), seed in any::<u64>(), len in 0usize..300) {
            let code = build_label_code(&w).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let labels: Vec<usize> = (0..len).map(|_| rng.random_range(0..w.len())).collect();
            let mut wr = BitWriter::new();
            code.encode_labels(&labels, &mut wr).unwrap();
            let bits: usize = labels.iter().map(|&c| code.lengths()[c] as usize).sum();
            prop_assert_eq!(wr.bit_len(), bits);
            let bytes = wr.finish();
            prop_assert_eq!(code.decode_labels(&mut BitReader::new(&bytes), len).unwrap(), labels);
        }
    }
}
