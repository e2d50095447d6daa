//! `PQDATA1` record files and block partitioning.
//!
//! Layout, little-endian: magic `PQDATA1`, version `u16`, record count `u64`,
//! record length `u64` (elements per record), element type `u8`, then the
//! row-major payload. Complex elements are stored as interleaved `(re, im)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::LabeledSamples;

pub const DATA_MAGIC: &[u8; 7] = b"PQDATA1";
pub const DATA_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementType {
    F32Real,
    F64Real,
    F32Complex,
    F64Complex,
}

impl ElementType {
    pub fn code(self) -> u8 {
        match self {
            Self::F32Real => 0,
            Self::F64Real => 1,
            Self::F32Complex => 2,
            Self::F64Complex => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        [Self::F32Real, Self::F64Real, Self::F32Complex, Self::F64Complex]
            .into_iter()
            .find(|t| t.code() == code)
    }

    pub fn is_complex(self) -> bool {
        matches!(self, Self::F32Complex | Self::F64Complex)
    }

    fn scalar_bytes(self) -> usize {
        match self {
            Self::F32Real | Self::F32Complex => 4,
            Self::F64Real | Self::F64Complex => 8,
        }
    }

    /// Reals per element.
    fn width(self) -> usize {
        if self.is_complex() {
            2
        } else {
            1
        }
    }
}

/// A block of equal-length records held as `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub element: ElementType,
    /// Elements per record; a complex element is one entry.
    pub record_len: usize,
    /// Row-major reals, `record_len · width` per record.
    pub data: Vec<f64>,
}

impl Dataset {
    pub fn new(element: ElementType, record_len: usize, data: Vec<f64>) -> Result<Self> {
        let stride = record_len * element.width();
        if stride == 0 || !data.len().is_multiple_of(stride) {
            return Err(Error::Ingest {
                record: data.len().checked_div(stride).unwrap_or(0),
                reason: format!("payload of {} reals is not a whole number of {stride}-real records", data.len()),
            });
        }
        Ok(Self { element, record_len, data })
    }

    /// Real samples of dimension `n`, one record per sample.
    pub fn from_samples(samples: &LabeledSamples) -> Self {
        Self { element: ElementType::F64Real, record_len: samples.n(), data: samples.as_slice().to_vec() }
    }

    pub fn stride(&self) -> usize {
        self.record_len * self.element.width()
    }

    pub fn records(&self) -> usize {
        self.data.len() / self.stride()
    }

    pub fn record(&self, i: usize) -> &[f64] {
        let s = self.stride();
        &self.data[i * s..(i + 1) * s]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(26 + self.data.len() * self.element.scalar_bytes());
        out.extend_from_slice(DATA_MAGIC);
        out.extend_from_slice(&DATA_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.records() as u64).to_le_bytes());
        out.extend_from_slice(&(self.record_len as u64).to_le_bytes());
        out.push(self.element.code());
        match self.element.scalar_bytes() {
            4 => self.data.iter().for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
            _ => self.data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |reason: String| Error::Format(format!("PQDATA1: {reason}"));
        if bytes.len() < 26 || &bytes[..7] != DATA_MAGIC {
            return Err(bad("missing magic or short header".into()));
        }
        let version = u16::from_le_bytes([bytes[7], bytes[8]]);
        if version != DATA_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let count = u64::from_le_bytes(bytes[9..17].try_into().unwrap());
        let record_len = u64::from_le_bytes(bytes[17..25].try_into().unwrap());
        let element = ElementType::from_code(bytes[25]).ok_or_else(|| bad(format!("unknown element type {}", bytes[25])))?;
        let reals = count
            .checked_mul(record_len)
            .and_then(|v| v.checked_mul(element.width() as u64))
            .and_then(|v| usize::try_from(v).ok())
            .ok_or_else(|| bad("size overflow".into()))?;
        let payload = &bytes[26..];
        let sb = element.scalar_bytes();
        if payload.len() != reals * sb {
            let stride = (record_len as usize * element.width() * sb).max(1);
            return Err(Error::Ingest {
                record: payload.len() / stride,
                reason: format!("payload is {} bytes, header implies {}", payload.len(), reals * sb),
            });
        }
        let data = if sb == 4 {
            payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect()
        } else {
            payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
        };
        Self::new(element, record_len as usize, data)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    /// Interprets a real dataset as samples of dimension `record_len`.
    pub fn to_samples(&self) -> Result<LabeledSamples> {
        if self.element.is_complex() {
            return Err(Error::Domain("complex records must be partitioned before coding".into()));
        }
        LabeledSamples::new(self.record_len, self.data.clone(), None)
    }
}

/// How records were cut into blocks, so they can be put back together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub element: ElementType,
    pub record_len: usize,
    pub records: usize,
    pub block_len: usize,
    pub blocks_per_record: usize,
    /// Zeros appended to each record's real vector.
    pub padding: usize,
}

/// Splits complex records into real and imaginary halves, pads with zeros to
/// a multiple of `n` and cuts each record into `n`-dimensional blocks. Real
/// records are padded and cut as they are.
pub fn partition_dataset(ds: &Dataset, n: usize) -> Result<(LabeledSamples, BlockLayout)> {
    if n == 0 {
        return Err(Error::Domain("block length must be at least 1".into()));
    }
    let reals = ds.stride();
    let blocks = reals.div_ceil(n);
    let padding = blocks * n - reals;
    let mut data = Vec::with_capacity(ds.records() * blocks * n);
    for r in 0..ds.records() {
        let rec = ds.record(r);
        if ds.element.is_complex() {
            data.extend(rec.iter().step_by(2));
            data.extend(rec.iter().skip(1).step_by(2));
        } else {
            data.extend_from_slice(rec);
        }
        data.extend(std::iter::repeat_n(0.0, padding));
    }
    let layout = BlockLayout {
        element: ds.element,
        record_len: ds.record_len,
        records: ds.records(),
        block_len: n,
        blocks_per_record: blocks,
        padding,
    };
    Ok((LabeledSamples::new(n, data, None)?, layout))
}

/// Checks that every complex record has the same length, then partitions.
pub fn partition_records(records: &[Vec<(f64, f64)>], n: usize) -> Result<(LabeledSamples, BlockLayout)> {
    let len = records.first().map_or(0, Vec::len);
    if len == 0 {
        return Err(Error::Ingest { record: 0, reason: "empty record".into() });
    }
    let mut data = Vec::with_capacity(records.len() * 2 * len);
    for (i, r) in records.iter().enumerate() {
        if r.len() != len {
            return Err(Error::Ingest { record: i, reason: format!("length {} differs from {len}", r.len()) });
        }
        r.iter().for_each(|&(re, im)| data.extend([re, im]));
    }
    partition_dataset(&Dataset::new(ElementType::F64Complex, len, data)?, n)
}

/// Inverse of [`partition_dataset`]: drops padding and re-interleaves complex parts.
pub fn reassemble(blocks: &[f64], layout: &BlockLayout) -> Result<Dataset> {
    let per = layout.blocks_per_record * layout.block_len;
    if blocks.len() != per * layout.records {
        return Err(Error::DimensionMismatch { expected: per * layout.records, found: blocks.len() });
    }
    let reals = per - layout.padding;
    let mut data = Vec::with_capacity(layout.records * reals);
    for rec in blocks.chunks_exact(per.max(1)) {
        let body = &rec[..reals];
        if layout.element.is_complex() {
            let (re, im) = body.split_at(layout.record_len);
            re.iter().zip(im).for_each(|(&a, &b)| data.extend([a, b]));
        } else {
            data.extend_from_slice(body);
        }
    }
    Dataset::new(layout.element, layout.record_len, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_complex_element() {
        let (s, layout) = partition_records(&[vec![(1.5, -2.0)]], 2).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.row(0), &[1.5, -2.0]);
        assert_eq!(layout.padding, 0);
    }

    #[test]
    fn two_blocks_per_large_record() {
        let rec: Vec<(f64, f64)> = (0..32 * 32).map(|i| (i as f64, -(i as f64))).collect();
        let (s, layout) = partition_records(&[rec.clone(), rec], 1024).unwrap();
        assert_eq!(layout.blocks_per_record, 2);
        assert_eq!(s.len(), 4);
        assert_eq!(s.row(0)[5], 5.0);
        assert_eq!(s.row(1)[5], -5.0);
    }

    #[test]
    fn padding_and_reassembly() {
        let data: Vec<f64> = (0..30).map(|i| i as f64 * 0.25 - 3.0).collect();
        for (element, record_len) in [
            (ElementType::F64Complex, 5),
            (ElementType::F32Complex, 5),
            (ElementType::F64Real, 10),
            (ElementType::F32Real, 3),
        ] {
            let ds = Dataset::new(element, record_len, data.clone()).unwrap();
            let (s, layout) = partition_dataset(&ds, 4).unwrap();
            assert_eq!(s.len(), layout.records * layout.blocks_per_record);
            assert_eq!(layout.padding, layout.blocks_per_record * 4 - ds.stride());
            assert_eq!(reassemble(s.as_slice(), &layout).unwrap(), ds);
        }
    }

    #[test]
    fn ragged_records_are_rejected() {
        let err = partition_records(&[vec![(0.0, 0.0); 3], vec![(0.0, 0.0); 3], vec![(0.0, 0.0); 2]], 2).unwrap_err();
        assert!(matches!(err, Error::Ingest { record: 2, .. }));
    }

    #[test]
    fn file_roundtrip() {
        let ds = Dataset::new(ElementType::F32Complex, 3, vec![0.5, 1.0, -2.0, 0.25, 3.0, 4.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0]).unwrap();
        let bytes = ds.to_bytes();
        assert_eq!(&bytes[..7], b"PQDATA1");
        assert_eq!(bytes.len(), 26 + 12 * 4);
        assert_eq!(Dataset::from_bytes(&bytes).unwrap(), ds);
        assert!(matches!(Dataset::from_bytes(&bytes[..bytes.len() - 4]), Err(Error::Ingest { .. })));
        let mut bad = bytes.clone();
        bad[25] = 9;
        assert!(Dataset::from_bytes(&bad).is_err());
    }
}
