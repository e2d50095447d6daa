//! `PQBS1` container.
//!
//! Layout, little-endian: magic `PQBS1`, version `u16`, mode `u8`, `n u32`,
//! `K u32`, `R_tot f64`, vector count `u64`, `τ u32` (0 for unbounded),
//! dictionary checksum `u64`, water level `f64`, then the label segment and the
//! coefficient segment, each as a `u64` byte length followed by its payload.

use super::{CodecMode, Tau};
use crate::error::{corrupt, Error, Result};

pub const STREAM_MAGIC: &[u8; 5] = b"PQBS1";
pub const STREAM_VERSION: u16 = 1;
/// Bytes before the label segment length.
pub const HEADER_LEN: usize = 5 + 2 + 1 + 4 + 4 + 8 + 8 + 4 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamHeader {
    pub mode: CodecMode,
    pub n: u32,
    pub k: u32,
    pub total_rate: f64,
    pub count: u64,
    pub tau: Tau,
    pub checksum: u64,
    /// Global water level; zero for modes that use per-class levels.
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bitstream {
    pub header: StreamHeader,
    pub labels: Vec<u8>,
    pub coefficients: Vec<u8>,
}

impl Bitstream {
    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(HEADER_LEN + 16 + self.labels.len() + self.coefficients.len());
        out.extend_from_slice(STREAM_MAGIC);
        out.extend_from_slice(&STREAM_VERSION.to_le_bytes());
        out.push(h.mode.code());
        out.extend_from_slice(&h.n.to_le_bytes());
        out.extend_from_slice(&h.k.to_le_bytes());
        out.extend_from_slice(&h.total_rate.to_le_bytes());
        out.extend_from_slice(&h.count.to_le_bytes());
        out.extend_from_slice(&h.tau.code().to_le_bytes());
        out.extend_from_slice(&h.checksum.to_le_bytes());
        out.extend_from_slice(&h.level.to_le_bytes());
        for seg in [&self.labels, &self.coefficients] {
            out.extend_from_slice(&(seg.len() as u64).to_le_bytes());
            out.extend_from_slice(seg);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { data: bytes, pos: 0 };
        if r.take(5)? != STREAM_MAGIC {
            return Err(corrupt(0, "missing PQBS1 magic"));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != STREAM_VERSION {
            return Err(corrupt(5, format!("unsupported stream version {version}")));
        }
        let mode_at = r.pos;
        let mode = CodecMode::from_code(r.take(1)?[0]).ok_or_else(|| corrupt(mode_at, "unknown codec mode"))?;
        let n = u32::from_le_bytes(r.array()?);
        let k = u32::from_le_bytes(r.array()?);
        let total_rate = f64::from_le_bytes(r.array()?);
        let count = u64::from_le_bytes(r.array()?);
        let tau = Tau::from_code(u32::from_le_bytes(r.array()?));
        let checksum = u64::from_le_bytes(r.array()?);
        let level = f64::from_le_bytes(r.array()?);
        if n == 0 || k == 0 {
            return Err(corrupt(mode_at + 1, "zero dimension or component count"));
        }
        let labels = r.segment()?.to_vec();
        let coefficients = r.segment()?.to_vec();
        if r.pos != bytes.len() {
            return Err(corrupt(r.pos, format!("{} trailing bytes after the coefficient segment", bytes.len() - r.pos)));
        }
        Ok(Self {
            header: StreamHeader { mode, n, k, total_rate, count, tau, checksum, level },
            labels,
            coefficients,
        })
    }

    /// Byte offset of the label payload within the serialized stream.
    pub fn label_offset(&self) -> usize {
        HEADER_LEN + 8
    }

    /// Byte offset of the coefficient payload within the serialized stream.
    pub fn coefficient_offset(&self) -> usize {
        HEADER_LEN + 16 + self.labels.len()
    }

    pub fn byte_len(&self) -> usize {
        HEADER_LEN + 16 + self.labels.len() + self.coefficients.len()
    }

    fn per_dim(&self, bytes: usize) -> f64 {
        let dims = self.header.count as f64 * self.header.n as f64;
        if dims == 0.0 {
            0.0
        } else {
            8.0 * bytes as f64 / dims
        }
    }

    /// Label payload in bits per source dimension.
    pub fn label_bits_per_dim(&self) -> f64 {
        self.per_dim(self.labels.len())
    }

    /// Coefficient payload in bits per source dimension.
    pub fn coefficient_bits_per_dim(&self) -> f64 {
        self.per_dim(self.coefficients.len())
    }

    /// Both payloads in bits per source dimension; the fixed header is excluded.
    pub fn payload_bits_per_dim(&self) -> f64 {
        self.per_dim(self.labels.len() + self.coefficients.len())
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < len {
            return Err(corrupt(
                self.data.len(),
                format!("stream truncated: need {len} bytes at offset {}", self.pos),
            ));
        }
        let s = &self.data[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn segment(&mut self) -> Result<&'a [u8]> {
        let at = self.pos;
        let len = u64::from_le_bytes(self.array()?);
        let len = usize::try_from(len).map_err(|_| corrupt(at, "segment length overflows"))?;
        self.take(len)
    }
}

impl From<Bitstream> for Vec<u8> {
    fn from(b: Bitstream) -> Self {
        b.to_bytes()
    }
}

impl TryFrom<&[u8]> for Bitstream {
    type Error = Error;

    fn try_from(bytes: &[u8]) -> Result<Self> {
        Self::from_bytes(bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Bitstream {
        Bitstream {
            header: StreamHeader {
                mode: CodecMode::PrismMap,
                n: 3,
                k: 2,
                total_rate: 1.5,
                count: 7,
                tau: Tau::Finite(1),
                checksum: 0xdead_beef_0102_0304,
                level: 0.25,
            },
            labels: vec![1, 2, 3],
            coefficients: vec![9; 10],
        }
    }

    #[test]
    fn layout_is_fixed() {
        let b = sample();
        let bytes = b.to_bytes();
        assert_eq!(bytes.len(), 52 + 8 + 3 + 8 + 10);
        assert_eq!(&bytes[..5], b"PQBS1");
        assert_eq!(&bytes[5..7], &[1, 0]);
        assert_eq!(bytes[7], 0);
        assert_eq!(&bytes[8..12], &[3, 0, 0, 0]);
        assert_eq!(&bytes[16..24], &1.5f64.to_le_bytes());
        assert_eq!(&bytes[32..36], &[1, 0, 0, 0]);
        assert_eq!(&bytes[44..52], &0.25f64.to_le_bytes());
        assert_eq!(&bytes[52..60], &3u64.to_le_bytes());
        assert_eq!(b.coefficient_offset(), 52 + 8 + 3 + 8);
        assert_eq!(Bitstream::from_bytes(&bytes).unwrap(), b);
    }

    #[test]
    fn unbounded_tau_is_zero() {
        let mut b = sample();
        b.header.tau = Tau::Infinite;
        let bytes = b.to_bytes();
        assert_eq!(&bytes[32..36], &[0, 0, 0, 0]);
        assert_eq!(Bitstream::from_bytes(&bytes).unwrap().header.tau, Tau::Infinite);
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = sample().to_bytes();
        for cut in [0, 4, 30, 55, bytes.len() - 1] {
            match Bitstream::from_bytes(&bytes[..cut]) {
                Err(Error::CorruptStream { offset, .. }) => assert!(offset <= cut),
                other => panic!("cut {cut}: {other:?}"),
            }
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(Bitstream::from_bytes(&long).is_err());
    }
}
