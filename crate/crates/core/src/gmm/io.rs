//! `PQDICT` binary dictionary files and the lossless JSON export.
//!
//! Layout (little-endian): magic `PQDICT`, version `u16`, `K u32`, `n u32`,
//! priors, means, covariance lower triangles, eigenvalues, row-major
//! eigenvector matrices (all `f64`), then a `u64` checksum of everything before it.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::MixtureDictionary;
use crate::error::{Error, Result};
use crate::linalg::{EigenDecomposition, SymMatrix};

pub const DICT_MAGIC: &[u8; 6] = b"PQDICT";
pub const DICT_VERSION: u16 = 1;

/// First eight bytes of SHA-256, read little-endian.
pub(crate) fn checksum64(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < len {
            return Err(Error::Format(format!(
                "dictionary file truncated at byte {} (need {len} more bytes)",
                self.pos
            )));
        }
        let s = &self.data[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = self.take(count.checked_mul(8).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }
}

#[derive(Serialize, Deserialize)]
struct DictionaryJson {
    format: String,
    version: u16,
    k: usize,
    n: usize,
    priors: Vec<f64>,
    means: Vec<Vec<f64>>,
    /// Packed lower triangles.
    covariances: Vec<Vec<f64>>,
    eigenvalues: Vec<Vec<f64>>,
    /// Row-major eigenvector matrices; column `i` pairs with `eigenvalues[c][i]`.
    eigenvectors: Vec<Vec<f64>>,
}

impl MixtureDictionary {
    fn payload(&self) -> Vec<u8> {
        let (k, n) = (self.k(), self.n());
        let mut out = Vec::with_capacity(16 + 8 * k * (1 + n + n * (n + 1) / 2 + n + n * n));
        out.extend_from_slice(DICT_MAGIC);
        out.extend_from_slice(&DICT_VERSION.to_le_bytes());
        out.extend_from_slice(&(k as u32).to_le_bytes());
        out.extend_from_slice(&(n as u32).to_le_bytes());
        let mut put = |vals: &[f64]| vals.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        put(&self.priors);
        self.means.iter().for_each(|m| put(m));
        self.covariances.iter().for_each(|c| put(&c.lower()));
        self.eigs.iter().for_each(|e| put(&e.eigvals));
        self.eigs.iter().for_each(|e| put(&e.basis));
        out
    }

    /// Content checksum carried in the `PQDICT` trailer and in every bitstream header.
    pub fn checksum(&self) -> u64 {
        checksum64(&self.payload())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.payload();
        let sum = checksum64(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < DICT_MAGIC.len() + 2 + 8 + 8 {
            return Err(Error::Format("dictionary file too short".into()));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(trailer.try_into().unwrap());
        let mut cur = Cursor { data: body, pos: 0 };
        if cur.take(6)? != DICT_MAGIC {
            return Err(Error::Format("missing PQDICT magic".into()));
        }
        let version = cur.u16()?;
        if version != DICT_VERSION {
            return Err(Error::Format(format!("unsupported dictionary version {version}")));
        }
        let k = cur.u32()? as usize;
        let n = cur.u32()? as usize;
        if k == 0 || n == 0 {
            return Err(Error::Format("dictionary with zero components or dimension".into()));
        }
        let expected = 6 + 2 + 8 + 8 * k * (1 + n + n * (n + 1) / 2 + n + n * n);
        if body.len() != expected {
            return Err(Error::Format(format!(
                "dictionary body is {} bytes, header implies {expected}",
                body.len()
            )));
        }
        let computed = checksum64(body);
        if computed != stored {
            return Err(Error::Format(format!(
                "dictionary checksum mismatch (stored {stored:016x}, computed {computed:016x})"
            )));
        }
        let priors = cur.f64s(k)?;
        let means = (0..k).map(|_| cur.f64s(n)).collect::<Result<Vec<_>>>()?;
        let covs = (0..k)
            .map(|_| SymMatrix::from_lower(n, &cur.f64s(n * (n + 1) / 2)?))
            .collect::<Result<Vec<_>>>()?;
        let vals = (0..k).map(|_| cur.f64s(n)).collect::<Result<Vec<_>>>()?;
        let eigs = vals
            .into_iter()
            .map(|eigvals| Ok(EigenDecomposition { eigvals, basis: cur.f64s(n * n)? }))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(priors, means, covs, eigs)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = DictionaryJson {
            format: "PQDICT".into(),
            version: DICT_VERSION,
            k: self.k(),
            n: self.n(),
            priors: self.priors.clone(),
            means: self.means.clone(),
            covariances: self.covariances.iter().map(SymMatrix::lower).collect(),
            eigenvalues: self.eigs.iter().map(|e| e.eigvals.clone()).collect(),
            eigenvectors: self.eigs.iter().map(|e| e.basis.clone()).collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DictionaryJson = serde_json::from_str(text)?;
        if doc.format != "PQDICT" || doc.version != DICT_VERSION {
            return Err(Error::Format(format!("unsupported JSON dictionary {} v{}", doc.format, doc.version)));
        }
        let covs = doc
            .covariances
            .iter()
            .map(|l| SymMatrix::from_lower(doc.n, l))
            .collect::<Result<Vec<_>>>()?;
        let eigs = doc
            .eigenvalues
            .into_iter()
            .zip(doc.eigenvectors)
            .map(|(eigvals, basis)| EigenDecomposition { eigvals, basis })
            .collect();
        if doc.priors.len() != doc.k {
            return Err(Error::Format("prior count differs from k".into()));
        }
        Self::from_parts(doc.priors, doc.means, covs, eigs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dict() -> MixtureDictionary {
        MixtureDictionary::new(
            vec![0.25, 0.75],
            vec![vec![0.1, -0.3, 1.0 / 3.0], vec![2.0, 0.0, -1.0]],
            vec![
                SymMatrix::from_row_major(3, vec![2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 0.7]).unwrap(),
                SymMatrix::diag(&[0.5, 3.0, 1.0 / 7.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn binary_roundtrip_is_exact() {
        let d = dict();
        let bytes = d.to_bytes();
        assert_eq!(&bytes[..6], b"PQDICT");
        let back = MixtureDictionary::from_bytes(&bytes).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.checksum(), d.checksum());
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let d = dict();
        let back = MixtureDictionary::from_json(&d.to_json().unwrap()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.checksum(), d.checksum());
    }

    #[test]
    fn rejects_damage() {
        let bytes = dict().to_bytes();
        let mut flipped = bytes.clone();
        flipped[40] ^= 1;
        assert!(matches!(MixtureDictionary::from_bytes(&flipped), Err(Error::Format(_))));
        assert!(matches!(
            MixtureDictionary::from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::Format(_))
        ));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(MixtureDictionary::from_bytes(&magic).is_err());
    }
}
