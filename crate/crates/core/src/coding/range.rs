//! Carry-less 32-bit range coder with static frequency tables.

use crate::error::{corrupt, Error, Result};

const TOP: u32 = 1 << 24;
const BOT: u32 = 1 << 16;
pub const MODEL_BITS: u32 = 16;
pub const MODEL_TOTAL: u32 = 1 << MODEL_BITS;

/// Integer frequency table summing to `MODEL_TOTAL`, every symbol at least 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyModel {
    /// `cum[s]..cum[s + 1]` is the interval of symbol `s`.
    cum: Vec<u32>,
}

impl FrequencyModel {
    /// Quantizes a probability vector: one count per symbol, the remaining
    /// `MODEL_TOTAL - N` split by floor and then by largest remainder
    /// (ties to the lower symbol).
    pub fn from_probabilities(probs: &[f64]) -> Result<Self> {
        let n = probs.len();
        if n == 0 || n > MODEL_TOTAL as usize / 2 {
            return Err(Error::Domain(format!("frequency model alphabet of {n} symbols")));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Domain("model probabilities must be finite and non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(Error::Domain("model probabilities sum to zero".into()));
        }
        let spare = (MODEL_TOTAL as usize - n) as f64;
        let mut freq = Vec::with_capacity(n);
        let mut rema = Vec::with_capacity(n);
        for &p in probs {
            let share = p / total * spare;
            let whole = share.floor();
            freq.push(1 + whole as u32);
            rema.push(share - whole);
        }
        let assigned: u32 = freq.iter().sum();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| rema[b].total_cmp(&rema[a]).then(a.cmp(&b)));
        for &s in order.iter().take((MODEL_TOTAL - assigned) as usize) {
            freq[s] += 1;
        }
        Self::from_frequencies(&freq)
    }

    pub fn from_frequencies(freq: &[u32]) -> Result<Self> {
        if freq.contains(&0) {
            return Err(Error::Domain("every symbol needs a nonzero frequency".into()));
        }
        let mut cum = Vec::with_capacity(freq.len() + 1);
        cum.push(0u32);
        for &f in freq {
            cum.push(cum.last().unwrap() + f);
        }
        if *cum.last().unwrap() != MODEL_TOTAL {
            return Err(Error::Domain(format!("frequencies sum to {}, expected {MODEL_TOTAL}", cum.last().unwrap())));
        }
        Ok(Self { cum })
    }

    pub fn len(&self) -> usize {
        self.cum.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn freq(&self, s: usize) -> u32 {
        self.cum[s + 1] - self.cum[s]
    }

    pub fn cumulative(&self) -> &[u32] {
        &self.cum
    }

    /// Ideal code length of `s` under this model.
    pub fn cost_bits(&self, s: usize) -> f64 {
        MODEL_BITS as f64 - (self.freq(s) as f64).log2()
    }

    fn symbol_at(&self, target: u32) -> usize {
        self.cum.partition_point(|&c| c <= target) - 1
    }
}

#[derive(Debug, Clone)]
pub struct RangeEncoder {
    low: u32,
    range: u32,
    out: Vec<u8>,
    symbols: u64,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        Self { low: 0, range: u32::MAX, out: Vec::new(), symbols: 0 }
    }

    pub fn encode(&mut self, model: &FrequencyModel, symbol: usize) -> Result<()> {
        if symbol >= model.len() {
            return Err(Error::Domain(format!("symbol {symbol} outside alphabet of {}", model.len())));
        }
        self.range >>= MODEL_BITS;
        self.low = self.low.wrapping_add(model.cum[symbol] * self.range);
        self.range *= model.freq(symbol);
        self.normalize();
        self.symbols += 1;
        Ok(())
    }

    fn normalize(&mut self) {
        loop {
            if (self.low ^ self.low.wrapping_add(self.range)) >= TOP {
                if self.range >= BOT {
                    break;
                }
                self.range = BOT - (self.low & (BOT - 1));
            }
            self.out.push((self.low >> 24) as u8);
            self.low <<= 8;
            self.range <<= 8;
        }
    }

    pub fn symbols(&self) -> u64 {
        self.symbols
    }

    /// Flushes the state. A coder that saw no symbols yields an empty payload.
    pub fn finish(mut self) -> Vec<u8> {
        if self.symbols == 0 {
            return Vec::new();
        }
        for _ in 0..4 {
            self.out.push((self.low >> 24) as u8);
            self.low <<= 8;
        }
        self.out
    }
}

#[derive(Debug, Clone)]
pub struct RangeDecoder<'a> {
    low: u32,
    range: u32,
    code: u32,
    data: &'a [u8],
    pos: usize,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(data: &'a [u8]) -> Result<Self> {
        let mut d = Self { low: 0, range: u32::MAX, code: 0, data, pos: 0 };
        for _ in 0..4 {
            d.code = (d.code << 8) | d.next_byte()? as u32;
        }
        Ok(d)
    }

    fn next_byte(&mut self) -> Result<u8> {
        let b = *self
            .data
            .get(self.pos)
            .ok_or_else(|| corrupt(self.pos, "range-coded segment ended early"))?;
        self.pos += 1;
        Ok(b)
    }

    pub fn decode(&mut self, model: &FrequencyModel) -> Result<usize> {
        self.range >>= MODEL_BITS;
        let target = self.code.wrapping_sub(self.low) / self.range;
        if target >= MODEL_TOTAL {
            return Err(corrupt(self.pos, "range decoder state out of bounds"));
        }
        let s = model.symbol_at(target);
        self.low = self.low.wrapping_add(model.cum[s] * self.range);
        self.range *= model.freq(s);
        loop {
            if (self.low ^ self.low.wrapping_add(self.range)) >= TOP {
                if self.range >= BOT {
                    break;
                }
                self.range = BOT - (self.low & (BOT - 1));
            }
            self.code = (self.code << 8) | self.next_byte()? as u32;
            self.low <<= 8;
            self.range <<= 8;
        }
        Ok(s)
    }

    pub fn bytes_consumed(&self) -> usize {
        self.pos
    }
}
