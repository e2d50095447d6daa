//! Lossless layers: MSB-first bit I/O, canonical Huffman codes for component
//! labels and a carry-less range coder for quantizer indices.

pub mod bits;
pub mod huffman;
pub mod range;

pub use bits::{BitReader, BitWriter};
pub use huffman::{build_label_code, LabelCode};
pub use range::{FrequencyModel, RangeDecoder, RangeEncoder, MODEL_TOTAL};
