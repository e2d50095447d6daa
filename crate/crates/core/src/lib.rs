//! PrismQuant: a Gaussian-mixture transform codec.
//!
//! A vector is labeled with its most likely mixture component, rotated into
//! that component's eigenbasis, and its coefficients are scalar-quantized at
//! rates set by reverse water-filling over the pooled eigen-spectrum.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Matrix kernels read better with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod codec;
pub mod coding;
pub mod dataset;
pub mod error;
pub mod gmm;
pub mod linalg;
pub(crate) mod par;
pub mod quantizer;
pub mod ratealloc;
pub mod sweep;
pub mod synth;

pub use codec::{
    decode_stream, encode_stream, prune_dictionary, wutc_encode_stream, Bitstream, CodecConfig, CodecMode, Tau,
};
pub use error::{Error, Result};
pub use gmm::{fit_em, EmConfig, LabeledSamples, MixtureDictionary};
pub use linalg::{sym_eig, Cholesky, EigenDecomposition, SymMatrix};
pub use quantizer::{design_ecsq, ScalarQuantizer};
pub use ratealloc::{PooledSpectrum, WaterAllocation};
pub use par::is_parallel;
pub use synth::{synth_mixture, SynthSpec};

/// Shannon entropy in bits; zero entries contribute nothing.
pub fn entropy_bits(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}
