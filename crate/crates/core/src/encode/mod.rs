//! Lossless stages: histograms, Huffman, bitshuffle, secondary codecs.

mod bitshuffle;
mod histogram;
mod huffman;
mod secondary;

pub use bitshuffle::{
    bitshuffle_decode, bitshuffle_encode, block_count, BitshuffleEncoded, BITMAP_BYTES_PER_BLOCK,
    BLOCK_CODES, CODE_WIDTH, MAX_RADIUS as BITSHUFFLE_MAX_RADIUS, WORDS_PER_BLOCK,
};
pub use histogram::{histogram_exact, histogram_topk, Histogram, DEFAULT_TOPK, SAMPLE_STRIDE};
pub use huffman::{
    huffman_decode, huffman_encode, package_merge, HuffmanCodebook, HuffmanEncoded, MAX_CODE_LEN,
};
pub use secondary::{
    read_varint, secondary_decode, secondary_encode, write_varint, SecondaryCodec,
    SecondaryRegistry, ZeroRle, ZERO_RLE_ID,
};

use thiserror::Error;

use crate::quant::QuantError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodeError {
    #[error("code {code} at index {index} is outside [0, {alphabet})")]
    CodeOutOfRange {
        index: usize,
        code: u32,
        alphabet: u64,
    },
    #[error("top-k needs 1 <= k <= {alphabet}, got {k}")]
    InvalidTopK { k: usize, alphabet: usize },
    #[error("histogram does not describe the codes being encoded")]
    HistogramMismatch,
    #[error("invalid codebook: {0}")]
    InvalidCodebook(&'static str),
    #[error("corrupt stream: {0}")]
    CorruptStream(&'static str),
    #[error("stream ended before all symbols were decoded")]
    Truncated,
    #[error("radius {0} does not fit 16-bit bitshuffle codes")]
    RadiusTooLarge(u32),
    #[error("bitmap population does not match payload length")]
    BitmapPayloadMismatch,
    #[error("unknown secondary codec id {0}")]
    UnknownCodec(u8),
    #[error("secondary codec id {0} already registered")]
    DuplicateCodec(u8),
    #[error("corrupt secondary payload: {0}")]
    CorruptPayload(&'static str),
}

impl From<QuantError> for EncodeError {
    fn from(e: QuantError) -> Self {
        match e {
            QuantError::CodeOutOfRange {
                index,
                code,
                alphabet,
            } => EncodeError::CodeOutOfRange {
                index,
                code,
                alphabet,
            },
            _ => EncodeError::HistogramMismatch,
        }
    }
}
