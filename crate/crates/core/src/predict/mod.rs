//! Prediction + quantization stages and their exact inverses.
//!
//! Both predictors sweep the field in a fixed order and predict each point
//! from already *reconstructed* neighbours, so the decoder, running the same
//! sweep over the same reconstructed values, rebuilds the encoder's
//! reconstruction bit for bit.

mod interp;
mod lorenzo;

pub use interp::{
    anchor_count, interp_quantize, interp_quantize_with_recon, interp_reconstruct,
    interp_reconstruct_scattered, scatter_anchors, InterpConfig, InterpOutput,
};
pub use lorenzo::{
    lorenzo_quantize, lorenzo_quantize_with_recon, lorenzo_reconstruct,
    lorenzo_reconstruct_scattered,
};

use thiserror::Error;

use crate::field::{Dims, FieldError};
use crate::quant::{Outlier, QuantError};

pub const DEFAULT_RADIUS: u32 = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("malformed codes: {0}")]
    MalformedCodes(#[from] QuantError),
    #[error("anchor grid holds {actual} bytes, expected {expected}")]
    AnchorSizeMismatch { expected: usize, actual: usize },
    #[error("field {dims} too small for anchor stride {stride}")]
    FieldTooSmall { dims: Dims, stride: usize },
    #[error("{predictor} predictor does not support {ndim}-D fields")]
    UnsupportedRank {
        predictor: &'static str,
        ndim: usize,
    },
    #[error("invalid interpolation config: {0}")]
    InvalidConfig(&'static str),
    #[error("error bound must be positive")]
    NonPositiveBound,
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PredictorKind {
    Lorenzo,
    Interp,
}

impl PredictorKind {
    pub fn name(self) -> &'static str {
        match self {
            PredictorKind::Lorenzo => "lorenzo",
            PredictorKind::Interp => "interp",
        }
    }
}

/// Decoder-side working buffer: outliers (and, for interpolation, anchors)
/// written to their final positions before the prediction sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Scattered {
    pub values: Vec<f32>,
    pub fixed: Vec<bool>,
}

impl Scattered {
    pub fn new(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
            fixed: vec![false; len],
        }
    }
}

/// Writes each outlier's verbatim value into a fresh buffer of `len` elements.
pub fn scatter_outliers(outliers: &[Outlier], len: usize) -> Scattered {
    let mut s = Scattered::new(len);
    for o in outliers {
        if o.index < len {
            s.values[o.index] = o.value;
            s.fixed[o.index] = true;
        }
    }
    s
}
