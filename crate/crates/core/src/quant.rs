//! Quantization codes plus sparse outliers: the hand-off between predictors
//! and lossless codecs.

use thiserror::Error;

use crate::field::Dims;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantError {
    #[error("code {code} at index {index} is outside [0, {alphabet})")]
    CodeOutOfRange {
        index: usize,
        code: u32,
        alphabet: u64,
    },
    #[error("{codes} codes for dims {dims} ({expected} elements)")]
    LengthMismatch {
        codes: usize,
        dims: Dims,
        expected: usize,
    },
    #[error("outlier index {index} is out of order or out of bounds")]
    BadOutlierIndex { index: usize },
    #[error("outlier at index {index} has code {code}, expected the center symbol")]
    OutlierNotCentered { index: usize, code: u32 },
    #[error("radius must be positive")]
    ZeroRadius,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outlier {
    pub index: usize,
    pub value: f32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantOutput {
    pub codes: Vec<u32>,
    pub radius: u32,
    pub outliers: Vec<Outlier>,
    pub dims: Dims,
}

impl QuantOutput {
    pub fn alphabet(&self) -> usize {
        2 * self.radius as usize
    }

    /// O(n) check of every structural invariant.
    pub fn validate(&self) -> Result<(), QuantError> {
        if self.radius == 0 {
            return Err(QuantError::ZeroRadius);
        }
        if self.codes.len() != self.dims.len() {
            return Err(QuantError::LengthMismatch {
                codes: self.codes.len(),
                dims: self.dims,
                expected: self.dims.len(),
            });
        }
        check_codes(&self.codes, self.radius)?;
        let mut prev: Option<usize> = None;
        for o in &self.outliers {
            if o.index >= self.codes.len() || prev.is_some_and(|p| p >= o.index) {
                return Err(QuantError::BadOutlierIndex { index: o.index });
            }
            if self.codes[o.index] != self.radius {
                return Err(QuantError::OutlierNotCentered {
                    index: o.index,
                    code: self.codes[o.index],
                });
            }
            prev = Some(o.index);
        }
        Ok(())
    }
}

pub fn check_codes(codes: &[u32], radius: u32) -> Result<(), QuantError> {
    let alphabet = 2 * radius as u64;
    match codes.iter().position(|&c| c as u64 >= alphabet) {
        Some(index) => Err(QuantError::CodeOutOfRange {
            index,
            code: codes[index],
            alphabet,
        }),
        None => Ok(()),
    }
}

/// Outcome of quantizing one residual.
pub(crate) enum Quantized {
    /// Stored code (offset by radius) and the value the decoder will rebuild.
    Code(u32, f32),
    Outlier,
}

/// Shared quantizer: round-half-away-from-zero of `(value - pred) / 2eb`.
///
/// The reconstructed value is rounded to f32 and re-checked against the bound,
/// so any point whose f32 reconstruction would miss the bound becomes an
/// outlier instead.
#[inline]
pub(crate) fn quantize(value: f32, pred: f64, eb_abs: f64, radius: u32) -> Quantized {
    let v = value as f64;
    let scaled = (v - pred) / (2.0 * eb_abs);
    let r = radius as f64;
    // Written negated so a NaN residual also lands here.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(scaled.abs() < r) {
        return Quantized::Outlier;
    }
    let code = scaled.round();
    if code.abs() >= r {
        return Quantized::Outlier;
    }
    let recon = dequantize(pred, eb_abs, code as i64);
    if ((recon as f64) - v).abs() > eb_abs {
        return Quantized::Outlier;
    }
    Quantized::Code((code as i64 + radius as i64) as u32, recon)
}

#[inline]
pub(crate) fn dequantize(pred: f64, eb_abs: f64, signed_code: i64) -> f32 {
    (pred + 2.0 * eb_abs * signed_code as f64) as f32
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(codes: Vec<u32>, outliers: Vec<Outlier>) -> QuantOutput {
        QuantOutput {
            dims: Dims::d1(codes.len()).unwrap(),
            codes,
            radius: 4,
            outliers,
        }
    }

    #[test]
    fn validate_catches_each_violation() {
        assert!(q(vec![4, 5, 0, 7], vec![]).validate().is_ok());
        assert!(matches!(
            q(vec![4, 8], vec![]).validate(),
            Err(QuantError::CodeOutOfRange { index: 1, .. })
        ));
        let o = |index| Outlier { index, value: 1.0 };
        assert!(q(vec![4, 4, 4], vec![o(0), o(2)]).validate().is_ok());
        assert!(matches!(
            q(vec![4, 4, 4], vec![o(2), o(0)]).validate(),
            Err(QuantError::BadOutlierIndex { index: 0 })
        ));
        assert!(matches!(
            q(vec![4, 4, 4], vec![o(3)]).validate(),
            Err(QuantError::BadOutlierIndex { index: 3 })
        ));
        assert!(matches!(
            q(vec![4, 5], vec![o(1)]).validate(),
            Err(QuantError::OutlierNotCentered { index: 1, code: 5 })
        ));
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        // residual of exactly +-1 half-step
        match quantize(1.0, 0.0, 1.0, 512) {
            Quantized::Code(c, r) => {
                assert_eq!(c, 513);
                assert_eq!(r, 2.0);
            }
            Quantized::Outlier => panic!(),
        }
        match quantize(-1.0, 0.0, 1.0, 512) {
            Quantized::Code(c, _) => assert_eq!(c, 511),
            Quantized::Outlier => panic!(),
        }
    }
}
