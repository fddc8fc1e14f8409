use crate::bound::ResolvedBound;
use crate::field::{Dims, Field};
use crate::quant::{check_codes, dequantize, quantize, Outlier, QuantOutput, Quantized};

use super::{scatter_outliers, PredictError, Scattered};

/// Row-major Lorenzo sweep. For every element, `step(index, prediction,
/// current)` returns the reconstructed value, which later predictions read.
/// Out-of-range neighbours contribute 0.
fn sweep(dims: Dims, recon: &mut [f32], mut step: impl FnMut(usize, f64, f32) -> f32) {
    let [n0, n1, n2] = dims.padded();
    match dims.ndim() {
        1 => {
            let mut prev = 0.0f64;
            for (i, slot) in recon.iter_mut().enumerate().take(n0) {
                let v = step(i, prev, *slot);
                *slot = v;
                prev = v as f64;
            }
        }
        2 => {
            for i in 0..n0 {
                for j in 0..n1 {
                    let idx = i * n1 + j;
                    let w = if j > 0 { recon[idx - 1] as f64 } else { 0.0 };
                    let (n, nw) = if i > 0 {
                        let up = idx - n1;
                        (
                            recon[up] as f64,
                            if j > 0 { recon[up - 1] as f64 } else { 0.0 },
                        )
                    } else {
                        (0.0, 0.0)
                    };
                    let pred = w + n - nw;
                    recon[idx] = step(idx, pred, recon[idx]);
                }
            }
        }
        _ => {
            let plane = n1 * n2;
            let at = |recon: &[f32], ok: bool, idx: usize| if ok { recon[idx] as f64 } else { 0.0 };
            for i in 0..n0 {
                for j in 0..n1 {
                    for k in 0..n2 {
                        let idx = i * plane + j * n2 + k;
                        let (hi, hj, hk) = (i > 0, j > 0, k > 0);
                        // seven preceding corner neighbours, inclusion-exclusion
                        let pred = at(recon, hk, idx.wrapping_sub(1))
                            + at(recon, hj, idx.wrapping_sub(n2))
                            + at(recon, hi, idx.wrapping_sub(plane))
                            - at(recon, hj && hk, idx.wrapping_sub(n2 + 1))
                            - at(recon, hi && hk, idx.wrapping_sub(plane + 1))
                            - at(recon, hi && hj, idx.wrapping_sub(plane + n2))
                            + at(recon, hi && hj && hk, idx.wrapping_sub(plane + n2 + 1));
                        recon[idx] = step(idx, pred, recon[idx]);
                    }
                }
            }
        }
    }
}

/// Quantizes `field` with the Lorenzo predictor and also returns the
/// encoder's internal reconstruction.
pub fn lorenzo_quantize_with_recon(
    field: &Field,
    bound: &ResolvedBound,
    radius: u32,
) -> Result<(QuantOutput, Vec<f32>), PredictError> {
    let eb = bound.eb_abs;
    if !(eb > 0.0 && eb.is_finite()) {
        return Err(PredictError::NonPositiveBound);
    }
    let data = field.data();
    let mut codes = vec![radius; data.len()];
    let mut outliers = Vec::new();
    let mut recon = vec![0.0f32; data.len()];
    sweep(field.dims(), &mut recon, |idx, pred, _| {
        let value = data[idx];
        match quantize(value, pred, eb, radius) {
            Quantized::Code(code, r) => {
                codes[idx] = code;
                r
            }
            Quantized::Outlier => {
                outliers.push(Outlier { index: idx, value });
                value
            }
        }
    });
    let q = QuantOutput {
        codes,
        radius,
        outliers,
        dims: field.dims(),
    };
    Ok((q, recon))
}

/// Lorenzo prediction + linear quantization with outliers stored verbatim.
pub fn lorenzo_quantize(
    field: &Field,
    bound: &ResolvedBound,
    radius: u32,
) -> Result<QuantOutput, PredictError> {
    lorenzo_quantize_with_recon(field, bound, radius).map(|(q, _)| q)
}

/// Inverse of [`lorenzo_quantize`].
pub fn lorenzo_reconstruct(q: &QuantOutput, bound: &ResolvedBound) -> Result<Field, PredictError> {
    q.validate()?;
    let scattered = scatter_outliers(&q.outliers, q.codes.len());
    lorenzo_reconstruct_scattered(&q.codes, q.radius, q.dims, scattered, bound)
}

/// Reconstruction sweep over a buffer whose outliers are already in place.
pub fn lorenzo_reconstruct_scattered(
    codes: &[u32],
    radius: u32,
    dims: Dims,
    scattered: Scattered,
    bound: &ResolvedBound,
) -> Result<Field, PredictError> {
    check_codes(codes, radius)?;
    if codes.len() != dims.len() || scattered.values.len() != dims.len() {
        return Err(PredictError::MalformedCodes(
            crate::quant::QuantError::LengthMismatch {
                codes: codes.len(),
                dims,
                expected: dims.len(),
            },
        ));
    }
    let eb = bound.eb_abs;
    let Scattered { mut values, fixed } = scattered;
    sweep(dims, &mut values, |idx, pred, current| {
        if fixed[idx] {
            current
        } else {
            dequantize(pred, eb, codes[idx] as i64 - radius as i64)
        }
    });
    Ok(Field::new(dims, values)?)
}
