//! Multi-level interpolation predictor.
//!
//! A coarse anchor grid (every `anchor_stride`-th index per dimension) is
//! stored verbatim. Finer points are filled level by level, halving the step
//! from `anchor_stride / 2` down to 1. Within a level, dimensions are
//! processed slowest to fastest; a point on dimension `d` is predicted from
//! its neighbours at `+-h` and `+-3h` along `d`:
//!
//! * cubic `(-1, 9, 9, -1) / 16` when all four neighbours exist,
//! * linear midpoint when only the inner pair exists,
//! * linear extrapolation `2 x[i-h] - x[i-3h]` past the upper edge,
//! * copy of `x[i-h]` when nothing else is available.

use crate::bound::ResolvedBound;
use crate::field::{Dims, Field};
use crate::quant::{check_codes, dequantize, quantize, Outlier, QuantOutput, Quantized};

use super::{scatter_outliers, PredictError, Scattered};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpConfig {
    pub anchor_stride: usize,
    pub cubic_weights: [f64; 4],
}

impl Default for InterpConfig {
    fn default() -> Self {
        Self {
            anchor_stride: 16,
            cubic_weights: [-1.0 / 16.0, 9.0 / 16.0, 9.0 / 16.0, -1.0 / 16.0],
        }
    }
}

impl InterpConfig {
    pub fn with_stride(anchor_stride: usize) -> Result<Self, PredictError> {
        let cfg = Self {
            anchor_stride,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PredictError> {
        if self.anchor_stride < 4 || !self.anchor_stride.is_power_of_two() {
            return Err(PredictError::InvalidConfig(
                "anchor_stride must be a power of two >= 4",
            ));
        }
        let sum: f64 = self.cubic_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(PredictError::InvalidConfig("cubic weights must sum to 1"));
        }
        Ok(())
    }

    /// Whether `dims` can be coded with this config (rank 2-3, every extent
    /// larger than the stride).
    pub fn check_field(&self, dims: Dims) -> Result<(), PredictError> {
        self.validate()?;
        if !(2..=3).contains(&dims.ndim()) {
            return Err(PredictError::UnsupportedRank {
                predictor: "interp",
                ndim: dims.ndim(),
            });
        }
        if dims.as_slice().iter().any(|&e| e < self.anchor_stride + 1) {
            return Err(PredictError::FieldTooSmall {
                dims,
                stride: self.anchor_stride,
            });
        }
        Ok(())
    }
}

/// Number of anchor values for `dims` at `stride`.
pub fn anchor_count(dims: Dims, stride: usize) -> usize {
    dims.as_slice()
        .iter()
        .map(|&e| (e - 1) / stride + 1)
        .product()
}

/// Quantized output of the interpolation predictor plus its anchor grid.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpOutput {
    pub quant: QuantOutput,
    /// Anchor values, little-endian f32, row-major over the anchor grid.
    pub anchors: Vec<u8>,
}

/// Extents as three slots with a leading 1 for 2-D fields, plus the first
/// slot that is a real dimension.
fn as_3d(dims: Dims) -> ([usize; 3], usize) {
    let s = dims.as_slice();
    if s.len() == 2 {
        ([1, s[0], s[1]], 1)
    } else {
        ([s[0], s[1], s[2]], 0)
    }
}

fn for_each_anchor(dims: Dims, stride: usize, mut f: impl FnMut(usize)) {
    let (n, _) = as_3d(dims);
    let strides = [n[1] * n[2], n[2], 1];
    let step = |e: usize| if n[e] == 1 { 1 } else { stride };
    for i in (0..n[0]).step_by(step(0)) {
        for j in (0..n[1]).step_by(step(1)) {
            for k in (0..n[2]).step_by(step(2)) {
                f(i * strides[0] + j * strides[1] + k * strides[2]);
            }
        }
    }
}

/// Visits every non-anchor point in the level schedule. `step(index,
/// prediction, current)` returns the reconstructed value.
fn sweep(
    dims: Dims,
    cfg: &InterpConfig,
    recon: &mut [f32],
    mut step: impl FnMut(usize, f64, f32) -> f32,
) {
    let (n, first) = as_3d(dims);
    let strides = [n[1] * n[2], n[2], 1];
    let w = cfg.cubic_weights;
    let mut h = cfg.anchor_stride / 2;
    while h >= 1 {
        for d in first..3 {
            // (start, step) per slot for this pass
            let mut range = [(0usize, 1usize); 3];
            for (e, r) in range.iter_mut().enumerate().skip(first) {
                *r = match e.cmp(&d) {
                    std::cmp::Ordering::Less => (0, h),
                    std::cmp::Ordering::Equal => (h, 2 * h),
                    std::cmp::Ordering::Greater => (0, 2 * h),
                };
            }
            let nd = n[d];
            let sd = strides[d];
            for i in (range[0].0..n[0]).step_by(range[0].1) {
                for j in (range[1].0..n[1]).step_by(range[1].1) {
                    for k in (range[2].0..n[2]).step_by(range[2].1) {
                        let coord = [i, j, k][d];
                        let idx = i * strides[0] + j * strides[1] + k * strides[2];
                        let at = |off: usize| recon[off] as f64;
                        let has_right = coord + h < nd;
                        let has_far_left = coord >= 3 * h;
                        let pred = if has_right && has_far_left && coord + 3 * h < nd {
                            w[0] * at(idx - 3 * h * sd)
                                + w[1] * at(idx - h * sd)
                                + w[2] * at(idx + h * sd)
                                + w[3] * at(idx + 3 * h * sd)
                        } else if has_right {
                            0.5 * (at(idx - h * sd) + at(idx + h * sd))
                        } else if has_far_left {
                            2.0 * at(idx - h * sd) - at(idx - 3 * h * sd)
                        } else {
                            at(idx - h * sd)
                        };
                        recon[idx] = step(idx, pred, recon[idx]);
                    }
                }
            }
        }
        h /= 2;
    }
}

/// Quantizes with the interpolation predictor and returns the encoder's
/// internal reconstruction alongside.
pub fn interp_quantize_with_recon(
    field: &Field,
    bound: &ResolvedBound,
    radius: u32,
    cfg: &InterpConfig,
) -> Result<(InterpOutput, Vec<f32>), PredictError> {
    let dims = field.dims();
    cfg.check_field(dims)?;
    let eb = bound.eb_abs;
    if !(eb > 0.0 && eb.is_finite()) {
        return Err(PredictError::NonPositiveBound);
    }
    let data = field.data();
    let mut recon = vec![0.0f32; data.len()];
    let mut anchors = Vec::with_capacity(4 * anchor_count(dims, cfg.anchor_stride));
    for_each_anchor(dims, cfg.anchor_stride, |idx| {
        recon[idx] = data[idx];
        anchors.extend_from_slice(&data[idx].to_le_bytes());
    });

    let mut codes = vec![radius; data.len()];
    let mut outliers = Vec::new();
    sweep(dims, cfg, &mut recon, |idx, pred, _| {
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
    outliers.sort_unstable_by_key(|o| o.index);
    let quant = QuantOutput {
        codes,
        radius,
        outliers,
        dims,
    };
    Ok((InterpOutput { quant, anchors }, recon))
}

pub fn interp_quantize(
    field: &Field,
    bound: &ResolvedBound,
    radius: u32,
    cfg: &InterpConfig,
) -> Result<InterpOutput, PredictError> {
    interp_quantize_with_recon(field, bound, radius, cfg).map(|(o, _)| o)
}

/// Writes the anchor grid into a scattered buffer.
pub fn scatter_anchors(
    anchors: &[u8],
    dims: Dims,
    cfg: &InterpConfig,
    into: &mut Scattered,
) -> Result<(), PredictError> {
    let expected = 4 * anchor_count(dims, cfg.anchor_stride);
    if anchors.len() != expected || into.values.len() != dims.len() {
        return Err(PredictError::AnchorSizeMismatch {
            expected,
            actual: anchors.len(),
        });
    }
    let mut chunks = anchors.chunks_exact(4);
    for_each_anchor(dims, cfg.anchor_stride, |idx| {
        let v = f32::from_le_bytes(chunks.next().unwrap().try_into().unwrap());
        into.values[idx] = v;
        into.fixed[idx] = true;
    });
    Ok(())
}

/// Inverse of [`interp_quantize`].
pub fn interp_reconstruct(
    q: &QuantOutput,
    anchors: &[u8],
    bound: &ResolvedBound,
    cfg: &InterpConfig,
) -> Result<Field, PredictError> {
    q.validate()?;
    cfg.check_field(q.dims)?;
    let mut scattered = scatter_outliers(&q.outliers, q.codes.len());
    scatter_anchors(anchors, q.dims, cfg, &mut scattered)?;
    interp_reconstruct_scattered(&q.codes, q.radius, q.dims, scattered, bound, cfg)
}

/// Reconstruction sweep over a buffer with outliers and anchors in place.
pub fn interp_reconstruct_scattered(
    codes: &[u32],
    radius: u32,
    dims: Dims,
    scattered: Scattered,
    bound: &ResolvedBound,
    cfg: &InterpConfig,
) -> Result<Field, PredictError> {
    cfg.check_field(dims)?;
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
    sweep(dims, cfg, &mut values, |idx, pred, current| {
        if fixed[idx] {
            current
        } else {
            dequantize(pred, eb, codes[idx] as i64 - radius as i64)
        }
    });
    Ok(Field::new(dims, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::lorenzo_quantize;

    fn max_err(a: &[f32], b: &[f32]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (*x as f64 - *y as f64).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn every_point_visited_once() {
        for dims in [
            Dims::d2(17, 17),
            Dims::d2(20, 33),
            Dims::d3(17, 18, 40),
            Dims::d3(23, 17, 17),
        ] {
            let dims = dims.unwrap();
            let cfg = InterpConfig::default();
            let mut visits = vec![0u32; dims.len()];
            for_each_anchor(dims, cfg.anchor_stride, |i| visits[i] += 1);
            let mut buf = vec![0.0f32; dims.len()];
            sweep(dims, &cfg, &mut buf, |i, _, c| {
                visits[i] += 1;
                c
            });
            assert!(visits.iter().all(|&v| v == 1), "{dims}");
        }
    }

    #[test]
    fn affine_data_has_zero_residuals() {
        let dims = Dims::d2(65, 65).unwrap();
        let f = Field::from_fn(dims, |ix| (2 * ix[0] + 3 * ix[1]) as f32).unwrap();
        let b = ResolvedBound::absolute(1e-3);
        let out = interp_quantize(&f, &b, 512, &InterpConfig::default()).unwrap();
        assert!(out.quant.outliers.is_empty());
        assert!(out.quant.codes.iter().all(|&c| c == 512));
        let back =
            interp_reconstruct(&out.quant, &out.anchors, &b, &InterpConfig::default()).unwrap();
        assert!(max_err(back.data(), f.data()) <= 1e-3);
        assert_eq!(out.anchors.len(), 4 * 5 * 5);
    }

    #[test]
    fn decoder_matches_encoder_bitwise() {
        let dims = Dims::d3(33, 20, 47).unwrap();
        let f = Field::from_fn(dims, |ix| {
            ((ix[0] as f32 * 0.3).sin() * (ix[1] as f32 * 0.2).cos() + ix[2] as f32 * 0.01) * 10.0
        })
        .unwrap();
        let b = ResolvedBound::absolute(1e-3);
        let cfg = InterpConfig::default();
        let (out, enc) = interp_quantize_with_recon(&f, &b, 64, &cfg).unwrap();
        let dec = interp_reconstruct(&out.quant, &out.anchors, &b, &cfg).unwrap();
        assert_eq!(
            enc.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            dec.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert!(max_err(dec.data(), f.data()) <= 1e-3);
    }

    #[test]
    fn smooth_data_peaks_higher_than_lorenzo() {
        let dims = Dims::d2(65, 65).unwrap();
        let h = std::f32::consts::TAU / 64.0;
        let f = Field::from_fn(dims, |ix| {
            (ix[0] as f32 * h).sin() * (ix[1] as f32 * h).cos()
        })
        .unwrap();
        let b = ResolvedBound::absolute(1e-4);
        let interp = interp_quantize(&f, &b, 512, &InterpConfig::default()).unwrap();
        let lorenzo = lorenzo_quantize(&f, &b, 512).unwrap();
        let zero_mass = |q: &QuantOutput| {
            let outl: std::collections::HashSet<usize> =
                q.outliers.iter().map(|o| o.index).collect();
            q.codes
                .iter()
                .enumerate()
                .filter(|(i, &c)| c == 512 && !outl.contains(i))
                .count()
        };
        assert!(zero_mass(&interp.quant) > zero_mass(&lorenzo));
    }

    #[test]
    fn truncated_anchors_rejected() {
        let dims = Dims::d2(33, 33).unwrap();
        let f = Field::from_fn(dims, |ix| (ix[0] * ix[1]) as f32).unwrap();
        let b = ResolvedBound::absolute(0.01);
        let cfg = InterpConfig::default();
        let out = interp_quantize(&f, &b, 512, &cfg).unwrap();
        let short = &out.anchors[..out.anchors.len() - 4];
        assert!(matches!(
            interp_reconstruct(&out.quant, short, &b, &cfg),
            Err(PredictError::AnchorSizeMismatch { .. })
        ));
    }

    #[test]
    fn too_small_and_wrong_rank() {
        let b = ResolvedBound::absolute(0.1);
        let cfg = InterpConfig::default();
        let f = Field::new(Dims::d2(16, 40).unwrap(), vec![0.0; 640]).unwrap();
        assert!(matches!(
            interp_quantize(&f, &b, 512, &cfg),
            Err(PredictError::FieldTooSmall { .. })
        ));
        let f = Field::new(Dims::d1(100).unwrap(), vec![0.0; 100]).unwrap();
        assert!(matches!(
            interp_quantize(&f, &b, 512, &cfg),
            Err(PredictError::UnsupportedRank { ndim: 1, .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(InterpConfig::with_stride(8).is_ok());
        assert!(InterpConfig::with_stride(2).is_err());
        assert!(InterpConfig::with_stride(12).is_err());
        let cfg = InterpConfig {
            anchor_stride: 16,
            cubic_weights: [0.0, 0.5, 0.5, 0.1],
        };
        assert!(cfg.validate().is_err());
    }
}
