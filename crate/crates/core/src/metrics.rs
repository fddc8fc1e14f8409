//! Evaluation math: error statistics, PSNR, ratio/bitrate, throughput and the
//! overall-speedup model.
//!
//! GB means 10^9 bytes everywhere. PSNR is taken against the value range of
//! the original field and reported per field; a figure for a set of fields is
//! the mean of the per-field PSNR values.

use std::time::Duration;

use thiserror::Error;

use crate::field::Field;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("fields differ in shape: {0} vs {1}")]
    DimMismatch(String, String),
    #[error("compressed size is zero")]
    ZeroCompressedSize,
    #[error("element count is zero")]
    ZeroElements,
    #[error("speedup inputs must be strictly positive")]
    NonPositiveSpeedupInput,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QualityReport {
    pub max_abs_err: f64,
    pub mse: f64,
    /// `f64::INFINITY` when the reconstruction is exact.
    pub psnr_db: f64,
    pub nrmse: f64,
    pub bound_satisfied: bool,
}

/// Compares a reconstruction with the original. `eb_abs` is inclusive.
pub fn quality(orig: &Field, recon: &Field, eb_abs: f64) -> Result<QualityReport, MetricsError> {
    if orig.dims() != recon.dims() {
        return Err(MetricsError::DimMismatch(
            orig.dims().to_string(),
            recon.dims().to_string(),
        ));
    }
    let mut max_abs_err = 0.0f64;
    let mut sq = 0.0f64;
    for (&o, &r) in orig.data().iter().zip(recon.data()) {
        let d = o as f64 - r as f64;
        max_abs_err = max_abs_err.max(d.abs());
        sq += d * d;
    }
    let mse = sq / orig.len() as f64;
    let (lo, hi) = orig.min_max();
    let range = hi as f64 - lo as f64;
    let (psnr_db, nrmse) = if mse == 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        (
            20.0 * range.log10() - 10.0 * mse.log10(),
            mse.sqrt() / range,
        )
    };
    Ok(QualityReport {
        max_abs_err,
        mse,
        psnr_db,
        nrmse,
        bound_satisfied: max_abs_err <= eb_abs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateReport {
    pub cr: f64,
    pub bitrate_bits_per_value: f64,
    pub input_bytes: u64,
    pub compressed_bytes: u64,
}

pub fn rate(
    input_bytes: u64,
    compressed_bytes: u64,
    element_count: u64,
) -> Result<RateReport, MetricsError> {
    if compressed_bytes == 0 {
        return Err(MetricsError::ZeroCompressedSize);
    }
    if element_count == 0 {
        return Err(MetricsError::ZeroElements);
    }
    Ok(RateReport {
        cr: input_bytes as f64 / compressed_bytes as f64,
        bitrate_bits_per_value: 8.0 * compressed_bytes as f64 / element_count as f64,
        input_bytes,
        compressed_bytes,
    })
}

/// Inputs to the overall-speedup model. All GB/s except `cr`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeedupInputs {
    pub bw_gbps: f64,
    pub t_compr_gbps: f64,
    pub cr: f64,
}

/// `1 / (((bw * cr)^-1 + t_compr^-1) * bw)`: end-to-end gain of compressing
/// before sending over a medium of bandwidth `bw`.
pub fn overall_speedup(s: SpeedupInputs) -> Result<f64, MetricsError> {
    let ok = |v: f64| v.is_finite() && v > 0.0;
    if !(ok(s.bw_gbps) && ok(s.t_compr_gbps) && ok(s.cr)) {
        return Err(MetricsError::NonPositiveSpeedupInput);
    }
    Ok(1.0 / ((1.0 / (s.bw_gbps * s.cr) + 1.0 / s.t_compr_gbps) * s.bw_gbps))
}

/// Decimal GB per second.
pub fn throughput(bytes_processed: u64, wall_seconds: f64) -> f64 {
    bytes_processed as f64 / 1e9 / wall_seconds
}

/// Median of a set of durations (mean of the middle pair for even counts).
pub fn median_duration(samples: &[Duration]) -> Option<Duration> {
    if samples.is_empty() {
        return None;
    }
    let mut s = samples.to_vec();
    s.sort();
    let mid = s.len() / 2;
    Some(if s.len() % 2 == 1 {
        s[mid]
    } else {
        (s[mid - 1] + s[mid]) / 2
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Dims;
    use proptest::prelude::*;

    fn f(v: &[f32]) -> Field {
        Field::new(Dims::d1(v.len()).unwrap(), v.to_vec()).unwrap()
    }

    #[test]
    fn identical_fields() {
        let a = f(&[1.0, 2.0, 3.0]);
        let q = quality(&a, &a, 0.0).unwrap();
        assert_eq!(q.mse, 0.0);
        assert_eq!(q.psnr_db, f64::INFINITY);
        assert!(q.bound_satisfied);
    }

    #[test]
    fn hand_psnr() {
        let q = quality(&f(&[0.0, 1.0]), &f(&[0.5, 1.0]), 0.5).unwrap();
        assert_eq!(q.mse, 0.125);
        let direct = 20.0 * 1.0f64.log10() - 10.0 * 0.125f64.log10();
        assert!((q.psnr_db - direct).abs() < 1e-12);
        assert!((q.psnr_db - 9.0309).abs() < 1e-4);
        assert!((q.nrmse - 0.125f64.sqrt()).abs() < 1e-15);
        // bound is inclusive
        assert!(q.bound_satisfied);
        assert!(
            !quality(&f(&[0.0, 1.0]), &f(&[0.5, 1.0]), 0.4999)
                .unwrap()
                .bound_satisfied
        );
    }

    #[test]
    fn dim_mismatch() {
        let a = f(&[1.0, 2.0]);
        let b = Field::new(Dims::d2(1, 2).unwrap(), vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            quality(&a, &b, 1.0),
            Err(MetricsError::DimMismatch(..))
        ));
    }

    #[test]
    fn rate_arithmetic() {
        let r = rate(4_000_000, 200_000, 1_000_000).unwrap();
        assert_eq!(r.cr, 20.0);
        assert!((r.bitrate_bits_per_value - 1.6).abs() < 1e-12);
        let r = rate(400, 400, 100).unwrap();
        assert_eq!(r.cr, 1.0);
        assert_eq!(r.bitrate_bits_per_value, 32.0);
        assert_eq!(rate(1, 0, 1), Err(MetricsError::ZeroCompressedSize));
    }

    #[test]
    fn bitrate_from_published_ratio() {
        // a ratio of 29.9 on f32 data means 32 / 29.9 bits per value
        assert!((32.0f64 / 29.9 - 1.070).abs() < 5e-4);
    }

    #[test]
    fn speedup_examples() {
        let s = |bw, cr, t| {
            overall_speedup(SpeedupInputs {
                bw_gbps: bw,
                t_compr_gbps: t,
                cr,
            })
            .unwrap()
        };
        assert_eq!(s(100.0, 2.0, 200.0), 1.0);
        assert!((s(1.0, 1e9, 5.0) - 5.0).abs() / 5.0 < 1e-6);
        assert!((s(6.91, 4.0, 27.64) - 2.0).abs() < 1e-12);
        assert!(overall_speedup(SpeedupInputs {
            bw_gbps: 0.0,
            t_compr_gbps: 1.0,
            cr: 1.0
        })
        .is_err());
    }

    #[test]
    fn throughput_units() {
        assert_eq!(throughput(1_000_000_000, 1.0), 1.0);
        assert_eq!(throughput(500_000_000, 0.25), 2.0);
    }

    #[test]
    fn median() {
        let d = |ms| Duration::from_millis(ms);
        assert_eq!(median_duration(&[d(5), d(1), d(3)]), Some(d(3)));
        assert_eq!(
            median_duration(&[d(4), d(1), d(3), d(2)]),
            Some(Duration::from_micros(2500))
        );
        assert_eq!(median_duration(&[]), None);
    }

    proptest! {
        #[test]
        fn speedup_monotone(bw in 0.1f64..1e3, cr in 0.1f64..1e3, t in 0.1f64..1e3, k in 1.001f64..10.0) {
            let base = overall_speedup(SpeedupInputs { bw_gbps: bw, t_compr_gbps: t, cr }).unwrap();
            let more_cr = overall_speedup(SpeedupInputs { bw_gbps: bw, t_compr_gbps: t, cr: cr * k }).unwrap();
            let more_t = overall_speedup(SpeedupInputs { bw_gbps: bw, t_compr_gbps: t * k, cr }).unwrap();
            prop_assert!(more_cr > base);
            prop_assert!(more_t > base);
        }

        #[test]
        fn bitrate_times_ratio_is_32(n in 1u64..10_000_000, c in 1u64..100_000_000) {
            let r = rate(4 * n, c, n).unwrap();
            prop_assert!((r.cr * r.bitrate_bits_per_value - 32.0).abs() < 32.0 * 1e-12);
        }
    }
}
