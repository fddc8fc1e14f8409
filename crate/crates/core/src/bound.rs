//! Error-bound specification and its resolution to an absolute bound.

use thiserror::Error;

use crate::field::Field;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("error bound magnitude must be finite and > 0, got {0}")]
    InvalidMagnitude(f64),
    #[error("value-range relative bound on a constant field (min == max == {0})")]
    ZeroRange(f32),
    #[error("unknown error-bound mode {0:?} (expected abs or rel)")]
    UnknownMode(String),
}

/// How the user magnitude is interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EbMode {
    /// Magnitude is in data units.
    Absolute,
    /// Magnitude is scaled by the field's value range (max - min).
    ValueRangeRelative,
}

impl EbMode {
    pub fn to_byte(self) -> u8 {
        match self {
            EbMode::Absolute => 0,
            EbMode::ValueRangeRelative => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(EbMode::Absolute),
            1 => Some(EbMode::ValueRangeRelative),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EbMode::Absolute => "abs",
            EbMode::ValueRangeRelative => "rel",
        }
    }
}

impl std::str::FromStr for EbMode {
    type Err = BoundError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "abs" | "absolute" => Ok(EbMode::Absolute),
            "rel" | "relative" => Ok(EbMode::ValueRangeRelative),
            other => Err(BoundError::UnknownMode(other.to_string())),
        }
    }
}

/// User-facing error bound: a mode plus a strictly positive magnitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorBoundSpec {
    mode: EbMode,
    magnitude: f64,
}

impl ErrorBoundSpec {
    pub fn new(mode: EbMode, magnitude: f64) -> Result<Self, BoundError> {
        if !(magnitude.is_finite() && magnitude > 0.0) {
            return Err(BoundError::InvalidMagnitude(magnitude));
        }
        Ok(Self { mode, magnitude })
    }

    pub fn absolute(magnitude: f64) -> Result<Self, BoundError> {
        Self::new(EbMode::Absolute, magnitude)
    }

    pub fn relative(magnitude: f64) -> Result<Self, BoundError> {
        Self::new(EbMode::ValueRangeRelative, magnitude)
    }

    pub fn mode(&self) -> EbMode {
        self.mode
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }
}

/// An absolute bound in data units, together with the extrema it was derived from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolvedBound {
    pub eb_abs: f64,
    pub data_min: f32,
    pub data_max: f32,
}

impl ResolvedBound {
    /// Recomputes the absolute bound from stored header values. Compressor and
    /// decompressor both go through here so they agree bit for bit.
    pub fn from_parts(
        spec: ErrorBoundSpec,
        data_min: f32,
        data_max: f32,
    ) -> Result<Self, BoundError> {
        let eb_abs = match spec.mode {
            EbMode::Absolute => spec.magnitude,
            EbMode::ValueRangeRelative => {
                if data_max == data_min {
                    return Err(BoundError::ZeroRange(data_min));
                }
                spec.magnitude * (data_max as f64 - data_min as f64)
            }
        };
        if !(eb_abs.is_finite() && eb_abs > 0.0) {
            return Err(BoundError::InvalidMagnitude(eb_abs));
        }
        Ok(Self {
            eb_abs,
            data_min,
            data_max,
        })
    }

    /// A bound for callers that already know the absolute tolerance.
    pub fn absolute(eb_abs: f64) -> Self {
        Self {
            eb_abs,
            data_min: 0.0,
            data_max: 0.0,
        }
    }

    pub fn range(&self) -> f64 {
        self.data_max as f64 - self.data_min as f64
    }
}

/// Scans the field for its extrema and converts `spec` into an absolute bound.
pub fn resolve_bound(field: &Field, spec: ErrorBoundSpec) -> Result<ResolvedBound, BoundError> {
    let (lo, hi) = field.min_max();
    ResolvedBound::from_parts(spec, lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Dims;

    fn field(vals: &[f32]) -> Field {
        Field::new(Dims::d1(vals.len()).unwrap(), vals.to_vec()).unwrap()
    }

    #[test]
    fn relative_scales_by_range() {
        let f = field(&[0.0, 25.0, 100.0, 50.0]);
        let b = resolve_bound(&f, ErrorBoundSpec::relative(1e-2).unwrap()).unwrap();
        assert_eq!(b.eb_abs, 1.0);
        assert_eq!((b.data_min, b.data_max), (0.0, 100.0));
    }

    #[test]
    fn absolute_is_identity() {
        let f = field(&[-7.0, 3.0]);
        let b = resolve_bound(&f, ErrorBoundSpec::absolute(0.5).unwrap()).unwrap();
        assert_eq!(b.eb_abs, 0.5);
    }

    #[test]
    fn nyx_like_range() {
        // values spanning [-3.2, 4.8]; oracle is a direct scan of the data
        let vals: Vec<f32> = (0..1000)
            .map(|i| -3.2 + 8.0 * ((i * 7919) % 1000) as f32 / 999.0)
            .chain([-3.2f32, 4.8])
            .map(|v| v.clamp(-3.2, 4.8))
            .collect();
        let f = field(&vals);
        let mut lo = f32::MAX;
        let mut hi = f32::MIN;
        for &v in &vals {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        let b = resolve_bound(&f, ErrorBoundSpec::relative(1e-4).unwrap()).unwrap();
        assert_eq!(b.eb_abs, 1e-4 * (hi as f64 - lo as f64));
        assert!((b.eb_abs - 8.0e-4).abs() < 1e-9);
    }

    #[test]
    fn constant_field_relative_is_zero_range() {
        let f = field(&[2.5; 16]);
        assert_eq!(
            resolve_bound(&f, ErrorBoundSpec::relative(1e-3).unwrap()),
            Err(BoundError::ZeroRange(2.5))
        );
        assert!(resolve_bound(&f, ErrorBoundSpec::absolute(1e-3).unwrap()).is_ok());
    }

    #[test]
    fn magnitude_must_be_positive() {
        assert!(ErrorBoundSpec::relative(0.0).is_err());
        assert!(ErrorBoundSpec::absolute(-1.0).is_err());
        assert!(ErrorBoundSpec::absolute(f64::NAN).is_err());
    }
}
