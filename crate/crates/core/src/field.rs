//! Fields: dense 1-3D arrays of `f32` with declared extents.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Errors raised while constructing a [`Field`] or parsing [`Dims`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("a field needs between 1 and 3 dimensions, got {0}")]
    BadRank(usize),
    #[error("dimension extents must be at least 1")]
    ZeroExtent,
    #[error("dims {dims} describe {expected} elements but {actual} were supplied")]
    LengthMismatch {
        dims: Dims,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f32 },
    #[error("cannot parse dims from {0:?} (expected e.g. 512x512x512)")]
    BadDimsSyntax(String),
}

/// Extents of a field, slowest-varying first.
///
/// Unused trailing slots are stored as 1 so the fixed three-slot form can be
/// written to an archive header directly.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    extents: [usize; 3],
    ndim: u8,
}

impl Dims {
    pub fn new(extents: &[usize]) -> Result<Self, FieldError> {
        if extents.is_empty() || extents.len() > 3 {
            return Err(FieldError::BadRank(extents.len()));
        }
        if extents.contains(&0) {
            return Err(FieldError::ZeroExtent);
        }
        let mut full = [1usize; 3];
        full[..extents.len()].copy_from_slice(extents);
        Ok(Self {
            extents: full,
            ndim: extents.len() as u8,
        })
    }

    pub fn d1(n: usize) -> Result<Self, FieldError> {
        Self::new(&[n])
    }

    pub fn d2(ny: usize, nx: usize) -> Result<Self, FieldError> {
        Self::new(&[ny, nx])
    }

    pub fn d3(nz: usize, ny: usize, nx: usize) -> Result<Self, FieldError> {
        Self::new(&[nz, ny, nx])
    }

    pub fn ndim(&self) -> usize {
        self.ndim as usize
    }

    /// The declared extents (length `ndim`).
    pub fn as_slice(&self) -> &[usize] {
        &self.extents[..self.ndim as usize]
    }

    /// All three slots, with unused trailing extents equal to 1.
    pub fn padded(&self) -> [usize; 3] {
        self.extents
    }

    /// Element count.
    pub fn len(&self) -> usize {
        self.as_slice().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Debug for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dims({self})")
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.as_slice().iter().map(|e| e.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

impl FromStr for Dims {
    type Err = FieldError;

    /// Parses `512x512x512` style extents (slowest first).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FieldError::BadDimsSyntax(s.to_string());
        let extents = s
            .split(['x', 'X'])
            .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(&extents).map_err(|e| match e {
            FieldError::ZeroExtent | FieldError::BadRank(_) => bad(),
            other => other,
        })
    }
}

/// A dense row-major array of finite `f32` values.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    dims: Dims,
    data: Vec<f32>,
}

impl Field {
    /// Builds a field, rejecting length mismatches and non-finite values.
    pub fn new(dims: Dims, data: Vec<f32>) -> Result<Self, FieldError> {
        if data.len() != dims.len() {
            return Err(FieldError::LengthMismatch {
                dims,
                expected: dims.len(),
                actual: data.len(),
            });
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(FieldError::NonFinite { index, value });
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(&[usize]) -> f32) -> Result<Self, FieldError> {
        let [n0, n1, n2] = dims.padded();
        let nd = dims.ndim();
        let mut data = Vec::with_capacity(dims.len());
        for i in 0..n0 {
            for j in 0..n1 {
                for k in 0..n2 {
                    let idx = [i, j, k];
                    data.push(f(&idx[..nd]));
                }
            }
        }
        Self::new(dims, data)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Exact minimum and maximum over all elements.
    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn size_bytes(&self) -> u64 {
        4 * self.data.len() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_parse_and_display() {
        let d: Dims = "512x256x8".parse().unwrap();
        assert_eq!(d.as_slice(), &[512, 256, 8]);
        assert_eq!(d.len(), 512 * 256 * 8);
        assert_eq!(d.to_string(), "512x256x8");
        let d: Dims = "100".parse().unwrap();
        assert_eq!(d.padded(), [100, 1, 1]);
        assert!("0x4".parse::<Dims>().is_err());
        assert!("4x4x4x4".parse::<Dims>().is_err());
        assert!("ax4".parse::<Dims>().is_err());
        assert!("".parse::<Dims>().is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let d = Dims::d1(3).unwrap();
        let err = Field::new(d, vec![0.0, f32::NAN, 1.0]).unwrap_err();
        assert!(matches!(err, FieldError::NonFinite { index: 1, .. }));
        let err = Field::new(d, vec![0.0, 1.0, f32::NEG_INFINITY]).unwrap_err();
        assert!(matches!(err, FieldError::NonFinite { index: 2, .. }));
    }

    #[test]
    fn rejects_length_mismatch() {
        let d = Dims::d2(2, 2).unwrap();
        assert!(matches!(
            Field::new(d, vec![0.0; 3]),
            Err(FieldError::LengthMismatch {
                expected: 4,
                actual: 3,
                ..
            })
        ));
    }

    #[test]
    fn from_fn_is_row_major() {
        let f = Field::from_fn(Dims::d2(2, 3).unwrap(), |ix| (ix[0] * 10 + ix[1]) as f32).unwrap();
        assert_eq!(f.data(), &[0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        assert_eq!(f.min_max(), (0.0, 12.0));
    }
}
