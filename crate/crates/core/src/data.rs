//! Raw field I/O and deterministic synthetic generators.
//!
//! Raw files are headerless little-endian `f32`, row-major, with extents
//! supplied out of band (the SDRBench convention).
//!
//! All randomness comes from SplitMix64:
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! return z ^ (z >> 31)
//! ```
//!
//! and uniform doubles in `[0, 1)` are `(next() >> 11) * 2^-53`.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::field::{Dims, Field, FieldError};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("file holds {actual} bytes but dims {dims} need {expected}")]
    SizeMismatch {
        dims: Dims,
        expected: u64,
        actual: u64,
    },
    #[error("non-finite value {value} at index {index}")]
    NonFiniteValue { index: usize, value: f32 },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("bad generator parameters: {0}")]
    BadParams(String),
}

fn io_err(path: &Path, source: io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_raw_f32(path: impl AsRef<Path>, dims: Dims) -> Result<Field, DataError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    field_from_le_bytes(&bytes, dims)
}

pub fn field_from_le_bytes(bytes: &[u8], dims: Dims) -> Result<Field, DataError> {
    let expected = 4 * dims.len() as u64;
    if bytes.len() as u64 != expected {
        return Err(DataError::SizeMismatch {
            dims,
            expected,
            actual: bytes.len() as u64,
        });
    }
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Field::new(dims, data).map_err(|e| match e {
        FieldError::NonFinite { index, value } => DataError::NonFiniteValue { index, value },
        other => DataError::BadParams(other.to_string()),
    })
}

pub fn field_to_le_bytes(field: &Field) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 * field.len());
    for v in field.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_raw_f32(field: &Field, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    fs::write(path, field_to_le_bytes(field)).map_err(|e| io_err(path, e))
}

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SyntheticKind {
    /// Sum of low-frequency separable sinusoids.
    SmoothTrig,
    /// Uniform noise in [-1, 1) smoothed by a box filter of odd width.
    FilteredNoise,
    /// Random constant values on a grid of cubic blocks.
    PiecewiseConstant,
    /// Jittered, mostly increasing 1-D coordinates.
    ParticleLike1D,
}

impl SyntheticKind {
    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::SmoothTrig => "smooth-trig",
            SyntheticKind::FilteredNoise => "filtered-noise",
            SyntheticKind::PiecewiseConstant => "piecewise-constant",
            SyntheticKind::ParticleLike1D => "particle-1d",
        }
    }
}

impl FromStr for SyntheticKind {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "smooth-trig" | "smooth" => SyntheticKind::SmoothTrig,
            "filtered-noise" | "noise" => SyntheticKind::FilteredNoise,
            "piecewise-constant" | "piecewise" => SyntheticKind::PiecewiseConstant,
            "particle-1d" | "particle" => SyntheticKind::ParticleLike1D,
            other => return Err(DataError::BadParams(format!("unknown kind {other:?}"))),
        })
    }
}

/// Full description of a synthetic field; equal specs give identical bytes.
///
/// Parameters (all optional):
///
/// | kind | key | default |
/// |------|-----|---------|
/// | smooth-trig | `terms` | 4 |
/// | smooth-trig | `max_freq` (cycles per domain) | 3 |
/// | filtered-noise | `width` (odd) | 5 |
/// | piecewise-constant | `block` | 8 |
/// | particle-1d | `jitter` (fraction of spacing) | 0.4 |
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub dims: Dims,
    pub seed: u64,
    pub params: BTreeMap<String, f64>,
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, dims: Dims, seed: u64) -> Self {
        Self {
            kind,
            dims,
            seed,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    fn param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), DataError> {
        match self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(DataError::BadParams(format!(
                "parameter {k:?} does not apply to {}",
                self.kind.name()
            ))),
            None => Ok(()),
        }
    }
}

/// Parses `kind:dims[:seed[:key=value,...]]`, e.g. `smooth-trig:64x64x64:7`.
impl FromStr for SyntheticSpec {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(':');
        let kind: SyntheticKind = parts.next().unwrap_or("").parse()?;
        let dims: Dims = parts
            .next()
            .ok_or_else(|| DataError::BadParams(format!("{s:?} has no dims")))?
            .parse()
            .map_err(|e: FieldError| DataError::BadParams(e.to_string()))?;
        let seed = match parts.next() {
            Some(p) => p
                .parse()
                .map_err(|_| DataError::BadParams(format!("bad seed {p:?}")))?,
            None => 0,
        };
        let mut spec = SyntheticSpec::new(kind, dims, seed);
        if let Some(kv) = parts.next() {
            for pair in kv.split(',').filter(|p| !p.is_empty()) {
                let (k, v) = parse_param(pair)?;
                spec.params.insert(k, v);
            }
        }
        if parts.next().is_some() {
            return Err(DataError::BadParams(format!(
                "too many ':' fields in {s:?}"
            )));
        }
        Ok(spec)
    }
}

pub fn parse_param(pair: &str) -> Result<(String, f64), DataError> {
    let (k, v) = pair
        .split_once('=')
        .ok_or_else(|| DataError::BadParams(format!("expected key=value, got {pair:?}")))?;
    let v: f64 = v
        .parse()
        .map_err(|_| DataError::BadParams(format!("bad value in {pair:?}")))?;
    Ok((k.trim().to_string(), v))
}

pub fn generate(spec: &SyntheticSpec) -> Result<Field, DataError> {
    let data = match spec.kind {
        SyntheticKind::SmoothTrig => smooth_trig(spec)?,
        SyntheticKind::FilteredNoise => filtered_noise(spec)?,
        SyntheticKind::PiecewiseConstant => piecewise_constant(spec)?,
        SyntheticKind::ParticleLike1D => particle_1d(spec)?,
    };
    Field::new(spec.dims, data).map_err(|e| DataError::BadParams(e.to_string()))
}

fn smooth_trig(spec: &SyntheticSpec) -> Result<Vec<f32>, DataError> {
    spec.check_keys(&["terms", "max_freq"])?;
    let terms = spec.param("terms", 4.0);
    let max_freq = spec.param("max_freq", 3.0);
    if !((1.0..=64.0).contains(&terms) && max_freq > 0.0 && max_freq.is_finite()) {
        return Err(DataError::BadParams("terms in 1..=64, max_freq > 0".into()));
    }
    let mut rng = SplitMix64::new(spec.seed);
    let nd = spec.dims.ndim();
    // (amplitude, per-dim (frequency, phase))
    let waves: Vec<(f64, Vec<(f64, f64)>)> = (0..terms as usize)
        .map(|t| {
            let amp = (0.5 + rng.next_f64()) / (1.0 + t as f64);
            let fp = (0..nd)
                .map(|_| {
                    let freq = 0.25 + rng.next_f64() * (max_freq - 0.25).max(0.0);
                    (freq, rng.next_f64() * std::f64::consts::TAU)
                })
                .collect();
            (amp, fp)
        })
        .collect();
    // separable: tables[t][d][c] = sin(phase of wave t along dim d at coord c)
    let ext = spec.dims.as_slice().to_vec();
    let tables: Vec<Vec<Vec<f64>>> = waves
        .iter()
        .map(|(_, fp)| {
            (0..nd)
                .map(|d| {
                    (0..ext[d])
                        .map(|c| {
                            let x = c as f64 / ext[d] as f64;
                            (std::f64::consts::TAU * fp[d].0 * x + fp[d].1).sin()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(spec.dims.len());
    let [n0, n1, n2] = spec.dims.padded();
    for i in 0..n0 {
        for j in 0..n1 {
            for k in 0..n2 {
                let idx = [i, j, k];
                let mut v = 0.0f64;
                for ((amp, _), tab) in waves.iter().zip(&tables) {
                    let mut term = *amp;
                    for d in 0..nd {
                        term *= tab[d][idx[d]];
                    }
                    v += term;
                }
                out.push(v as f32);
            }
        }
    }
    Ok(out)
}

fn filtered_noise(spec: &SyntheticSpec) -> Result<Vec<f32>, DataError> {
    spec.check_keys(&["width"])?;
    let width = spec.param("width", 5.0);
    if !(width >= 1.0 && width.fract() == 0.0 && (width as usize) % 2 == 1) {
        return Err(DataError::BadParams(format!(
            "width must be an odd integer >= 1, got {width}"
        )));
    }
    let half = (width as usize) / 2;
    let mut rng = SplitMix64::new(spec.seed);
    let mut buf: Vec<f64> = (0..spec.dims.len())
        .map(|_| 2.0 * rng.next_f64() - 1.0)
        .collect();
    if half > 0 {
        let [n0, n1, n2] = spec.dims.padded();
        let ext = [n0, n1, n2];
        let strides = [n1 * n2, n2, 1];
        for d in 0..spec.dims.ndim() {
            let mut next = vec![0.0f64; buf.len()];
            for (idx, slot) in next.iter_mut().enumerate() {
                let coord = (idx / strides[d]) % ext[d];
                let lo = coord.saturating_sub(half);
                let hi = (coord + half).min(ext[d] - 1);
                let base = idx - coord * strides[d];
                let sum: f64 = (lo..=hi).map(|c| buf[base + c * strides[d]]).sum();
                *slot = sum / (hi - lo + 1) as f64;
            }
            buf = next;
        }
    }
    Ok(buf.into_iter().map(|v| v as f32).collect())
}

fn piecewise_constant(spec: &SyntheticSpec) -> Result<Vec<f32>, DataError> {
    spec.check_keys(&["block"])?;
    let block = spec.param("block", 8.0);
    if !(block >= 1.0 && block.fract() == 0.0) {
        return Err(DataError::BadParams(
            "block must be a positive integer".into(),
        ));
    }
    let block = block as usize;
    let [n0, n1, n2] = spec.dims.padded();
    let nb = [n0.div_ceil(block), n1.div_ceil(block), n2.div_ceil(block)];
    let mut rng = SplitMix64::new(spec.seed);
    let levels: Vec<f32> = (0..nb[0] * nb[1] * nb[2])
        .map(|_| (rng.next_f64() * 100.0).floor() as f32 / 4.0)
        .collect();
    let mut out = Vec::with_capacity(spec.dims.len());
    for i in 0..n0 {
        for j in 0..n1 {
            for k in 0..n2 {
                let b = (i / block) * nb[1] * nb[2] + (j / block) * nb[2] + k / block;
                out.push(levels[b]);
            }
        }
    }
    Ok(out)
}

fn particle_1d(spec: &SyntheticSpec) -> Result<Vec<f32>, DataError> {
    spec.check_keys(&["jitter"])?;
    if spec.dims.ndim() != 1 {
        return Err(DataError::BadParams("particle-1d fields are 1-D".into()));
    }
    let jitter = spec.param("jitter", 0.4);
    if !(0.0..=10.0).contains(&jitter) {
        return Err(DataError::BadParams("jitter must be in [0, 10]".into()));
    }
    let n = spec.dims.len();
    let box_len = 256.0f64;
    let spacing = box_len / n as f64;
    let mut rng = SplitMix64::new(spec.seed);
    Ok((0..n)
        .map(|i| ((i as f64 + jitter * (rng.next_f64() - 0.5)) * spacing) as f32)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // first outputs for seed 0, as published with the algorithm
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xe220a8397b1dcdaf);
        assert_eq!(r.next_u64(), 0x6e789e6aa1b965f4);
        assert_eq!(r.next_u64(), 0x06c45d188009454f);
    }

    #[test]
    fn raw_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.raw");
        let f = Field::new(Dims::d1(2).unwrap(), vec![1.5, -2.25]).unwrap();
        write_raw_f32(&f, &path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 8);
        assert_eq!(read_raw_f32(&path, Dims::d1(2).unwrap()).unwrap(), f);

        fs::write(&path, [0u8; 9]).unwrap();
        assert!(matches!(
            read_raw_f32(&path, Dims::d1(2).unwrap()),
            Err(DataError::SizeMismatch {
                expected: 8,
                actual: 9,
                ..
            })
        ));

        let mut bytes = field_to_le_bytes(&Field::new(Dims::d1(3).unwrap(), vec![0.0; 3]).unwrap());
        bytes[8..12].copy_from_slice(&f32::NAN.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_raw_f32(&path, Dims::d1(3).unwrap()),
            Err(DataError::NonFiniteValue { index: 2, .. })
        ));

        assert!(matches!(write_raw_f32(&f, ""), Err(DataError::Io { .. })));
    }

    #[test]
    fn generators_are_deterministic() {
        for spec in [
            SyntheticSpec::new(SyntheticKind::SmoothTrig, Dims::d3(9, 10, 11).unwrap(), 3),
            SyntheticSpec::new(SyntheticKind::FilteredNoise, Dims::d2(20, 30).unwrap(), 5),
            SyntheticSpec::new(
                SyntheticKind::PiecewiseConstant,
                Dims::d3(9, 9, 9).unwrap(),
                1,
            ),
            SyntheticSpec::new(SyntheticKind::ParticleLike1D, Dims::d1(1000).unwrap(), 8),
        ] {
            let a = field_to_le_bytes(&generate(&spec).unwrap());
            let b = field_to_le_bytes(&generate(&spec).unwrap());
            assert_eq!(a, b, "{:?}", spec.kind);
            let other = SyntheticSpec {
                seed: spec.seed + 1,
                ..spec.clone()
            };
            assert_ne!(a, field_to_le_bytes(&generate(&other).unwrap()));
        }
    }

    #[test]
    fn spec_parsing() {
        let s: SyntheticSpec = "smooth-trig:64x32:7:terms=2,max_freq=1.5".parse().unwrap();
        assert_eq!(s.kind, SyntheticKind::SmoothTrig);
        assert_eq!(s.dims, Dims::d2(64, 32).unwrap());
        assert_eq!(s.seed, 7);
        assert_eq!(s.params["terms"], 2.0);
        assert!("bogus:4".parse::<SyntheticSpec>().is_err());
        assert!("noise".parse::<SyntheticSpec>().is_err());
    }

    #[test]
    fn bad_params() {
        let d = Dims::d2(8, 8).unwrap();
        let s = SyntheticSpec::new(SyntheticKind::FilteredNoise, d, 0).with_param("width", 4.0);
        assert!(matches!(generate(&s), Err(DataError::BadParams(_))));
        let s = SyntheticSpec::new(SyntheticKind::ParticleLike1D, d, 0);
        assert!(matches!(generate(&s), Err(DataError::BadParams(_))));
        let s = SyntheticSpec::new(SyntheticKind::SmoothTrig, d, 0).with_param("width", 3.0);
        assert!(matches!(generate(&s), Err(DataError::BadParams(_))));
    }

    #[test]
    fn filter_smooths() {
        let d = Dims::d1(4096).unwrap();
        let raw = generate(
            &SyntheticSpec::new(SyntheticKind::FilteredNoise, d, 2).with_param("width", 1.0),
        )
        .unwrap();
        let smooth = generate(
            &SyntheticSpec::new(SyntheticKind::FilteredNoise, d, 2).with_param("width", 9.0),
        )
        .unwrap();
        let tv = |f: &Field| {
            f.data()
                .windows(2)
                .map(|w| (w[1] - w[0]).abs() as f64)
                .sum::<f64>()
        };
        assert!(tv(&smooth) < tv(&raw) / 3.0);
    }

    #[test]
    fn particles_are_monotone_ish() {
        let f = generate(&SyntheticSpec::new(
            SyntheticKind::ParticleLike1D,
            Dims::d1(5000).unwrap(),
            4,
        ))
        .unwrap();
        let ups = f.data().windows(2).filter(|w| w[1] > w[0]).count();
        assert!(ups > 4000);
    }
}
