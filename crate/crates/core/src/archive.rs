//! Self-describing compressed container.
//!
//! Layout (little-endian, byte offsets):
//!
//! ```text
//!  0..4   magic "FZM1"
//!  4      version (1)
//!  5      pipeline id (0 default, 1 speed, 2 quality, >=128 user-registered)
//!  6      error-bound mode (0 abs, 1 rel)
//!  7      ndim
//!  8..16  error-bound magnitude, f64
//! 16..20  data min, f32
//! 20..24  data max, f32
//! 24..36  dims, 3 x u32 (slowest first, unused trailing extents = 1)
//! 36..40  radius, u32
//! 40      segment count, u8
//! 41..    segment table: per segment kind u8 + byte length u64
//!         then the payloads, concatenated in table order
//! ```

use thiserror::Error;

use crate::bound::EbMode;
use crate::field::Dims;

pub const MAGIC: [u8; 4] = *b"FZM1";
pub const VERSION: u8 = 1;
/// Fixed header size, up to and including the segment count byte.
pub const HEADER_LEN: usize = 41;
/// Size of one segment-table entry (kind + u64 length).
pub const SEGMENT_ENTRY_LEN: usize = 9;

/// Pipeline ids below this value (other than the presets) are reserved.
pub const FIRST_USER_PIPELINE_ID: u8 = 128;

pub fn is_known_pipeline_id(id: u8) -> bool {
    id <= 2 || id >= FIRST_USER_PIPELINE_ID
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArchiveError {
    #[error("bad magic {0:02x?}, not an FZM1 archive")]
    BadMagic([u8; 4]),
    #[error("unsupported archive version {0}")]
    UnsupportedVersion(u8),
    #[error("archive truncated: need {needed} bytes, have {available}")]
    Truncated { needed: u64, available: u64 },
    #[error("unknown pipeline id {0}")]
    UnknownPipelineId(u8),
    #[error("invalid header: {0}")]
    InvalidHeader(&'static str),
    #[error("unknown segment kind {0}")]
    UnknownSegmentKind(u8),
    #[error("{0} trailing bytes after the last segment")]
    TrailingBytes(u64),
    #[error("too many segments ({0}, max 255)")]
    TooManySegments(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum SegmentKind {
    HuffmanCodebook = 0,
    HuffmanBitstream = 1,
    OutlierIndices = 2,
    OutlierValues = 3,
    BitshuffleBitmap = 4,
    BitshufflePayload = 5,
    AnchorGrid = 6,
    SecondaryWrapped = 7,
}

impl SegmentKind {
    pub fn from_byte(b: u8) -> Option<Self> {
        use SegmentKind::*;
        Some(match b {
            0 => HuffmanCodebook,
            1 => HuffmanBitstream,
            2 => OutlierIndices,
            3 => OutlierValues,
            4 => BitshuffleBitmap,
            5 => BitshufflePayload,
            6 => AnchorGrid,
            7 => SecondaryWrapped,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub payload: Vec<u8>,
}

impl Segment {
    pub fn new(kind: SegmentKind, payload: Vec<u8>) -> Self {
        Self { kind, payload }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Archive {
    pub pipeline_id: u8,
    pub eb_mode: EbMode,
    pub eb_magnitude: f64,
    pub data_min: f32,
    pub data_max: f32,
    pub dims: Dims,
    pub radius: u32,
    pub segments: Vec<Segment>,
}

impl Archive {
    pub fn segment(&self, kind: SegmentKind) -> Option<&[u8]> {
        self.segments
            .iter()
            .find(|s| s.kind == kind)
            .map(|s| s.payload.as_slice())
    }

    pub fn serialized_len(&self) -> usize {
        HEADER_LEN
            + self.segments.len() * SEGMENT_ENTRY_LEN
            + self.segments.iter().map(|s| s.payload.len()).sum::<usize>()
    }

    /// Serializes to the fixed little-endian layout. Deterministic.
    pub fn to_bytes(&self) -> Result<Vec<u8>, ArchiveError> {
        if self.segments.len() > u8::MAX as usize {
            return Err(ArchiveError::TooManySegments(self.segments.len()));
        }
        let mut out = Vec::with_capacity(self.serialized_len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.pipeline_id);
        out.push(self.eb_mode.to_byte());
        out.push(self.dims.ndim() as u8);
        out.extend_from_slice(&self.eb_magnitude.to_le_bytes());
        out.extend_from_slice(&self.data_min.to_le_bytes());
        out.extend_from_slice(&self.data_max.to_le_bytes());
        for e in self.dims.padded() {
            out.extend_from_slice(&(e as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.radius.to_le_bytes());
        out.push(self.segments.len() as u8);
        for s in &self.segments {
            out.push(s.kind as u8);
            out.extend_from_slice(&(s.payload.len() as u64).to_le_bytes());
        }
        for s in &self.segments {
            out.extend_from_slice(&s.payload);
        }
        Ok(out)
    }

    /// Exact inverse of [`Archive::to_bytes`].
    pub fn from_bytes(b: &[u8]) -> Result<Self, ArchiveError> {
        let truncated = |needed: usize| ArchiveError::Truncated {
            needed: needed as u64,
            available: b.len() as u64,
        };
        if b.len() < 4 {
            return Err(truncated(HEADER_LEN));
        }
        let magic: [u8; 4] = b[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(ArchiveError::BadMagic(magic));
        }
        if b.len() < HEADER_LEN {
            return Err(truncated(HEADER_LEN));
        }
        if b[4] != VERSION {
            return Err(ArchiveError::UnsupportedVersion(b[4]));
        }
        let pipeline_id = b[5];
        if !is_known_pipeline_id(pipeline_id) {
            return Err(ArchiveError::UnknownPipelineId(pipeline_id));
        }
        let eb_mode =
            EbMode::from_byte(b[6]).ok_or(ArchiveError::InvalidHeader("error-bound mode"))?;
        let ndim = b[7] as usize;
        if !(1..=3).contains(&ndim) {
            return Err(ArchiveError::InvalidHeader("ndim must be 1..=3"));
        }
        let eb_magnitude = f64::from_le_bytes(b[8..16].try_into().unwrap());
        if !(eb_magnitude.is_finite() && eb_magnitude > 0.0) {
            return Err(ArchiveError::InvalidHeader("error-bound magnitude"));
        }
        let data_min = f32::from_le_bytes(b[16..20].try_into().unwrap());
        let data_max = f32::from_le_bytes(b[20..24].try_into().unwrap());
        if !(data_min.is_finite() && data_max.is_finite() && data_max >= data_min) {
            return Err(ArchiveError::InvalidHeader("data range"));
        }
        let mut extents = [0usize; 3];
        for (i, e) in extents.iter_mut().enumerate() {
            let o = 24 + 4 * i;
            *e = u32::from_le_bytes(b[o..o + 4].try_into().unwrap()) as usize;
        }
        if extents[ndim..].iter().any(|&e| e != 1) {
            return Err(ArchiveError::InvalidHeader("unused dims must be 1"));
        }
        let dims =
            Dims::new(&extents[..ndim]).map_err(|_| ArchiveError::InvalidHeader("zero extent"))?;
        let radius = u32::from_le_bytes(b[36..40].try_into().unwrap());
        if radius == 0 {
            return Err(ArchiveError::InvalidHeader("radius must be positive"));
        }
        let count = b[40] as usize;

        let table_end = HEADER_LEN + count * SEGMENT_ENTRY_LEN;
        if b.len() < table_end {
            return Err(truncated(table_end));
        }
        let mut table = Vec::with_capacity(count);
        let mut total: u64 = table_end as u64;
        for i in 0..count {
            let o = HEADER_LEN + i * SEGMENT_ENTRY_LEN;
            let kind =
                SegmentKind::from_byte(b[o]).ok_or(ArchiveError::UnknownSegmentKind(b[o]))?;
            let len = u64::from_le_bytes(b[o + 1..o + 9].try_into().unwrap());
            total = total
                .checked_add(len)
                .ok_or(ArchiveError::InvalidHeader("segment length overflow"))?;
            table.push((kind, len));
        }
        if (b.len() as u64) < total {
            return Err(ArchiveError::Truncated {
                needed: total,
                available: b.len() as u64,
            });
        }
        if (b.len() as u64) > total {
            return Err(ArchiveError::TrailingBytes(b.len() as u64 - total));
        }
        let mut offset = table_end;
        let segments = table
            .into_iter()
            .map(|(kind, len)| {
                let start = offset;
                offset += len as usize;
                Segment::new(kind, b[start..offset].to_vec())
            })
            .collect();

        Ok(Self {
            pipeline_id,
            eb_mode,
            eb_magnitude,
            data_min,
            data_max,
            dims,
            radius,
            segments,
        })
    }
}

/// Free-function form of [`Archive::to_bytes`].
pub fn serialize_archive(a: &Archive) -> Result<Vec<u8>, ArchiveError> {
    a.to_bytes()
}

/// Free-function form of [`Archive::from_bytes`].
pub fn parse_archive(b: &[u8]) -> Result<Archive, ArchiveError> {
    Archive::from_bytes(b)
}
