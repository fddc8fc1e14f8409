//! Stage bodies shared by the sequential and task-graph drivers, so both
//! produce the same bytes.
//!
//! Segment contract (per archive, each kind at most once):
//!
//! - Huffman: codebook (one length byte per symbol) + MSB-first bitstream.
//! - Bitshuffle: bitmap + payload.
//! - Outliers, always present: indices as LEB128 varints (first absolute,
//!   then gaps) and values as f32 LE; the count is `values.len() / 4`.
//! - Anchor grid: only when the interpolation predictor actually ran. An
//!   interp pipeline falls back to Lorenzo on fields it cannot handle (1-D or
//!   an extent not above the anchor stride), signalled by this segment's
//!   absence.
//! - With a secondary codec all of the above travel inside one wrapped
//!   segment.
//! - A constant field is stored as a header with no segments at all.

use std::collections::BTreeMap;

use crate::archive::{Archive, Segment, SegmentKind};
use crate::bound::{ErrorBoundSpec, ResolvedBound};
use crate::encode::{
    bitshuffle_decode, bitshuffle_encode, block_count, histogram_exact, histogram_topk,
    huffman_decode, huffman_encode, read_varint, write_varint, Histogram, HuffmanCodebook,
    SecondaryRegistry, BITMAP_BYTES_PER_BLOCK,
};
use crate::field::{Dims, Field};
use crate::predict::{
    interp_quantize, interp_reconstruct_scattered, lorenzo_quantize, lorenzo_reconstruct_scattered,
    scatter_anchors, scatter_outliers, PredictorKind, Scattered,
};
use crate::quant::{Outlier, QuantOutput};

use super::{HistogramMode, PipelineError, Plan, PrimaryCodec, StageError, StageKind};

pub(crate) fn tagged<T, E: Into<StageError>>(
    plan: &Plan,
    kind: StageKind,
    r: Result<T, E>,
) -> Result<T, PipelineError> {
    r.map_err(|e| PipelineError::Stage {
        stage: plan.stage_name(kind),
        source: e.into(),
    })
}

pub(crate) fn tagged_as<T, E: Into<StageError>>(
    stage: &str,
    r: Result<T, E>,
) -> Result<T, PipelineError> {
    r.map_err(|e| PipelineError::Stage {
        stage: stage.to_string(),
        source: e.into(),
    })
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Prepared {
    Constant(f32),
    Bound(ResolvedBound),
}

pub(crate) fn preprocess(field: &Field, spec: ErrorBoundSpec) -> Result<Prepared, StageError> {
    let (lo, hi) = field.min_max();
    if lo == hi {
        return Ok(Prepared::Constant(lo));
    }
    Ok(Prepared::Bound(ResolvedBound::from_parts(spec, lo, hi)?))
}

#[derive(Clone, Debug)]
pub(crate) struct Predicted {
    pub quant: QuantOutput,
    pub anchors: Option<Vec<u8>>,
}

pub(crate) fn predict(
    plan: &Plan,
    field: &Field,
    bound: &ResolvedBound,
) -> Result<Predicted, StageError> {
    let interp_ok =
        plan.predictor == PredictorKind::Interp && plan.interp.check_field(field.dims()).is_ok();
    Ok(if interp_ok {
        let out = interp_quantize(field, bound, plan.radius, &plan.interp)?;
        Predicted {
            quant: out.quant,
            anchors: Some(out.anchors),
        }
    } else {
        Predicted {
            quant: lorenzo_quantize(field, bound, plan.radius)?,
            anchors: None,
        }
    })
}

pub(crate) fn analyze(plan: &Plan, q: &QuantOutput) -> Result<Option<Histogram>, StageError> {
    Ok(match plan.histogram {
        None => None,
        Some(HistogramMode::Exact) => Some(histogram_exact(&q.codes, q.radius)?),
        Some(HistogramMode::TopK(k)) => Some(histogram_topk(&q.codes, q.radius, k)?),
    })
}

pub(crate) fn encode_codes(
    plan: &Plan,
    q: &QuantOutput,
    hist: Option<&Histogram>,
) -> Result<Vec<Segment>, StageError> {
    Ok(match plan.primary {
        PrimaryCodec::Huffman => {
            let hist = hist.ok_or(StageError::Corrupt("huffman stage ran without a histogram"))?;
            let enc = huffman_encode(&q.codes, hist)?;
            vec![
                Segment::new(SegmentKind::HuffmanCodebook, enc.codebook.to_bytes()),
                Segment::new(SegmentKind::HuffmanBitstream, enc.bitstream),
            ]
        }
        PrimaryCodec::Bitshuffle => {
            let enc = bitshuffle_encode(&q.codes, q.radius)?;
            vec![
                Segment::new(SegmentKind::BitshuffleBitmap, enc.bitmap),
                Segment::new(SegmentKind::BitshufflePayload, enc.payload),
            ]
        }
    })
}

/// Outlier and anchor segments.
pub(crate) fn encode_side(p: &Predicted) -> Vec<Segment> {
    let mut idx = Vec::new();
    let mut vals = Vec::with_capacity(4 * p.quant.outliers.len());
    let mut prev = 0usize;
    for (i, o) in p.quant.outliers.iter().enumerate() {
        let gap = if i == 0 { o.index } else { o.index - prev };
        write_varint(&mut idx, gap as u64);
        vals.extend_from_slice(&o.value.to_le_bytes());
        prev = o.index;
    }
    let mut out = vec![
        Segment::new(SegmentKind::OutlierIndices, idx),
        Segment::new(SegmentKind::OutlierValues, vals),
    ];
    if let Some(a) = &p.anchors {
        out.push(Segment::new(SegmentKind::AnchorGrid, a.clone()));
    }
    out
}

pub(crate) fn wrap_secondary(
    plan: &Plan,
    secondary: &SecondaryRegistry,
    segments: Vec<Segment>,
) -> Result<Vec<Segment>, StageError> {
    Ok(match plan.secondary {
        Some(id) => vec![secondary.wrap(&segments, id)?],
        None => segments,
    })
}

pub(crate) fn header(
    pipeline_id: u8,
    spec: ErrorBoundSpec,
    data_min: f32,
    data_max: f32,
    dims: Dims,
    radius: u32,
    segments: Vec<Segment>,
) -> Archive {
    Archive {
        pipeline_id,
        eb_mode: spec.mode(),
        eb_magnitude: spec.magnitude(),
        data_min,
        data_max,
        dims,
        radius,
        segments,
    }
}

pub(crate) type Parts = BTreeMap<SegmentKind, Vec<u8>>;

/// True for archives taking the constant-field fast path.
pub(crate) fn is_constant(a: &Archive) -> Result<bool, StageError> {
    if !a.segments.is_empty() {
        return Ok(false);
    }
    if a.data_min != a.data_max {
        return Err(StageError::Corrupt("no segments but a non-constant range"));
    }
    Ok(true)
}

/// Undoes the secondary stage and checks the segment set against the plan.
pub(crate) fn unpack(
    plan: &Plan,
    secondary: &SecondaryRegistry,
    a: &Archive,
) -> Result<Parts, StageError> {
    let wrapped = a
        .segments
        .iter()
        .any(|s| s.kind == SegmentKind::SecondaryWrapped);
    let segments = match (plan.secondary, wrapped) {
        (Some(id), true) => {
            if a.segments.len() != 1 {
                return Err(StageError::Corrupt("wrapped segment must stand alone"));
            }
            let (used, inner) = secondary.unwrap(&a.segments[0].payload)?;
            if used != id {
                return Err(StageError::Corrupt(
                    "secondary codec id differs from pipeline",
                ));
            }
            inner
        }
        (Some(_), false) => return Err(StageError::Corrupt("missing secondary-wrapped segment")),
        (None, true) => return Err(StageError::Corrupt("unexpected secondary-wrapped segment")),
        (None, false) => a.segments.clone(),
    };

    let (code_kinds, other) = match plan.primary {
        PrimaryCodec::Huffman => (
            [SegmentKind::HuffmanCodebook, SegmentKind::HuffmanBitstream],
            [
                SegmentKind::BitshuffleBitmap,
                SegmentKind::BitshufflePayload,
            ],
        ),
        PrimaryCodec::Bitshuffle => (
            [
                SegmentKind::BitshuffleBitmap,
                SegmentKind::BitshufflePayload,
            ],
            [SegmentKind::HuffmanCodebook, SegmentKind::HuffmanBitstream],
        ),
    };
    let mut parts = Parts::new();
    for s in segments {
        if other.contains(&s.kind) || s.kind == SegmentKind::SecondaryWrapped {
            return Err(StageError::Corrupt(
                "segment kind does not belong to this pipeline",
            ));
        }
        if s.kind == SegmentKind::AnchorGrid && plan.predictor != PredictorKind::Interp {
            return Err(StageError::Corrupt("anchor grid in a lorenzo pipeline"));
        }
        if parts.insert(s.kind, s.payload).is_some() {
            return Err(StageError::Corrupt("duplicate segment kind"));
        }
    }
    for k in code_kinds
        .into_iter()
        .chain([SegmentKind::OutlierIndices, SegmentKind::OutlierValues])
    {
        if !parts.contains_key(&k) {
            return Err(StageError::Corrupt("required segment missing"));
        }
    }
    // Each element costs at least one Huffman bit, and the bitshuffle bitmap
    // size is fixed by the element count. Checking here keeps damaged dims
    // from driving huge allocations in the later stages.
    let n = a.dims.len();
    let plausible = match plan.primary {
        PrimaryCodec::Huffman => parts[&SegmentKind::HuffmanBitstream].len() as u64 * 8 >= n as u64,
        PrimaryCodec::Bitshuffle => {
            parts[&SegmentKind::BitshuffleBitmap].len() == block_count(n) * BITMAP_BYTES_PER_BLOCK
        }
    };
    if !plausible {
        return Err(StageError::Corrupt("code stream too short for the dims"));
    }
    Ok(parts)
}

/// Splits `parts` into (code segments, outlier/anchor segments).
pub(crate) fn split_parts(mut parts: Parts) -> (Parts, Parts) {
    let side_kinds = [
        SegmentKind::OutlierIndices,
        SegmentKind::OutlierValues,
        SegmentKind::AnchorGrid,
    ];
    let side = side_kinds
        .iter()
        .filter_map(|k| parts.remove(k).map(|v| (*k, v)))
        .collect();
    (parts, side)
}

fn part(parts: &Parts, k: SegmentKind) -> Result<&[u8], StageError> {
    parts
        .get(&k)
        .map(Vec::as_slice)
        .ok_or(StageError::Corrupt("required segment missing"))
}

pub(crate) fn decode_codes(
    plan: &Plan,
    parts: &Parts,
    n: usize,
    radius: u32,
) -> Result<Vec<u32>, StageError> {
    Ok(match plan.primary {
        PrimaryCodec::Huffman => {
            let cb = HuffmanCodebook::from_bytes(part(parts, SegmentKind::HuffmanCodebook)?)?;
            if cb.alphabet() != 2 * radius as usize {
                return Err(StageError::Corrupt("codebook size does not match radius"));
            }
            huffman_decode(&cb, part(parts, SegmentKind::HuffmanBitstream)?, n)?
        }
        PrimaryCodec::Bitshuffle => bitshuffle_decode(
            part(parts, SegmentKind::BitshuffleBitmap)?,
            part(parts, SegmentKind::BitshufflePayload)?,
            n,
            radius,
        )?,
    })
}

pub(crate) fn decode_outliers(parts: &Parts, n: usize) -> Result<Vec<Outlier>, StageError> {
    let idx = part(parts, SegmentKind::OutlierIndices)?;
    let vals = part(parts, SegmentKind::OutlierValues)?;
    if vals.len() % 4 != 0 {
        return Err(StageError::Corrupt(
            "outlier values not a multiple of 4 bytes",
        ));
    }
    let count = vals.len() / 4;
    if count > n {
        return Err(StageError::Corrupt("more outliers than elements"));
    }
    let mut out = Vec::with_capacity(count);
    let mut pos = 0;
    let mut prev = 0u64;
    for (i, v) in vals.chunks_exact(4).enumerate() {
        let (gap, used) =
            read_varint(&idx[pos..]).map_err(|_| StageError::Corrupt("outlier index varint"))?;
        pos += used;
        if i > 0 && gap == 0 {
            return Err(StageError::Corrupt("outlier indices not increasing"));
        }
        let index = if i == 0 {
            gap
        } else {
            prev.saturating_add(gap)
        };
        if index >= n as u64 {
            return Err(StageError::Corrupt("outlier index out of range"));
        }
        let value = f32::from_le_bytes(v.try_into().unwrap());
        if !value.is_finite() {
            return Err(StageError::Corrupt("non-finite outlier value"));
        }
        out.push(Outlier {
            index: index as usize,
            value,
        });
        prev = index;
    }
    if pos != idx.len() {
        return Err(StageError::Corrupt("trailing bytes after outlier indices"));
    }
    Ok(out)
}

/// Decoder working buffer plus which predictor rebuilds it.
#[derive(Clone, Debug)]
pub(crate) struct ScatterOut {
    pub scattered: Scattered,
    pub interp: bool,
}

pub(crate) fn scatter(plan: &Plan, parts: &Parts, dims: Dims) -> Result<ScatterOut, StageError> {
    let outliers = decode_outliers(parts, dims.len())?;
    let mut scattered = scatter_outliers(&outliers, dims.len());
    let interp = match parts.get(&SegmentKind::AnchorGrid) {
        Some(anchors) => {
            plan.interp.check_field(dims)?;
            scatter_anchors(anchors, dims, &plan.interp, &mut scattered)?;
            true
        }
        None => {
            if plan.predictor == PredictorKind::Interp && plan.interp.check_field(dims).is_ok() {
                return Err(StageError::Corrupt("anchor grid missing"));
            }
            false
        }
    };
    Ok(ScatterOut { scattered, interp })
}

pub(crate) fn decode_bound(a: &Archive) -> Result<ResolvedBound, StageError> {
    let spec = ErrorBoundSpec::new(a.eb_mode, a.eb_magnitude)?;
    Ok(ResolvedBound::from_parts(spec, a.data_min, a.data_max)?)
}

pub(crate) fn reconstruct(
    plan: &Plan,
    codes: &[u32],
    s: ScatterOut,
    bound: &ResolvedBound,
    dims: Dims,
    radius: u32,
) -> Result<Field, StageError> {
    if codes.len() != s.scattered.fixed.len() {
        return Err(StageError::Corrupt("code count differs from field size"));
    }
    // stored points (outliers, anchors) always carry the center code
    if codes
        .iter()
        .zip(&s.scattered.fixed)
        .any(|(&c, &fixed)| fixed && c != radius)
    {
        return Err(StageError::Corrupt(
            "stored point carries a non-center code",
        ));
    }
    Ok(if s.interp {
        interp_reconstruct_scattered(codes, radius, dims, s.scattered, bound, &plan.interp)?
    } else {
        lorenzo_reconstruct_scattered(codes, radius, dims, s.scattered, bound)?
    })
}

pub(crate) fn constant_field(a: &Archive) -> Result<Field, StageError> {
    Ok(Field::new(a.dims, vec![a.data_min; a.dims.len()])
        .map_err(crate::predict::PredictError::from)?)
}
