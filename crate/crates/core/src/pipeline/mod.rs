//! Stage composition: pipeline specs, the preset registry, end-to-end
//! compress/decompress, and a dependency-inferring task-graph executor.
//!
//! A pipeline is an ordered list of stages,
//!
//! ```text
//! [Preprocess] -> Predict -> [Analysis] -> PrimaryCodec -> [SecondaryCodec]
//! ```
//!
//! validated once at registration and lowered to a [`Plan`]. The archive
//! records only the pipeline id, so decompression looks the plan up again.

mod config;
mod flows;
mod graph;
mod registry;
mod stages;

pub use config::{parse_pipeline_config, pipeline_to_config};
pub use flows::{
    build_compress_graph, build_decompress_graph, compress_graph, decompress_graph,
    DecompressGraphOptions, COMPRESS_OUTPUT, DECOMPRESS_OUTPUT, TASK_HUFFMAN_DECODE,
    TASK_OUTLIER_SCATTER, TASK_PARSE, TASK_RECONSTRUCT,
};
pub use graph::{
    BufferValue, ExecutionTrace, GraphError, GraphRun, TaskContext, TaskGraph, TaskId, TraceEntry,
};
pub use registry::{
    compress, compress_with_report, decompress, default_registry, CompressReport, PipelineHandle,
    Preset, Registry, StageTiming,
};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::archive::ArchiveError;
use crate::bound::BoundError;
use crate::encode::{EncodeError, BITSHUFFLE_MAX_RADIUS, DEFAULT_TOPK};
use crate::predict::{InterpConfig, PredictError, PredictorKind, DEFAULT_RADIUS};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("pipeline id {0} is already registered")]
    DuplicateId(u8),
    #[error("pipeline id {0} is reserved (custom pipelines use 128..=255)")]
    ReservedId(u8),
    #[error("stage name {0:?} is used twice")]
    DuplicateStageName(String),
    #[error("invalid stage order: {0}")]
    InvalidStageOrder(String),
    #[error("pipeline has no {0} stage")]
    MissingStage(&'static str),
    #[error("stage {stage:?}: invalid parameter {key}={value:?}: {reason}")]
    InvalidParam {
        stage: String,
        key: String,
        value: String,
        reason: &'static str,
    },
    #[error("pipeline config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("unknown pipeline id {0}")]
    UnknownPipelineId(u8),
    #[error("unknown preset {0:?} (expected default, speed or quality)")]
    UnknownPreset(String),
    #[error("pipeline {0} has no task-graph decompression (single codec task)")]
    UnsupportedPipeline(u8),
    #[error("stage {stage:?} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: StageError,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Failure inside one stage; wrapped with the stage name in
/// [`PipelineError::Stage`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum StageError {
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error("corrupt archive: {0}")]
    Corrupt(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StageKind {
    Preprocess,
    Predict,
    Analysis,
    PrimaryCodec,
    SecondaryCodec,
}

impl StageKind {
    pub fn keyword(self) -> &'static str {
        match self {
            StageKind::Preprocess => "preprocess",
            StageKind::Predict => "predict",
            StageKind::Analysis => "analysis",
            StageKind::PrimaryCodec => "primary",
            StageKind::SecondaryCodec => "secondary",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "preprocess" => StageKind::Preprocess,
            "predict" => StageKind::Predict,
            "analysis" => StageKind::Analysis,
            "primary" => StageKind::PrimaryCodec,
            "secondary" => StageKind::SecondaryCodec,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageSpec {
    pub name: String,
    pub kind: StageKind,
    pub params: BTreeMap<String, String>,
}

impl StageSpec {
    pub fn new(name: &str, kind: StageKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
            params: BTreeMap::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PipelineSpec {
    pub id: u8,
    pub stages: Vec<StageSpec>,
}

impl PipelineSpec {
    pub fn new(id: u8, stages: Vec<StageSpec>) -> Self {
        Self { id, stages }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HistogramMode {
    Exact,
    TopK(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrimaryCodec {
    Huffman,
    Bitshuffle,
}

/// A validated pipeline lowered to concrete stage choices.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub predictor: PredictorKind,
    pub radius: u32,
    pub interp: InterpConfig,
    /// `None` unless the primary codec is Huffman.
    pub histogram: Option<HistogramMode>,
    pub primary: PrimaryCodec,
    pub secondary: Option<u8>,
    /// Stage names by kind, for timings and error messages.
    pub names: BTreeMap<StageKind, String>,
}

impl Plan {
    pub fn stage_name(&self, kind: StageKind) -> String {
        self.names
            .get(&kind)
            .cloned()
            .unwrap_or_else(|| kind.keyword().to_string())
    }
}

fn bad_param(stage: &StageSpec, key: &str, value: &str, reason: &'static str) -> PipelineError {
    PipelineError::InvalidParam {
        stage: stage.name.clone(),
        key: key.to_string(),
        value: value.to_string(),
        reason,
    }
}

fn parse_num<T: std::str::FromStr>(
    stage: &StageSpec,
    key: &str,
    value: &str,
) -> Result<T, PipelineError> {
    value
        .parse()
        .map_err(|_| bad_param(stage, key, value, "not a non-negative integer"))
}

/// Fills in the implied Analysis stage, then checks names, order and
/// parameters. Returns the completed spec and its plan.
pub fn validate_spec(
    spec: &PipelineSpec,
    secondary_known: impl Fn(u8) -> bool,
) -> Result<(PipelineSpec, Plan), PipelineError> {
    let mut spec = spec.clone();
    auto_insert_analysis(&mut spec);

    let mut seen = std::collections::BTreeSet::new();
    for s in &spec.stages {
        if !seen.insert(s.name.as_str()) {
            return Err(PipelineError::DuplicateStageName(s.name.clone()));
        }
    }
    for w in spec.stages.windows(2) {
        if w[1].kind < w[0].kind {
            return Err(PipelineError::InvalidStageOrder(format!(
                "{} stage {:?} after {} stage {:?}",
                w[1].kind.keyword(),
                w[1].name,
                w[0].kind.keyword(),
                w[0].name
            )));
        }
        if w[1].kind == w[0].kind {
            return Err(PipelineError::InvalidStageOrder(format!(
                "more than one {} stage",
                w[0].kind.keyword()
            )));
        }
    }
    let find = |k: StageKind| spec.stages.iter().find(|s| s.kind == k);
    let predict = find(StageKind::Predict).ok_or(PipelineError::MissingStage("predict"))?;
    let primary =
        find(StageKind::PrimaryCodec).ok_or(PipelineError::MissingStage("primary codec"))?;

    let mut plan = Plan {
        predictor: PredictorKind::Lorenzo,
        radius: DEFAULT_RADIUS,
        interp: InterpConfig::default(),
        histogram: None,
        primary: PrimaryCodec::Huffman,
        secondary: None,
        names: spec
            .stages
            .iter()
            .map(|s| (s.kind, s.name.clone()))
            .collect(),
    };

    if let Some(pre) = find(StageKind::Preprocess) {
        if let Some((k, v)) = pre.params.iter().next() {
            return Err(bad_param(pre, k, v, "preprocess takes no parameters"));
        }
    }

    for (k, v) in &predict.params {
        match k.as_str() {
            "predictor" => {
                plan.predictor = match v.as_str() {
                    "lorenzo" => PredictorKind::Lorenzo,
                    "interp" => PredictorKind::Interp,
                    _ => return Err(bad_param(predict, k, v, "expected lorenzo or interp")),
                }
            }
            "radius" => {
                plan.radius = parse_num(predict, k, v)?;
                if plan.radius == 0 || plan.radius > 1 << 30 {
                    return Err(bad_param(predict, k, v, "radius must be in 1..=2^30"));
                }
            }
            "anchor_stride" => {
                let stride: usize = parse_num(predict, k, v)?;
                plan.interp = InterpConfig::with_stride(stride)
                    .map_err(|_| bad_param(predict, k, v, "must be a power of two >= 4"))?;
            }
            _ => return Err(bad_param(predict, k, v, "unknown predict parameter")),
        }
    }
    if plan.predictor == PredictorKind::Lorenzo && predict.params.contains_key("anchor_stride") {
        let v = &predict.params["anchor_stride"];
        return Err(bad_param(
            predict,
            "anchor_stride",
            v,
            "only applies to interp",
        ));
    }

    for (k, v) in &primary.params {
        match k.as_str() {
            "codec" => {
                plan.primary = match v.as_str() {
                    "huffman" => PrimaryCodec::Huffman,
                    "bitshuffle" => PrimaryCodec::Bitshuffle,
                    _ => return Err(bad_param(primary, k, v, "expected huffman or bitshuffle")),
                }
            }
            _ => return Err(bad_param(primary, k, v, "unknown primary parameter")),
        }
    }
    if !primary.params.contains_key("codec") {
        return Err(bad_param(
            primary,
            "codec",
            "",
            "primary stage needs codec=",
        ));
    }
    if plan.primary == PrimaryCodec::Bitshuffle && plan.radius > BITSHUFFLE_MAX_RADIUS {
        return Err(bad_param(
            predict,
            "radius",
            &plan.radius.to_string(),
            "bitshuffle codes are 16 bits: radius <= 32768",
        ));
    }

    if let Some(an) = find(StageKind::Analysis) {
        if plan.primary != PrimaryCodec::Huffman {
            return Err(PipelineError::InvalidStageOrder(format!(
                "analysis stage {:?} has no consumer (only huffman uses a histogram)",
                an.name
            )));
        }
        let mut mode = HistogramMode::Exact;
        for (k, v) in &an.params {
            match k.as_str() {
                "histogram" => {
                    mode = match v.as_str() {
                        "exact" => HistogramMode::Exact,
                        "topk" => HistogramMode::TopK(DEFAULT_TOPK),
                        _ => return Err(bad_param(an, k, v, "expected exact or topk")),
                    }
                }
                "k" => {}
                _ => return Err(bad_param(an, k, v, "unknown analysis parameter")),
            }
        }
        if let Some(v) = an.params.get("k") {
            let k: usize = parse_num(an, "k", v)?;
            match mode {
                HistogramMode::TopK(_) if k >= 1 && k <= 2 * plan.radius as usize => {
                    mode = HistogramMode::TopK(k)
                }
                HistogramMode::TopK(_) => {
                    return Err(bad_param(an, "k", v, "k must be in 1..=2*radius"))
                }
                HistogramMode::Exact => {
                    return Err(bad_param(an, "k", v, "k only applies to topk"))
                }
            }
        }
        if let HistogramMode::TopK(k) = mode {
            if k > 2 * plan.radius as usize {
                return Err(bad_param(
                    an,
                    "k",
                    &k.to_string(),
                    "k must be in 1..=2*radius",
                ));
            }
        }
        plan.histogram = Some(mode);
    }

    if let Some(sec) = find(StageKind::SecondaryCodec) {
        let mut id = None;
        for (k, v) in &sec.params {
            match k.as_str() {
                "codec_id" => {
                    let parsed: u8 = parse_num(sec, k, v)?;
                    if !secondary_known(parsed) {
                        return Err(bad_param(sec, k, v, "no secondary codec with this id"));
                    }
                    id = Some(parsed);
                }
                _ => return Err(bad_param(sec, k, v, "unknown secondary parameter")),
            }
        }
        plan.secondary =
            Some(id.ok_or_else(|| {
                bad_param(sec, "codec_id", "", "secondary stage needs codec_id=")
            })?);
    }

    Ok((spec, plan))
}

/// Huffman needs a histogram; add an exact one if the spec has none.
fn auto_insert_analysis(spec: &mut PipelineSpec) {
    let huffman = spec.stages.iter().any(|s| {
        s.kind == StageKind::PrimaryCodec
            && s.params.get("codec").map(String::as_str) == Some("huffman")
    });
    let has_analysis = spec.stages.iter().any(|s| s.kind == StageKind::Analysis);
    if !huffman || has_analysis {
        return;
    }
    let mut name = "histogram".to_string();
    let mut n = 1;
    while spec.stages.iter().any(|s| s.name == name) {
        n += 1;
        name = format!("histogram{n}");
    }
    let at = spec
        .stages
        .iter()
        .position(|s| s.kind == StageKind::PrimaryCodec)
        .unwrap_or(spec.stages.len());
    spec.stages.insert(
        at,
        StageSpec::new(&name, StageKind::Analysis).param("histogram", "exact"),
    );
}
