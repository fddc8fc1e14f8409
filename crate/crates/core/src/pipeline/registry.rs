use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use crate::archive::{is_known_pipeline_id, Archive, FIRST_USER_PIPELINE_ID};
use crate::bound::ErrorBoundSpec;
use crate::encode::{EncodeError, SecondaryCodec, SecondaryRegistry};
use crate::field::Field;

use super::stages::{self, tagged, tagged_as, Prepared};
use super::{
    parse_pipeline_config, validate_spec, PipelineError, PipelineSpec, Plan, StageKind, StageSpec,
};

/// The three built-in pipelines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Lorenzo + exact histogram + Huffman.
    Default,
    /// Lorenzo + bitshuffle; no entropy coding.
    Speed,
    /// Interpolation + top-k histogram + Huffman.
    Quality,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Default, Preset::Speed, Preset::Quality];

    pub fn id(self) -> u8 {
        match self {
            Preset::Default => 0,
            Preset::Speed => 1,
            Preset::Quality => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Default => "default",
            Preset::Speed => "speed",
            Preset::Quality => "quality",
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.id() == id)
    }

    pub fn handle(self) -> PipelineHandle {
        PipelineHandle(self.id())
    }

    pub fn spec(self) -> PipelineSpec {
        let range = StageSpec::new("range", StageKind::Preprocess);
        let stages = match self {
            Preset::Default => vec![
                range,
                StageSpec::new("lorenzo", StageKind::Predict).param("predictor", "lorenzo"),
                StageSpec::new("histogram", StageKind::Analysis).param("histogram", "exact"),
                StageSpec::new("huffman", StageKind::PrimaryCodec).param("codec", "huffman"),
            ],
            Preset::Speed => vec![
                range,
                StageSpec::new("lorenzo", StageKind::Predict).param("predictor", "lorenzo"),
                StageSpec::new("bitshuffle", StageKind::PrimaryCodec).param("codec", "bitshuffle"),
            ],
            Preset::Quality => vec![
                range,
                StageSpec::new("interp", StageKind::Predict)
                    .param("predictor", "interp")
                    .param("anchor_stride", 16),
                StageSpec::new("histogram", StageKind::Analysis)
                    .param("histogram", "topk")
                    .param("k", 16),
                StageSpec::new("huffman", StageKind::PrimaryCodec).param("codec", "huffman"),
            ],
        };
        PipelineSpec::new(self.id(), stages)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| PipelineError::UnknownPreset(s.to_string()))
    }
}

/// Names a registered pipeline by id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PipelineHandle(u8);

impl PipelineHandle {
    pub fn id(self) -> u8 {
        self.0
    }
}

impl From<Preset> for PipelineHandle {
    fn from(p: Preset) -> Self {
        p.handle()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageTiming {
    pub name: String,
    pub kind: StageKind,
    pub elapsed: Duration,
}

/// Per-stage wall time of one compression.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CompressReport {
    pub stages: Vec<StageTiming>,
    pub total: Duration,
}

impl CompressReport {
    fn time<T>(&mut self, plan: &Plan, kind: StageKind, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.stages.push(StageTiming {
            name: plan.stage_name(kind),
            kind,
            elapsed: t.elapsed(),
        });
        out
    }
}

/// Registered pipelines plus the secondary codecs they may reference.
#[derive(Clone, Debug)]
pub struct Registry {
    entries: BTreeMap<u8, (PipelineSpec, Plan)>,
    secondary: SecondaryRegistry,
}

impl Default for Registry {
    fn default() -> Self {
        Self::new()
    }
}

impl Registry {
    /// A registry holding the three presets and the built-in secondary codec.
    pub fn new() -> Self {
        let mut r = Self {
            entries: BTreeMap::new(),
            secondary: SecondaryRegistry::default(),
        };
        for p in Preset::ALL {
            let (spec, plan) = validate_spec(&p.spec(), |id| r.secondary.contains(id))
                .expect("preset specs are valid");
            r.entries.insert(p.id(), (spec, plan));
        }
        r
    }

    pub fn register(&mut self, spec: PipelineSpec) -> Result<PipelineHandle, PipelineError> {
        if self.entries.contains_key(&spec.id) {
            return Err(PipelineError::DuplicateId(spec.id));
        }
        if spec.id < FIRST_USER_PIPELINE_ID || !is_known_pipeline_id(spec.id) {
            return Err(PipelineError::ReservedId(spec.id));
        }
        let (spec, plan) = validate_spec(&spec, |id| self.secondary.contains(id))?;
        let id = spec.id;
        self.entries.insert(id, (spec, plan));
        Ok(PipelineHandle(id))
    }

    /// Parses the plain-text config format and registers the result.
    pub fn register_config(&mut self, text: &str) -> Result<PipelineHandle, PipelineError> {
        self.register(parse_pipeline_config(text)?)
    }

    pub fn register_secondary_codec(
        &mut self,
        codec: Arc<dyn SecondaryCodec>,
    ) -> Result<(), EncodeError> {
        self.secondary.register(codec)
    }

    pub fn secondary_codecs(&self) -> &SecondaryRegistry {
        &self.secondary
    }

    pub fn handle(&self, id: u8) -> Result<PipelineHandle, PipelineError> {
        if self.entries.contains_key(&id) {
            Ok(PipelineHandle(id))
        } else {
            Err(PipelineError::UnknownPipelineId(id))
        }
    }

    pub fn ids(&self) -> Vec<u8> {
        self.entries.keys().copied().collect()
    }

    /// The completed spec (with any auto-inserted stages).
    pub fn spec(&self, h: PipelineHandle) -> Result<&PipelineSpec, PipelineError> {
        self.entries
            .get(&h.0)
            .map(|(s, _)| s)
            .ok_or(PipelineError::UnknownPipelineId(h.0))
    }

    pub fn plan(&self, h: PipelineHandle) -> Result<&Plan, PipelineError> {
        self.entries
            .get(&h.0)
            .map(|(_, p)| p)
            .ok_or(PipelineError::UnknownPipelineId(h.0))
    }

    pub fn compress(
        &self,
        field: &Field,
        spec: ErrorBoundSpec,
        pipeline: impl Into<PipelineHandle>,
    ) -> Result<Archive, PipelineError> {
        self.compress_with_report(field, spec, pipeline)
            .map(|(a, _)| a)
    }

    pub fn compress_with_report(
        &self,
        field: &Field,
        spec: ErrorBoundSpec,
        pipeline: impl Into<PipelineHandle>,
    ) -> Result<(Archive, CompressReport), PipelineError> {
        let h = pipeline.into();
        let plan = self.plan(h)?;
        let start = Instant::now();
        let mut rep = CompressReport::default();

        let prepared = rep.time(plan, StageKind::Preprocess, || {
            stages::preprocess(field, spec)
        });
        let bound = match tagged(plan, StageKind::Preprocess, prepared)? {
            Prepared::Constant(v) => {
                let a = stages::header(h.0, spec, v, v, field.dims(), plan.radius, Vec::new());
                rep.total = start.elapsed();
                return Ok((a, rep));
            }
            Prepared::Bound(b) => b,
        };
        let predicted = rep.time(plan, StageKind::Predict, || {
            stages::predict(plan, field, &bound)
        });
        let predicted = tagged(plan, StageKind::Predict, predicted)?;
        let hist = if plan.histogram.is_some() {
            let h = rep.time(plan, StageKind::Analysis, || {
                stages::analyze(plan, &predicted.quant)
            });
            tagged(plan, StageKind::Analysis, h)?
        } else {
            None
        };
        let segments = rep.time(plan, StageKind::PrimaryCodec, || {
            stages::encode_codes(plan, &predicted.quant, hist.as_ref()).map(|mut s| {
                s.extend(stages::encode_side(&predicted));
                s
            })
        });
        let mut segments = tagged(plan, StageKind::PrimaryCodec, segments)?;
        if plan.secondary.is_some() {
            let wrapped = rep.time(plan, StageKind::SecondaryCodec, || {
                stages::wrap_secondary(plan, &self.secondary, segments)
            });
            segments = tagged(plan, StageKind::SecondaryCodec, wrapped)?;
        }
        let a = stages::header(
            h.0,
            spec,
            bound.data_min,
            bound.data_max,
            field.dims(),
            plan.radius,
            segments,
        );
        rep.total = start.elapsed();
        Ok((a, rep))
    }

    /// Decompresses with the pipeline named in the archive header.
    pub fn decompress(&self, a: &Archive) -> Result<Field, PipelineError> {
        self.decompress_with(a, PipelineHandle(a.pipeline_id))
    }

    /// Decompresses with an explicitly chosen pipeline.
    pub fn decompress_with(
        &self,
        a: &Archive,
        pipeline: impl Into<PipelineHandle>,
    ) -> Result<Field, PipelineError> {
        let plan = self.plan(pipeline.into())?;
        if tagged_as("parse-segments", stages::is_constant(a))? {
            return tagged_as("parse-segments", stages::constant_field(a));
        }
        let parts = tagged_as("parse-segments", stages::unpack(plan, &self.secondary, a))?;
        let bound = tagged_as("parse-segments", stages::decode_bound(a))?;
        let n = a.dims.len();
        let codes = tagged(
            plan,
            StageKind::PrimaryCodec,
            stages::decode_codes(plan, &parts, n, a.radius),
        )?;
        let scattered = tagged(
            plan,
            StageKind::Predict,
            stages::scatter(plan, &parts, a.dims),
        )?;
        tagged(
            plan,
            StageKind::Predict,
            stages::reconstruct(plan, &codes, scattered, &bound, a.dims, a.radius),
        )
    }
}

/// Shared registry holding only the presets.
pub fn default_registry() -> &'static Registry {
    static REG: OnceLock<Registry> = OnceLock::new();
    REG.get_or_init(Registry::new)
}

/// Compresses with a preset pipeline.
pub fn compress(
    field: &Field,
    spec: ErrorBoundSpec,
    preset: Preset,
) -> Result<Archive, PipelineError> {
    default_registry().compress(field, spec, preset)
}

pub fn compress_with_report(
    field: &Field,
    spec: ErrorBoundSpec,
    preset: Preset,
) -> Result<(Archive, CompressReport), PipelineError> {
    default_registry().compress_with_report(field, spec, preset)
}

/// Decompresses an archive produced by a preset pipeline.
pub fn decompress(a: &Archive) -> Result<Field, PipelineError> {
    default_registry().decompress(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::{parse_archive, SegmentKind};
    use crate::field::Dims;
    use crate::pipeline::StageError;

    fn wave(dims: Dims) -> Field {
        Field::from_fn(dims, |ix| {
            ix.iter()
                .enumerate()
                .map(|(d, &i)| ((i as f32) * 0.13 * (d as f32 + 1.0)).sin())
                .sum()
        })
        .unwrap()
    }

    fn max_err(a: &Field, b: &Field) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (*x as f64 - *y as f64).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn presets_round_trip_within_bound() {
        let reg = Registry::new();
        for dims in [
            Dims::d1(1000).unwrap(),
            Dims::d2(40, 37).unwrap(),
            Dims::d3(20, 19, 18).unwrap(),
            Dims::d3(5, 40, 40).unwrap(),
        ] {
            let f = wave(dims);
            for p in Preset::ALL {
                for eb in [1e-2, 1e-4, 1e-6] {
                    let spec = ErrorBoundSpec::relative(eb).unwrap();
                    let a = reg.compress(&f, spec, p).unwrap();
                    let bytes = a.to_bytes().unwrap();
                    let back = reg.decompress(&parse_archive(&bytes).unwrap()).unwrap();
                    let (lo, hi) = f.min_max();
                    let eb_abs = eb * (hi as f64 - lo as f64);
                    assert!(max_err(&f, &back) <= eb_abs, "{p} {dims} {eb}");
                }
            }
        }
    }

    #[test]
    fn quality_falls_back_to_lorenzo_on_small_fields() {
        let reg = Registry::new();
        let spec = ErrorBoundSpec::relative(1e-3).unwrap();
        let small = reg
            .compress(&wave(Dims::d2(10, 100).unwrap()), spec, Preset::Quality)
            .unwrap();
        assert!(small.segment(SegmentKind::AnchorGrid).is_none());
        let big = reg
            .compress(&wave(Dims::d2(33, 33).unwrap()), spec, Preset::Quality)
            .unwrap();
        assert!(big.segment(SegmentKind::AnchorGrid).is_some());
    }

    #[test]
    fn constant_field_fast_path() {
        let f = Field::new(Dims::d2(8, 9).unwrap(), vec![2.5; 72]).unwrap();
        for p in Preset::ALL {
            let a = compress(&f, ErrorBoundSpec::relative(1e-3).unwrap(), p).unwrap();
            assert!(a.segments.is_empty());
            assert_eq!(a.data_min, 2.5);
            assert_eq!(decompress(&a).unwrap(), f);
        }
    }

    #[test]
    fn report_names_stages() {
        let (_, rep) = compress_with_report(
            &wave(Dims::d2(40, 40).unwrap()),
            ErrorBoundSpec::absolute(1e-3).unwrap(),
            Preset::Default,
        )
        .unwrap();
        let names: Vec<&str> = rep.stages.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["range", "lorenzo", "histogram", "huffman"]);
    }

    #[test]
    fn registration_rules() {
        let mut reg = Registry::new();
        assert!(matches!(
            reg.register(Preset::Default.spec()),
            Err(PipelineError::DuplicateId(0))
        ));
        let mut spec = Preset::Speed.spec();
        spec.id = 50;
        assert!(matches!(
            reg.register(spec.clone()),
            Err(PipelineError::ReservedId(50))
        ));
        spec.id = 130;
        let h = reg.register(spec.clone()).unwrap();
        assert_eq!(h.id(), 130);
        assert!(matches!(
            reg.register(spec),
            Err(PipelineError::DuplicateId(130))
        ));
    }

    #[test]
    fn custom_pipeline_with_secondary() {
        let mut reg = Registry::new();
        let h = reg
            .register_config(
                "pipeline id=200\n\
                 stage name=p kind=predict predictor=lorenzo radius=64\n\
                 stage name=h kind=primary codec=huffman\n\
                 stage name=z kind=secondary codec_id=0\n",
            )
            .unwrap();
        let f = wave(Dims::d2(30, 30).unwrap());
        let spec = ErrorBoundSpec::absolute(1e-2).unwrap();
        let a = reg.compress(&f, spec, h).unwrap();
        assert_eq!(a.segments.len(), 1);
        assert_eq!(a.segments[0].kind, SegmentKind::SecondaryWrapped);
        assert_eq!(a.radius, 64);
        let back = reg.decompress(&a).unwrap();
        assert!(max_err(&f, &back) <= 1e-2);
        // the shared preset registry does not know id 200
        assert!(matches!(
            decompress(&a),
            Err(PipelineError::UnknownPipelineId(200))
        ));
    }

    #[test]
    fn errors_name_the_stage() {
        let reg = Registry::new();
        let f = wave(Dims::d2(30, 30).unwrap());
        let mut a = reg
            .compress(&f, ErrorBoundSpec::absolute(1e-2).unwrap(), Preset::Default)
            .unwrap();
        let bits = a
            .segments
            .iter_mut()
            .find(|s| s.kind == SegmentKind::HuffmanBitstream)
            .unwrap();
        bits.payload.pop();
        match reg.decompress(&a) {
            Err(PipelineError::Stage { stage, .. }) => assert_eq!(stage, "huffman"),
            other => panic!("{other:?}"),
        }

        let mut a = reg
            .compress(&f, ErrorBoundSpec::absolute(1e-2).unwrap(), Preset::Default)
            .unwrap();
        a.segments.retain(|s| s.kind != SegmentKind::OutlierValues);
        assert!(matches!(
            reg.decompress(&a),
            Err(PipelineError::Stage {
                source: StageError::Corrupt(_),
                ..
            })
        ));
    }
}
