//! Compression and decompression expressed as task graphs.
//!
//! The decompression graph follows the classic overlap: once segments are
//! parsed, Huffman decoding (bitstream -> codes) and outlier scattering
//! (outliers/anchors -> working buffer) touch disjoint buffers and may run at
//! the same time; reconstruction waits for both.
//!
//! ```text
//!              +-> huffman-decode --+
//! parse-segments                    +-> predict-reconstruct
//!              +-> outlier-scatter -+
//! ```
//!
//! There is no device tier: "memory movement" is the hand-off of buffer
//! values between tasks.

use std::sync::Arc;
use std::time::Duration;

use crate::archive::Archive;
use crate::bound::ErrorBoundSpec;
use crate::field::Field;

use super::graph::{ExecutionTrace, GraphError, TaskGraph};
use super::stages::{self, tagged, tagged_as, Parts, Predicted, Prepared, ScatterOut};
use super::{PipelineError, PipelineHandle, PrimaryCodec, Registry, StageKind};

pub const TASK_PARSE: &str = "parse-segments";
pub const TASK_HUFFMAN_DECODE: &str = "huffman-decode";
pub const TASK_OUTLIER_SCATTER: &str = "outlier-scatter";
pub const TASK_RECONSTRUCT: &str = "predict-reconstruct";

/// Buffer holding the reconstructed [`Field`] after the decompression graph.
pub const DECOMPRESS_OUTPUT: &str = "output";
/// Buffer holding the [`Archive`] after the compression graph.
pub const COMPRESS_OUTPUT: &str = "archive";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DecompressGraphOptions {
    /// Extra sleep inside both middle tasks; makes overlap observable.
    pub side_task_delay: Duration,
}

fn boxed(e: PipelineError) -> Box<dyn std::error::Error + Send + Sync> {
    Box::new(e)
}

/// Pulls a pipeline error back out of a failed task.
fn unwrap_task_error(e: GraphError) -> PipelineError {
    match e {
        GraphError::TaskFailed { task, source } => match source.downcast::<PipelineError>() {
            Ok(p) => *p,
            Err(source) => PipelineError::Graph(GraphError::TaskFailed { task, source }),
        },
        other => PipelineError::Graph(other),
    }
}

/// Builds the four-task decompression graph for a Huffman-coded archive.
/// The archive is the graph's only input buffer.
pub fn build_decompress_graph(
    registry: &Registry,
    a: &Archive,
    opts: DecompressGraphOptions,
) -> Result<TaskGraph, PipelineError> {
    let plan = Arc::new(registry.plan(registry.handle(a.pipeline_id)?)?.clone());
    if plan.primary != PrimaryCodec::Huffman {
        return Err(PipelineError::UnsupportedPipeline(a.pipeline_id));
    }
    let secondary = registry.secondary_codecs().clone();
    let (dims, radius) = (a.dims, a.radius);
    let constant = tagged_as(TASK_PARSE, stages::is_constant(a))?;
    // header-only, so resolved here rather than inside a task
    let bound = if constant {
        None
    } else {
        Some(tagged_as(TASK_PARSE, stages::decode_bound(a))?)
    };

    let mut g = TaskGraph::new();
    g.add_input("archive", a.clone())?;
    for b in [
        "huff_input",
        "scatter_input",
        "codes",
        "recon_init",
        DECOMPRESS_OUTPUT,
    ] {
        g.add_buffer(b)?;
    }

    let p = plan.clone();
    g.add_task(
        TASK_PARSE,
        &["archive"],
        &["huff_input", "scatter_input"],
        move |c| {
            let a = c.read::<Archive>("archive")?;
            let (codes, side) = if constant {
                (Parts::new(), Parts::new())
            } else {
                let parts =
                    tagged_as(TASK_PARSE, stages::unpack(&p, &secondary, &a)).map_err(boxed)?;
                stages::split_parts(parts)
            };
            c.write("huff_input", codes)?;
            c.write("scatter_input", side)?;
            Ok(())
        },
    )?;

    let p = plan.clone();
    let delay = opts.side_task_delay;
    g.add_task(TASK_HUFFMAN_DECODE, &["huff_input"], &["codes"], move |c| {
        let input = c.read::<Parts>("huff_input")?;
        std::thread::sleep(delay);
        let codes = if constant {
            Vec::new()
        } else {
            tagged(
                &p,
                StageKind::PrimaryCodec,
                stages::decode_codes(&p, &input, dims.len(), radius),
            )
            .map_err(boxed)?
        };
        c.write("codes", codes)?;
        Ok(())
    })?;

    let p = plan.clone();
    g.add_task(
        TASK_OUTLIER_SCATTER,
        &["scatter_input"],
        &["recon_init"],
        move |c| {
            let side = c.read::<Parts>("scatter_input")?;
            std::thread::sleep(delay);
            let out: Option<ScatterOut> = if constant {
                None
            } else {
                Some(
                    tagged(&p, StageKind::Predict, stages::scatter(&p, &side, dims))
                        .map_err(boxed)?,
                )
            };
            c.write("recon_init", out)?;
            Ok(())
        },
    )?;

    let p = plan;
    g.add_task(
        TASK_RECONSTRUCT,
        &["codes", "recon_init"],
        &[DECOMPRESS_OUTPUT],
        move |c| {
            // constant archives leave the output empty; the caller fills it
            let field = match bound {
                None => None,
                Some(bound) => {
                    let codes = c.read::<Vec<u32>>("codes")?;
                    let init = c.read::<Option<ScatterOut>>("recon_init")?;
                    let init = (*init).clone().expect("scatter output present");
                    Some(
                        tagged(
                            &p,
                            StageKind::Predict,
                            stages::reconstruct(&p, &codes, init, &bound, dims, radius),
                        )
                        .map_err(boxed)?,
                    )
                }
            };
            c.write(DECOMPRESS_OUTPUT, field)?;
            Ok(())
        },
    )?;
    Ok(g)
}

/// Runs the decompression graph on `workers` threads.
pub fn decompress_graph(
    registry: &Registry,
    a: &Archive,
    workers: usize,
    opts: DecompressGraphOptions,
) -> Result<(Field, ExecutionTrace), PipelineError> {
    let g = build_decompress_graph(registry, a, opts)?;
    let run = g.execute(workers).map_err(unwrap_task_error)?;
    let out = run.get::<Option<Field>>(DECOMPRESS_OUTPUT)?;
    let field = match &*out {
        Some(f) => f.clone(),
        None => tagged_as(TASK_PARSE, stages::constant_field(a))?,
    };
    Ok((field, run.trace))
}

/// Compression as a graph: outlier/anchor serialization runs alongside the
/// histogram and entropy coder. Produces the same bytes as
/// [`Registry::compress`].
pub fn build_compress_graph(
    registry: &Registry,
    field: Field,
    spec: ErrorBoundSpec,
    pipeline: PipelineHandle,
) -> Result<TaskGraph, PipelineError> {
    let plan = Arc::new(registry.plan(pipeline)?.clone());
    let secondary = registry.secondary_codecs().clone();
    let id = pipeline.id();
    let dims = field.dims();

    let mut g = TaskGraph::new();
    g.add_input("field", field)?;
    for b in [
        "bound",
        "predicted",
        "hist",
        "code_segs",
        "side_segs",
        COMPRESS_OUTPUT,
    ] {
        g.add_buffer(b)?;
    }

    let p = plan.clone();
    g.add_task(
        &p.stage_name(StageKind::Preprocess),
        &["field"],
        &["bound"],
        move |c| {
            let f = c.read::<Field>("field")?;
            let prepared =
                tagged(&p, StageKind::Preprocess, stages::preprocess(&f, spec)).map_err(boxed)?;
            c.write("bound", prepared)?;
            Ok(())
        },
    )?;

    let p = plan.clone();
    g.add_task(
        &p.stage_name(StageKind::Predict),
        &["field", "bound"],
        &["predicted"],
        move |c| {
            let f = c.read::<Field>("field")?;
            let out: Option<Predicted> = match *c.read::<Prepared>("bound")? {
                Prepared::Constant(_) => None,
                Prepared::Bound(b) => Some(
                    tagged(&p, StageKind::Predict, stages::predict(&p, &f, &b)).map_err(boxed)?,
                ),
            };
            c.write("predicted", out)?;
            Ok(())
        },
    )?;

    let p = plan.clone();
    g.add_task(
        &p.stage_name(StageKind::Analysis),
        &["predicted"],
        &["hist"],
        move |c| {
            let pr = c.read::<Option<Predicted>>("predicted")?;
            let hist = match &*pr {
                Some(pr) => tagged(&p, StageKind::Analysis, stages::analyze(&p, &pr.quant))
                    .map_err(boxed)?,
                None => None,
            };
            c.write("hist", hist)?;
            Ok(())
        },
    )?;

    let p = plan.clone();
    g.add_task(
        &p.stage_name(StageKind::PrimaryCodec),
        &["predicted", "hist"],
        &["code_segs"],
        move |c| {
            let pr = c.read::<Option<Predicted>>("predicted")?;
            let hist = c.read::<Option<crate::encode::Histogram>>("hist")?;
            let segs = match &*pr {
                Some(pr) => tagged(
                    &p,
                    StageKind::PrimaryCodec,
                    stages::encode_codes(&p, &pr.quant, hist.as_ref().as_ref()),
                )
                .map_err(boxed)?,
                None => Vec::new(),
            };
            c.write("code_segs", segs)?;
            Ok(())
        },
    )?;

    g.add_task("encode-side", &["predicted"], &["side_segs"], move |c| {
        let pr = c.read::<Option<Predicted>>("predicted")?;
        let segs = match &*pr {
            Some(pr) => stages::encode_side(pr),
            None => Vec::new(),
        };
        c.write("side_segs", segs)?;
        Ok(())
    })?;

    let p = plan;
    g.add_task(
        "assemble",
        &["bound", "code_segs", "side_segs"],
        &[COMPRESS_OUTPUT],
        move |c| {
            let archive = match *c.read::<Prepared>("bound")? {
                Prepared::Constant(v) => stages::header(id, spec, v, v, dims, p.radius, Vec::new()),
                Prepared::Bound(b) => {
                    let mut segs = (*c.read::<Vec<crate::archive::Segment>>("code_segs")?).clone();
                    segs.extend(
                        c.read::<Vec<crate::archive::Segment>>("side_segs")?
                            .iter()
                            .cloned(),
                    );
                    let segs = tagged(
                        &p,
                        StageKind::SecondaryCodec,
                        stages::wrap_secondary(&p, &secondary, segs),
                    )
                    .map_err(boxed)?;
                    stages::header(id, spec, b.data_min, b.data_max, dims, p.radius, segs)
                }
            };
            c.write(COMPRESS_OUTPUT, archive)?;
            Ok(())
        },
    )?;
    Ok(g)
}

pub fn compress_graph(
    registry: &Registry,
    field: &Field,
    spec: ErrorBoundSpec,
    pipeline: impl Into<PipelineHandle>,
    workers: usize,
) -> Result<(Archive, ExecutionTrace), PipelineError> {
    let g = build_compress_graph(registry, field.clone(), spec, pipeline.into())?;
    let run = g.execute(workers).map_err(unwrap_task_error)?;
    let a = run.get::<Archive>(COMPRESS_OUTPUT)?;
    Ok(((*a).clone(), run.trace))
}
