//! `fzpipe` command-line front end.
//!
//! Exit codes: 0 success (or bound met), 1 bound violated, 2 usage or bad
//! parameters, 3 data / format errors.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::archive::{parse_archive, Archive};
use crate::bound::{EbMode, ErrorBoundSpec, ResolvedBound};
use crate::data::{generate, read_raw_f32, write_raw_f32, DataError, SyntheticKind, SyntheticSpec};
use crate::field::{Dims, Field};
use crate::metrics::{median_duration, overall_speedup, quality, rate, throughput, SpeedupInputs};
use crate::pipeline::{
    compress_graph, decompress_graph, parse_pipeline_config, PipelineError, PipelineHandle, Preset,
    PrimaryCodec, Registry,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BOUND_VIOLATED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

/// Column order of `bench` output. Downstream tooling depends on it.
pub const CSV_HEADER: &str =
    "dataset,pipeline,eb_mode,eb,cr,bitrate,psnr_db,max_err,comp_gbps,decomp_gbps,speedup";

#[derive(Debug, Parser)]
#[command(
    name = "fzpipe",
    version,
    about = "Error-bounded lossy compression for f32 fields"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compress a raw little-endian f32 file into an archive.
    Compress(CompressArgs),
    /// Rebuild a raw f32 file from an archive.
    Decompress(DecompressArgs),
    /// Compare two raw files and report error statistics.
    Verify(VerifyArgs),
    /// Rate-distortion and speedup table as CSV.
    Bench(BenchArgs),
    /// Write a deterministic synthetic field.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct PipelineFileArg {
    /// Register a custom pipeline from a plain-text config before running.
    #[arg(long = "pipeline-file", value_name = "FILE")]
    pub pipeline_file: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    #[arg(short, long, value_name = "RAW")]
    pub input: PathBuf,
    /// Extents, slowest first, e.g. 512x512x512.
    #[arg(short, long)]
    pub dims: Dims,
    #[arg(long)]
    pub eb: f64,
    #[arg(long, default_value = "rel")]
    pub mode: EbMode,
    /// default | speed | quality | path to a pipeline config.
    #[arg(long, default_value = "default")]
    pub pipeline: String,
    #[command(flatten)]
    pub files: PipelineFileArg,
    #[arg(short, long, value_name = "ARCHIVE")]
    pub output: PathBuf,
    /// Run the stages on the task-graph executor (same bytes).
    #[arg(long)]
    pub graph: bool,
}

#[derive(Debug, Args)]
pub struct DecompressArgs {
    #[arg(short, long, value_name = "ARCHIVE")]
    pub input: PathBuf,
    #[arg(short, long, value_name = "RAW")]
    pub output: PathBuf,
    #[command(flatten)]
    pub files: PipelineFileArg,
    /// Decode with the task-graph executor where the pipeline allows it.
    #[arg(long)]
    pub graph: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Original raw file.
    #[arg(short = 'a', long = "orig")]
    pub orig: PathBuf,
    /// Reconstructed raw file.
    #[arg(short = 'b', long = "recon")]
    pub recon: PathBuf,
    #[arg(short, long)]
    pub dims: Dims,
    /// Bound to check; without it the report is informational.
    #[arg(long)]
    pub eb: Option<f64>,
    #[arg(long, default_value = "rel")]
    pub mode: EbMode,
    /// Archive whose size is used for cr/bitrate.
    #[arg(long)]
    pub archive: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, conflicts_with = "gen", requires = "dims", value_name = "RAW")]
    pub input: Option<PathBuf>,
    #[arg(short, long)]
    pub dims: Option<Dims>,
    /// Synthetic input, `kind:dims[:seed[:key=value,...]]`.
    #[arg(long, required_unless_present = "input")]
    pub gen: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "default,speed,quality")]
    pub pipelines: Vec<String>,
    #[arg(
        long = "eb-list",
        value_delimiter = ',',
        default_value = "1e-2,1e-4,1e-6"
    )]
    pub eb_list: Vec<f64>,
    #[arg(long, default_value = "rel")]
    pub mode: EbMode,
    /// Medium bandwidth in GB/s for the speedup model.
    #[arg(long)]
    pub bw: f64,
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    /// Output CSV (stdout if omitted).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub files: PipelineFileArg,
    #[arg(long)]
    pub graph: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// smooth-trig | filtered-noise | piecewise-constant | particle-1d
    #[arg(long)]
    pub kind: String,
    #[arg(short, long)]
    pub dims: Dims,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Generator parameter, repeatable: --param width=5
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("error bound violated: max error {max_err:e} > {eb_abs:e}")]
    BoundViolated { max_err: f64, eb_abs: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::BoundViolated { .. } => EXIT_BOUND_VIOLATED,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn usage_err(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// Worker count for graph execution: available cores, capped by
/// `FZPIPE_THREADS` when set.
pub fn worker_count() -> usize {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var("FZPIPE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        Some(cap) if cap >= 1 => cap.min(cores),
        _ => cores,
    }
}

fn registry_with(files: &PipelineFileArg) -> Result<Registry, CliError> {
    let mut reg = Registry::new();
    for f in &files.pipeline_file {
        load_pipeline_file(&mut reg, f)?;
    }
    Ok(reg)
}

fn load_pipeline_file(reg: &mut Registry, path: &Path) -> Result<PipelineHandle, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| usage_err(format!("{}: {e}", path.display())))?;
    let spec =
        parse_pipeline_config(&text).map_err(|e| usage_err(format!("{}: {e}", path.display())))?;
    reg.register(spec)
        .map_err(|e| usage_err(format!("{}: {e}", path.display())))
}

/// Resolves `--pipeline` to a preset or registers a config file.
fn resolve_pipeline(reg: &mut Registry, name: &str) -> Result<PipelineHandle, CliError> {
    if let Ok(p) = name.parse::<Preset>() {
        return Ok(p.handle());
    }
    let path = Path::new(name);
    if path.exists() {
        return load_pipeline_file(reg, path);
    }
    Err(usage_err(format!(
        "pipeline {name:?} is neither a preset (default, speed, quality) nor a readable file"
    )))
}

fn bound_spec(mode: EbMode, eb: f64) -> Result<ErrorBoundSpec, CliError> {
    ErrorBoundSpec::new(mode, eb).map_err(usage_err)
}

fn pipeline_err(e: PipelineError) -> CliError {
    match e {
        PipelineError::Stage { .. }
        | PipelineError::UnknownPipelineId(_)
        | PipelineError::Graph(_) => data_err(e),
        other => usage_err(other),
    }
}

fn compress_with(
    reg: &Registry,
    field: &Field,
    spec: ErrorBoundSpec,
    h: PipelineHandle,
    graph: bool,
) -> Result<Archive, CliError> {
    if graph {
        compress_graph(reg, field, spec, h, worker_count())
            .map(|(a, _)| a)
            .map_err(pipeline_err)
    } else {
        reg.compress(field, spec, h).map_err(pipeline_err)
    }
}

fn decompress_with(reg: &Registry, a: &Archive, graph: bool) -> Result<Field, CliError> {
    let graph_ok = graph
        && reg
            .handle(a.pipeline_id)
            .and_then(|h| reg.plan(h))
            .is_ok_and(|p| p.primary == PrimaryCodec::Huffman);
    if graph_ok {
        decompress_graph(reg, a, worker_count(), Default::default())
            .map(|(f, _)| f)
            .map_err(pipeline_err)
    } else {
        reg.decompress(a).map_err(pipeline_err)
    }
}

fn read_field(path: &Path, dims: Dims) -> Result<Field, CliError> {
    read_raw_f32(path, dims).map_err(data_err)
}

fn cmd_compress(args: CompressArgs) -> Result<(), CliError> {
    let mut reg = registry_with(&args.files)?;
    let h = resolve_pipeline(&mut reg, &args.pipeline)?;
    let spec = bound_spec(args.mode, args.eb)?;
    let field = read_field(&args.input, args.dims)?;
    let t = Instant::now();
    let archive = compress_with(&reg, &field, spec, h, args.graph)?;
    let secs = t.elapsed().as_secs_f64();
    let bytes = archive.to_bytes().map_err(data_err)?;
    fs::write(&args.output, &bytes)
        .map_err(|e| data_err(format!("{}: {e}", args.output.display())))?;
    let r = rate(field.size_bytes(), bytes.len() as u64, field.len() as u64).map_err(data_err)?;
    eprintln!(
        "cr={:.4} bitrate={:.4} comp_seconds={:.6} comp_gbps={:.4}",
        r.cr,
        r.bitrate_bits_per_value,
        secs,
        throughput(field.size_bytes(), secs)
    );
    Ok(())
}

fn cmd_decompress(args: DecompressArgs) -> Result<(), CliError> {
    let reg = registry_with(&args.files)?;
    let bytes =
        fs::read(&args.input).map_err(|e| data_err(format!("{}: {e}", args.input.display())))?;
    let archive = parse_archive(&bytes).map_err(data_err)?;
    let t = Instant::now();
    let field = decompress_with(&reg, &archive, args.graph)?;
    let secs = t.elapsed().as_secs_f64();
    write_raw_f32(&field, &args.output).map_err(data_err)?;
    eprintln!(
        "decomp_seconds={:.6} decomp_gbps={:.4}",
        secs,
        throughput(field.size_bytes(), secs)
    );
    Ok(())
}

/// Absolute bound for `verify`. A constant original under a relative bound
/// uses a unit range.
fn verify_bound(orig: &Field, mode: EbMode, eb: f64) -> Result<f64, CliError> {
    let spec = bound_spec(mode, eb)?;
    let (lo, hi) = orig.min_max();
    if lo == hi {
        return Ok(eb);
    }
    ResolvedBound::from_parts(spec, lo, hi)
        .map(|b| b.eb_abs)
        .map_err(usage_err)
}

fn cmd_verify(args: VerifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let a = read_field(&args.orig, args.dims)?;
    let b = read_field(&args.recon, args.dims)?;
    let eb_abs = match args.eb {
        Some(eb) => Some(verify_bound(&a, args.mode, eb)?),
        None => None,
    };
    let q = quality(&a, &b, eb_abs.unwrap_or(f64::INFINITY)).map_err(data_err)?;
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(data_err);
    w(out, format!("max_err={:e}", q.max_abs_err))?;
    w(out, format!("mse={:e}", q.mse))?;
    w(out, format!("psnr_db={}", q.psnr_db))?;
    w(out, format!("nrmse={:e}", q.nrmse))?;
    if let Some(path) = &args.archive {
        let size = fs::metadata(path).map_err(data_err)?.len();
        let r = rate(a.size_bytes(), size, a.len() as u64).map_err(data_err)?;
        w(out, format!("cr={}", r.cr))?;
        w(out, format!("bitrate={}", r.bitrate_bits_per_value))?;
    }
    if let Some(eb_abs) = eb_abs {
        w(out, format!("eb_abs={eb_abs:e}"))?;
        w(out, format!("bound_satisfied={}", q.bound_satisfied))?;
        if !q.bound_satisfied {
            return Err(CliError::BoundViolated {
                max_err: q.max_abs_err,
                eb_abs,
            });
        }
    }
    Ok(())
}

/// One CSV row of `bench`.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub dataset: String,
    pub pipeline: String,
    pub eb_mode: EbMode,
    pub eb: f64,
    pub cr: f64,
    pub bitrate: f64,
    pub psnr_db: f64,
    pub max_err: f64,
    pub comp_gbps: f64,
    pub decomp_gbps: f64,
    pub speedup: f64,
}

impl BenchRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{:e},{},{},{},{:e},{},{},{}",
            self.dataset,
            self.pipeline,
            self.eb_mode.label(),
            self.eb,
            self.cr,
            self.bitrate,
            self.psnr_db,
            self.max_err,
            self.comp_gbps,
            self.decomp_gbps,
            self.speedup
        )
    }
}

fn time_runs<T>(
    runs: usize,
    mut f: impl FnMut() -> Result<T, CliError>,
) -> Result<(T, Duration), CliError> {
    let mut times = Vec::with_capacity(runs);
    let mut last = None;
    for _ in 0..runs {
        let t = Instant::now();
        last = Some(f()?);
        times.push(t.elapsed());
    }
    let median = median_duration(&times)
        .unwrap_or_default()
        .max(Duration::from_nanos(1));
    Ok((last.expect("runs >= 1"), median))
}

fn cmd_bench(args: BenchArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if args.runs == 0 {
        return Err(usage_err("--runs must be at least 1"));
    }
    if !(args.bw.is_finite() && args.bw > 0.0) {
        return Err(usage_err("--bw must be a positive number of GB/s"));
    }
    let mut reg = registry_with(&args.files)?;
    let (dataset, field) = match (&args.input, &args.gen) {
        (Some(path), _) => {
            let dims = args.dims.ok_or_else(|| usage_err("--input needs --dims"))?;
            let name = path
                .file_stem()
                .map_or("input".into(), |s| s.to_string_lossy().into_owned());
            (name, read_field(path, dims)?)
        }
        (None, Some(g)) => {
            let spec: SyntheticSpec = g.parse().map_err(usage_err)?;
            (g.replace(',', ";"), generate(&spec).map_err(usage_err)?)
        }
        (None, None) => return Err(usage_err("give --input or --gen")),
    };
    let mut handles = Vec::new();
    for p in &args.pipelines {
        handles.push((p.clone(), resolve_pipeline(&mut reg, p)?));
    }
    let specs = args
        .eb_list
        .iter()
        .map(|&eb| bound_spec(args.mode, eb).map(|s| (eb, s)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut sink: Box<dyn Write + '_> = match &args.csv {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?,
        )),
        None => Box::new(stdout),
    };
    writeln!(sink, "{CSV_HEADER}")
        .and_then(|_| sink.flush())
        .map_err(data_err)?;
    let input_bytes = field.size_bytes();
    let (lo, hi) = field.min_max();
    for (name, h) in &handles {
        for &(eb, spec) in &specs {
            let (archive, comp) = time_runs(args.runs, || {
                compress_with(&reg, &field, spec, *h, args.graph)
            })?;
            let (recon, decomp) =
                time_runs(args.runs, || decompress_with(&reg, &archive, args.graph))?;
            let size = archive.serialized_len() as u64;
            let r = rate(input_bytes, size, field.len() as u64).map_err(data_err)?;
            let eb_abs = if lo == hi {
                eb
            } else {
                ResolvedBound::from_parts(spec, lo, hi)
                    .map_err(usage_err)?
                    .eb_abs
            };
            let q = quality(&field, &recon, eb_abs).map_err(data_err)?;
            let comp_gbps = throughput(input_bytes, comp.as_secs_f64());
            let row = BenchRow {
                dataset: dataset.clone(),
                pipeline: name.replace(',', ";"),
                eb_mode: args.mode,
                eb,
                cr: r.cr,
                bitrate: r.bitrate_bits_per_value,
                psnr_db: q.psnr_db,
                max_err: q.max_abs_err,
                comp_gbps,
                decomp_gbps: throughput(input_bytes, decomp.as_secs_f64()),
                speedup: overall_speedup(SpeedupInputs {
                    bw_gbps: args.bw,
                    t_compr_gbps: comp_gbps,
                    cr: r.cr,
                })
                .map_err(data_err)?,
            };
            writeln!(sink, "{}", row.to_csv())
                .and_then(|_| sink.flush())
                .map_err(data_err)?;
        }
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    let kind: SyntheticKind = args.kind.parse().map_err(usage_err)?;
    let mut spec = SyntheticSpec::new(kind, args.dims, args.seed);
    for p in &args.params {
        let (k, v) = crate::data::parse_param(p).map_err(usage_err)?;
        spec.params.insert(k, v);
    }
    let field = generate(&spec).map_err(|e| match e {
        DataError::BadParams(_) => usage_err(e),
        other => data_err(other),
    })?;
    write_raw_f32(&field, &args.output).map_err(data_err)
}

/// Runs one parsed command, writing reports to `stdout`.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Compress(a) => cmd_compress(a),
        Command::Decompress(a) => cmd_decompress(a),
        Command::Verify(a) => cmd_verify(a, stdout),
        Command::Bench(a) => cmd_bench(a, stdout),
        Command::Gen(a) => cmd_gen(a),
    }
}

/// Full entry point: parses `args` and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match execute(cli, &mut lock) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("fzpipe: {e}");
            e.exit_code()
        }
    }
}
