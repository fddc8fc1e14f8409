//! Modular error-bounded lossy compression for `f32` arrays.
//!
//! A pipeline is a chain of stages: bound resolution, a predictor
//! (Lorenzo or multi-level interpolation) with linear quantization, an
//! optional histogram, a lossless primary codec (Huffman or bitshuffle) and
//! an optional secondary byte codec. Three presets are built in; custom
//! pipelines can be registered from a small config language.
//!
//! ```
//! use fzpipe::{compress, decompress, Dims, ErrorBoundSpec, Field, Preset};
//!
//! let dims = Dims::d2(32, 48).unwrap();
//! let field = Field::from_fn(dims, |ix| (ix[0] as f32 * 0.1).sin() + ix[1] as f32 * 0.01).unwrap();
//! let spec = ErrorBoundSpec::relative(1e-3).unwrap();
//! let archive = compress(&field, spec, Preset::Default).unwrap();
//! let bytes = archive.to_bytes().unwrap();
//!
//! let back = decompress(&fzpipe::Archive::from_bytes(&bytes).unwrap()).unwrap();
//! let (lo, hi) = field.min_max();
//! let eb = 1e-3 * (hi as f64 - lo as f64);
//! assert!(field.data().iter().zip(back.data()).all(|(a, b)| (a - b).abs() as f64 <= eb));
//! ```
//!
//! Decompression of Huffman-coded archives can also run as a task graph
//! whose edges are inferred from declared buffer reads and writes; see
//! [`pipeline::decompress_graph`] and [`pipeline::TaskGraph`].

pub mod archive;
pub mod bound;
pub mod cli;
pub mod data;
pub mod encode;
pub mod field;
pub mod metrics;
pub mod pipeline;
pub mod predict;
pub mod quant;

pub use archive::{Archive, ArchiveError, Segment, SegmentKind};
pub use bound::{EbMode, ErrorBoundSpec, ResolvedBound};
pub use field::{Dims, Field, FieldError};
pub use pipeline::{
    compress, compress_with_report, decompress, PipelineError, PipelineHandle, Preset, Registry,
};
