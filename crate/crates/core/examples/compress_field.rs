//! Compress a raw f32 file (or a generated field), write the archive, read it
//! back and report the error and per-stage timings.
//!
//! ```text
//! cargo run --release --example compress_field -- [RAW DIMS] [--eb 1e-4] [--preset quality]
//! ```

use std::time::Instant;

use fzpipe::data::{generate, read_raw_f32, SyntheticKind, SyntheticSpec};
use fzpipe::metrics::{quality, rate};
use fzpipe::{compress_with_report, decompress, Archive, Dims, ErrorBoundSpec, Preset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut positional = Vec::new();
    let mut eb = 1e-4;
    let mut preset = Preset::Default;
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        match a.as_str() {
            "--eb" => eb = args.next().ok_or("--eb needs a value")?.parse()?,
            "--preset" => preset = args.next().ok_or("--preset needs a value")?.parse()?,
            _ => positional.push(a),
        }
    }
    let field = match positional.as_slice() {
        [path, dims] => read_raw_f32(path, dims.parse::<Dims>()?)?,
        [] => generate(&SyntheticSpec::new(
            SyntheticKind::SmoothTrig,
            Dims::d3(64, 64, 64)?,
            7,
        ))?,
        _ => return Err("expected RAW DIMS or nothing".into()),
    };

    let spec = ErrorBoundSpec::relative(eb)?;
    let (archive, report) = compress_with_report(&field, spec, preset)?;
    let bytes = archive.to_bytes()?;
    let out = std::env::temp_dir().join("compress_field.fzm");
    std::fs::write(&out, &bytes)?;
    println!(
        "{} -> {} bytes at {}",
        field.dims(),
        bytes.len(),
        out.display()
    );
    for s in &report.stages {
        println!(
            "  {:<10} {:<11} {:>9.3} ms",
            s.name,
            s.kind.keyword(),
            s.elapsed.as_secs_f64() * 1e3
        );
    }

    let t = Instant::now();
    let back = decompress(&Archive::from_bytes(&std::fs::read(&out)?)?)?;
    let decomp = t.elapsed();
    let (lo, hi) = field.min_max();
    let q = quality(&field, &back, eb * (hi as f64 - lo as f64))?;
    let r = rate(field.size_bytes(), bytes.len() as u64, field.len() as u64)?;
    println!(
        "{preset}: cr {:.2}, {:.3} bits/value, psnr {:.2} dB, max err {:.3e} (bound ok: {}), decompress {:.1} ms",
        r.cr,
        r.bitrate_bits_per_value,
        q.psnr_db,
        q.max_abs_err,
        q.bound_satisfied,
        decomp.as_secs_f64() * 1e3
    );
    Ok(())
}
