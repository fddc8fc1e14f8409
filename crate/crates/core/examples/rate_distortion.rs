//! Rate-distortion table for the three presets on a synthetic field.
//!
//! ```text
//! cargo run --release --example rate_distortion -- [kind:dims[:seed]]
//! ```

use fzpipe::bound::ErrorBoundSpec;
use fzpipe::data::{generate, SyntheticSpec};
use fzpipe::metrics::{quality, rate};
use fzpipe::pipeline::{compress, decompress, Preset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let arg = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "smooth-trig:64x64x64:1".into());
    let spec: SyntheticSpec = arg.parse()?;
    let field = generate(&spec)?;
    println!("{arg}: {} values", field.len());
    println!(
        "{:<8} {:>7} {:>9} {:>9} {:>10}",
        "preset", "eb", "cr", "bitrate", "psnr_db"
    );
    for preset in Preset::ALL {
        for eb in [1e-6, 1e-4, 1e-2] {
            let archive = compress(&field, ErrorBoundSpec::relative(eb)?, preset)?;
            let recon = decompress(&archive)?;
            let r = rate(
                field.size_bytes(),
                archive.serialized_len() as u64,
                field.len() as u64,
            )?;
            let (lo, hi) = field.min_max();
            let q = quality(&field, &recon, eb * (hi as f64 - lo as f64))?;
            assert!(q.bound_satisfied);
            println!(
                "{:<8} {:>7.0e} {:>9.3} {:>9.4} {:>10.3}",
                preset.name(),
                eb,
                r.cr,
                r.bitrate_bits_per_value,
                q.psnr_db
            );
        }
    }
    Ok(())
}
