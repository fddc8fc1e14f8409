//! The deterministic synthetic generators: write each to a raw file and
//! print a few statistics.
//!
//! ```text
//! cargo run --example synthetic_data -- [out_dir]
//! ```

use fzpipe::data::{generate, write_raw_f32, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(std::env::temp_dir, Into::into);
    let specs = [
        "smooth-trig:64x64x64:1",
        "smooth-trig:256x256:1:terms=8,max_freq=6",
        "filtered-noise:64x64x64:1:width=1",
        "filtered-noise:64x64x64:1:width=9",
        "piecewise-constant:128x128:4:block=16",
        "particle-1d:100000:2:jitter=0.2",
    ];
    for (i, s) in specs.into_iter().enumerate() {
        let spec: SyntheticSpec = s.parse()?;
        let f = generate(&spec)?;
        let (lo, hi) = f.min_max();
        let mean = f.data().iter().map(|&v| v as f64).sum::<f64>() / f.len() as f64;
        // Mean absolute neighbor difference along the fastest axis, relative
        // to the range: small for smooth data, large for noise.
        let nx = *f.dims().as_slice().last().unwrap();
        let rough = f
            .data()
            .chunks(nx)
            .flat_map(|row| row.windows(2).map(|w| (w[1] - w[0]).abs() as f64))
            .sum::<f64>()
            / (f.len() as f64 * (hi - lo).max(f32::MIN_POSITIVE) as f64);
        let path = dir.join(format!("{i}_{}_{}.raw", spec.kind.name(), f.dims()));
        write_raw_f32(&f, &path)?;
        println!(
            "{s:<45} range [{lo:>9.4}, {hi:>9.4}] mean {mean:>8.4} roughness {rough:.2e} -> {}",
            path.display()
        );
    }
    Ok(())
}
