//! Lorenzo and interpolation predictors side by side: code distribution,
//! outliers and reconstruction error at the same bound.

use fzpipe::bound::resolve_bound;
use fzpipe::data::{generate, SyntheticKind, SyntheticSpec};
use fzpipe::encode::histogram_exact;
use fzpipe::metrics::quality;
use fzpipe::predict::{
    interp_quantize, interp_reconstruct, lorenzo_quantize, lorenzo_reconstruct, InterpConfig,
    DEFAULT_RADIUS,
};
use fzpipe::quant::QuantOutput;
use fzpipe::{Dims, ErrorBoundSpec};

fn summary(name: &str, q: &QuantOutput) -> Result<(), Box<dyn std::error::Error>> {
    let h = histogram_exact(&q.codes, q.radius)?;
    let center = h.bins[q.radius as usize] as f64 / h.total as f64;
    println!(
        "{name:<7} entropy {:.3} bits, {:.1}% center codes, {} outliers",
        h.entropy_bits(),
        100.0 * center,
        q.outliers.len()
    );
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dims = Dims::d3(80, 80, 80)?;
    let field = generate(&SyntheticSpec::new(SyntheticKind::SmoothTrig, dims, 5))?;
    for eb in [1e-2, 1e-4] {
        let bound = resolve_bound(&field, ErrorBoundSpec::relative(eb)?)?;
        println!("eb {eb:e} (absolute {:.3e})", bound.eb_abs);

        let lq = lorenzo_quantize(&field, &bound, DEFAULT_RADIUS)?;
        summary("lorenzo", &lq)?;
        let lr = lorenzo_reconstruct(&lq, &bound)?;

        let cfg = InterpConfig::default();
        let iq = interp_quantize(&field, &bound, DEFAULT_RADIUS, &cfg)?;
        summary("interp", &iq.quant)?;
        println!("        anchor grid: {} bytes", iq.anchors.len());
        let ir = interp_reconstruct(&iq.quant, &iq.anchors, &bound, &cfg)?;

        for (name, r) in [("lorenzo", &lr), ("interp", &ir)] {
            let q = quality(&field, r, bound.eb_abs)?;
            println!(
                "{name:<7} max err {:.3e}, psnr {:.2} dB, within bound: {}",
                q.max_abs_err, q.psnr_db, q.bound_satisfied
            );
        }
    }

    // Fields too small for the anchor grid are refused by interp; the
    // pipelines fall back to Lorenzo for them.
    let small = Dims::d2(12, 400)?;
    println!(
        "interp on {small}: {:?}",
        InterpConfig::default().check_field(small).err()
    );
    Ok(())
}
