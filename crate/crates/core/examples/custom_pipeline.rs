//! Register a custom pipeline from config text, add a secondary byte codec of
//! our own, and compare it with the presets.

use std::sync::Arc;

use fzpipe::data::{generate, SyntheticKind, SyntheticSpec};
use fzpipe::encode::{EncodeError, SecondaryCodec};
use fzpipe::pipeline::pipeline_to_config;
use fzpipe::{Dims, ErrorBoundSpec, Preset, Registry};

/// Byte-wise delta coding; helps when neighboring bytes drift slowly.
struct Delta;

impl SecondaryCodec for Delta {
    fn id(&self) -> u8 {
        7
    }

    fn name(&self) -> &str {
        "delta"
    }

    fn encode(&self, input: &[u8]) -> Vec<u8> {
        let mut prev = 0u8;
        input
            .iter()
            .map(|&b| {
                let d = b.wrapping_sub(prev);
                prev = b;
                d
            })
            .collect()
    }

    fn decode(&self, input: &[u8]) -> Result<Vec<u8>, EncodeError> {
        let mut prev = 0u8;
        Ok(input
            .iter()
            .map(|&d| {
                prev = prev.wrapping_add(d);
                prev
            })
            .collect())
    }
}

const CONFIG: &str = "\
# interpolation with a wider anchor grid, Huffman, then zero-run coding
pipeline id=200
stage name=bounds kind=preprocess
stage name=spline kind=predict predictor=interp anchor_stride=32 radius=1024
stage name=hist kind=analysis histogram=exact
stage name=huff kind=primary codec=huffman
stage name=zrle kind=secondary codec_id=0
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut reg = Registry::new();
    reg.register_secondary_codec(Arc::new(Delta))?;
    let wide = reg.register_config(CONFIG)?;
    let delta = reg.register_config(
        "pipeline id=201\n\
         stage name=lz kind=predict predictor=lorenzo\n\
         stage name=bs kind=primary codec=bitshuffle\n\
         stage name=d kind=secondary codec_id=7\n",
    )?;
    println!("registered pipelines: {:?}", reg.ids());
    println!("{}", pipeline_to_config(reg.spec(wide)?));

    let field = generate(&SyntheticSpec::new(
        SyntheticKind::SmoothTrig,
        Dims::d3(96, 96, 96)?,
        2,
    ))?;
    let spec = ErrorBoundSpec::relative(1e-4)?;
    let handles = [
        ("default", Preset::Default.handle()),
        ("speed", Preset::Speed.handle()),
        ("quality", Preset::Quality.handle()),
        ("interp-32+rle", wide),
        ("lorenzo+bs+delta", delta),
    ];
    for (name, h) in handles {
        let a = reg.compress(&field, spec, h)?;
        let back = reg.decompress(&a)?;
        let cr = field.size_bytes() as f64 / a.serialized_len() as f64;
        assert_eq!(back.dims(), field.dims());
        println!("{name:<18} id {:>3}  cr {cr:>7.2}", h.id());
    }

    // Misconfigured pipelines are rejected with the offending stage named.
    let err = reg
        .register_config("pipeline id=202\nstage name=p kind=predict predictor=cubic\nstage name=h kind=primary codec=huffman\n")
        .unwrap_err();
    println!("rejected: {err}");
    Ok(())
}
