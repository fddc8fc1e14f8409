use fzpipe::data::{generate, SyntheticKind, SyntheticSpec};
use fzpipe::pipeline::{decompress_graph, DecompressGraphOptions};
use fzpipe::{compress, decompress, Archive, Dims, ErrorBoundSpec, Field, Preset, Registry};
use proptest::prelude::*;

fn dims_strategy() -> impl Strategy<Value = Dims> {
    prop_oneof![
        (1usize..3000).prop_map(|n| Dims::d1(n).unwrap()),
        (1usize..70, 1usize..70).prop_map(|(a, b)| Dims::d2(a, b).unwrap()),
        (1usize..24, 1usize..24, 1usize..24).prop_map(|(a, b, c)| Dims::d3(a, b, c).unwrap()),
    ]
}

fn field_strategy() -> impl Strategy<Value = Field> {
    (dims_strategy(), 0usize..3, any::<u64>(), -3.0f64..3.0).prop_map(|(dims, k, seed, exp)| {
        let kind = [
            SyntheticKind::SmoothTrig,
            SyntheticKind::FilteredNoise,
            SyntheticKind::PiecewiseConstant,
        ][k];
        let base = generate(&SyntheticSpec::new(kind, dims, seed)).unwrap();
        let scale = 10f64.powf(exp) as f32;
        Field::new(dims, base.data().iter().map(|v| v * scale).collect()).unwrap()
    })
}

fn bound_strategy() -> impl Strategy<Value = ErrorBoundSpec> {
    prop_oneof![
        prop::sample::select(vec![1e-1, 1e-3, 1e-5])
            .prop_map(|e| ErrorBoundSpec::relative(e).unwrap()),
        (1e-6f64..1.0).prop_map(|e| ErrorBoundSpec::absolute(e).unwrap()),
    ]
}

fn eb_abs(f: &Field, spec: ErrorBoundSpec) -> f64 {
    let (lo, hi) = f.min_max();
    match spec.mode() {
        fzpipe::EbMode::Absolute => spec.magnitude(),
        fzpipe::EbMode::ValueRangeRelative => spec.magnitude() * (hi as f64 - lo as f64),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn every_preset_respects_the_bound(
        f in field_strategy(),
        spec in bound_strategy(),
        p in prop::sample::select(Preset::ALL.to_vec()),
    ) {
        let a = compress(&f, spec, p).unwrap();
        let bytes = a.to_bytes().unwrap();
        let parsed = Archive::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&parsed, &a);
        let back = decompress(&parsed).unwrap();
        prop_assert_eq!(back.dims(), f.dims());
        let bound = eb_abs(&f, spec);
        for (i, (&x, &y)) in f.data().iter().zip(back.data()).enumerate() {
            prop_assert!((x as f64 - y as f64).abs() <= bound, "index {}: {} vs {}", i, x, y);
        }
    }

    #[test]
    fn graph_decompress_matches_sequential(
        f in field_strategy(),
        spec in bound_strategy(),
        quality in any::<bool>(),
        workers in 1usize..5,
    ) {
        let reg = Registry::new();
        let p = if quality { Preset::Quality } else { Preset::Default };
        let a = reg.compress(&f, spec, p).unwrap();
        let seq = reg.decompress(&a).unwrap();
        let (par, trace) = decompress_graph(&reg, &a, workers, DecompressGraphOptions::default()).unwrap();
        prop_assert_eq!(seq, par);
        prop_assert_eq!(trace.entries.len(), 4);
    }

    #[test]
    fn corrupted_archives_fail_cleanly(
        f in field_strategy(),
        p in prop::sample::select(Preset::ALL.to_vec()),
        hits in prop::collection::vec((any::<prop::sample::Index>(), 1u8..=255), 1..4),
    ) {
        let a = compress(&f, ErrorBoundSpec::relative(1e-3).unwrap(), p).unwrap();
        let mut bytes = a.to_bytes().unwrap();
        for (at, mask) in hits {
            let i = at.index(bytes.len());
            bytes[i] ^= mask;
        }
        // Either layer may reject; neither may panic. A constant archive has
        // no payload to check its dims against, so damaged dims there are a
        // valid (possibly enormous) field; skip those.
        if let Ok(parsed) = Archive::from_bytes(&bytes) {
            if !parsed.segments.is_empty() {
                if let Ok(back) = decompress(&parsed) {
                    prop_assert_eq!(back.len(), parsed.dims.len());
                }
            }
        }
    }
}

#[test]
fn constant_fields_roundtrip_exactly() {
    for dims in [
        Dims::d1(1).unwrap(),
        Dims::d2(40, 40).unwrap(),
        Dims::d3(20, 20, 20).unwrap(),
    ] {
        let f = Field::new(dims, vec![-3.25; dims.len()]).unwrap();
        for p in Preset::ALL {
            for spec in [
                ErrorBoundSpec::relative(1e-4).unwrap(),
                ErrorBoundSpec::absolute(1e-4).unwrap(),
            ] {
                let a = compress(&f, spec, p).unwrap();
                assert!(a.segments.is_empty());
                assert_eq!(a.data_min, a.data_max);
                let back =
                    decompress(&Archive::from_bytes(&a.to_bytes().unwrap()).unwrap()).unwrap();
                assert_eq!(back, f);
            }
        }
    }
}

#[test]
fn tighter_bounds_never_shrink_huffman_archives_on_smooth_data() {
    // Bitshuffle is left out: once most codes sit at the center, its size
    // moves by a few bytes either way with the bound.
    let dims = Dims::d3(40, 40, 40).unwrap();
    let f = generate(&SyntheticSpec::new(SyntheticKind::SmoothTrig, dims, 3)).unwrap();
    for p in [Preset::Default, Preset::Quality] {
        let sizes: Vec<usize> = [1e-2, 1e-4, 1e-6]
            .iter()
            .map(|&e| {
                compress(&f, ErrorBoundSpec::relative(e).unwrap(), p)
                    .unwrap()
                    .serialized_len()
            })
            .collect();
        assert!(
            sizes[0] <= sizes[1] && sizes[1] <= sizes[2],
            "{p}: {sizes:?}"
        );
    }
}
