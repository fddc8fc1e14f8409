//! The lossless stages on their own: histograms, canonical Huffman,
//! bitshuffle with zero-word elision, and the zero-run secondary codec.

use fzpipe::data::SplitMix64;
use fzpipe::encode::{
    bitshuffle_decode, bitshuffle_encode, histogram_exact, histogram_topk, huffman_decode,
    huffman_encode, secondary_decode, secondary_encode, HuffmanCodebook, ZERO_RLE_ID,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let radius = 512u32;
    let mut rng = SplitMix64::new(1);
    // Quantization codes from a decent predictor pile up around the center.
    let codes: Vec<u32> = (0..200_000)
        .map(|_| {
            let u = rng.next_f64();
            let spread = (-(1.0 - u).ln() * 1.5) as i64;
            let sign = if rng.next_u64() & 1 == 0 { 1 } else { -1 };
            (radius as i64 + sign * spread).clamp(0, 2 * radius as i64 - 1) as u32
        })
        .collect();

    let exact = histogram_exact(&codes, radius)?;
    assert_eq!(histogram_topk(&codes, radius, 16)?, exact);
    println!(
        "{} codes, {} distinct symbols, entropy {:.3} bits",
        codes.len(),
        exact.used_symbols(),
        exact.entropy_bits()
    );

    let enc = huffman_encode(&codes, &exact)?;
    let cb = HuffmanCodebook::from_bytes(&enc.codebook.to_bytes())?;
    assert_eq!(huffman_decode(&cb, &enc.bitstream, codes.len())?, codes);
    println!(
        "huffman:    {:>8} bytes ({:.3} bits/code, codebook {} bytes)",
        enc.bitstream.len(),
        enc.bit_count as f64 / codes.len() as f64,
        cb.alphabet()
    );

    let bs = bitshuffle_encode(&codes, radius)?;
    assert_eq!(
        bitshuffle_decode(&bs.bitmap, &bs.payload, codes.len(), radius)?,
        codes
    );
    println!(
        "bitshuffle: {:>8} bytes (bitmap {} + payload {})",
        bs.bitmap.len() + bs.payload.len(),
        bs.bitmap.len(),
        bs.payload.len()
    );

    let rle = secondary_encode(&bs.payload, ZERO_RLE_ID)?;
    assert_eq!(secondary_decode(&rle, ZERO_RLE_ID)?, bs.payload);
    println!(
        "zero-rle on the bitshuffle payload: {} -> {} bytes",
        bs.payload.len(),
        rle.len()
    );

    // Any single flipped bit is caught or changes the output.
    let mut bad = enc.bitstream.clone();
    let mid = bad.len() / 2;
    bad[mid] ^= 0x10;
    match huffman_decode(&cb, &bad, codes.len()) {
        Err(e) => println!("flipped bit rejected: {e}"),
        Ok(v) => {
            let changed = v.iter().zip(&codes).filter(|(a, b)| a != b).count();
            assert!(changed > 0);
            println!("flipped bit decodes to different data ({changed} codes differ)");
        }
    }
    Ok(())
}
