//! Bit-plane transpose with zero-word elision.
//!
//! Codes are truncated to 16 bits and grouped into blocks of 256 (the last
//! block zero-padded). Within a block, bit `b` of code `i` lands in plane `b`
//! at bit position `i` (LSB-first within each byte), giving 16 planes of 32
//! bytes. Each block is then read as 128 little-endian 32-bit words; zero
//! words are dropped and a bitmap (bit `w` of the block's 16 bitmap bytes,
//! LSB-first) marks the survivors.

use super::EncodeError;

pub const BLOCK_CODES: usize = 256;
pub const CODE_WIDTH: usize = 16;
pub const WORDS_PER_BLOCK: usize = BLOCK_CODES * CODE_WIDTH / 32;
pub const BITMAP_BYTES_PER_BLOCK: usize = WORDS_PER_BLOCK / 8;
pub const MAX_RADIUS: u32 = 1 << 15;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitshuffleEncoded {
    pub bitmap: Vec<u8>,
    pub payload: Vec<u8>,
}

fn check_radius(radius: u32) -> Result<(), EncodeError> {
    if radius == 0 || radius > MAX_RADIUS {
        return Err(EncodeError::RadiusTooLarge(radius));
    }
    Ok(())
}

pub fn block_count(n: usize) -> usize {
    n.div_ceil(BLOCK_CODES)
}

/// Transposes one block of codes into 128 plane-major words.
fn shuffle_block(codes: &[u32]) -> [u32; WORDS_PER_BLOCK] {
    let mut planes = [0u8; BLOCK_CODES * CODE_WIDTH / 8];
    for (i, &c) in codes.iter().enumerate() {
        let c = c as u16;
        if c == 0 {
            continue;
        }
        for b in 0..CODE_WIDTH {
            if (c >> b) & 1 == 1 {
                planes[b * 32 + i / 8] |= 1 << (i % 8);
            }
        }
    }
    let mut words = [0u32; WORDS_PER_BLOCK];
    for (w, chunk) in words.iter_mut().zip(planes.chunks_exact(4)) {
        *w = u32::from_le_bytes(chunk.try_into().unwrap());
    }
    words
}

fn unshuffle_block(words: &[u32; WORDS_PER_BLOCK], out: &mut [u32; BLOCK_CODES]) {
    let mut planes = [0u8; BLOCK_CODES * CODE_WIDTH / 8];
    for (chunk, w) in planes.chunks_exact_mut(4).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    out.fill(0);
    for b in 0..CODE_WIDTH {
        for byte in 0..32 {
            let bits = planes[b * 32 + byte];
            if bits == 0 {
                continue;
            }
            for k in 0..8 {
                if (bits >> k) & 1 == 1 {
                    out[byte * 8 + k] |= 1 << b;
                }
            }
        }
    }
}

pub fn bitshuffle_encode(codes: &[u32], radius: u32) -> Result<BitshuffleEncoded, EncodeError> {
    check_radius(radius)?;
    crate::quant::check_codes(codes, radius)?;
    let blocks = block_count(codes.len());
    let mut bitmap = vec![0u8; blocks * BITMAP_BYTES_PER_BLOCK];
    let mut payload = Vec::new();
    for (bi, chunk) in codes.chunks(BLOCK_CODES).enumerate() {
        let words = shuffle_block(chunk);
        let map = &mut bitmap[bi * BITMAP_BYTES_PER_BLOCK..(bi + 1) * BITMAP_BYTES_PER_BLOCK];
        for (w, &word) in words.iter().enumerate() {
            if word != 0 {
                map[w / 8] |= 1 << (w % 8);
                payload.extend_from_slice(&word.to_le_bytes());
            }
        }
    }
    Ok(BitshuffleEncoded { bitmap, payload })
}

/// Exact inverse of [`bitshuffle_encode`]; padding codes past `n` must be zero.
pub fn bitshuffle_decode(
    bitmap: &[u8],
    payload: &[u8],
    n: usize,
    radius: u32,
) -> Result<Vec<u32>, EncodeError> {
    check_radius(radius)?;
    let blocks = block_count(n);
    let map_len = blocks * BITMAP_BYTES_PER_BLOCK;
    if bitmap.len() < map_len {
        return Err(EncodeError::Truncated);
    }
    if bitmap.len() > map_len {
        return Err(EncodeError::BitmapPayloadMismatch);
    }
    let live: usize = bitmap.iter().map(|b| b.count_ones() as usize).sum();
    if live * 4 != payload.len() {
        return Err(EncodeError::BitmapPayloadMismatch);
    }

    let alphabet = 2 * radius;
    let mut out = Vec::with_capacity(blocks * BLOCK_CODES);
    let mut words_in = payload.chunks_exact(4);
    let mut block = [0u32; BLOCK_CODES];
    for bi in 0..blocks {
        let map = &bitmap[bi * BITMAP_BYTES_PER_BLOCK..(bi + 1) * BITMAP_BYTES_PER_BLOCK];
        let mut words = [0u32; WORDS_PER_BLOCK];
        for (w, word) in words.iter_mut().enumerate() {
            if (map[w / 8] >> (w % 8)) & 1 == 1 {
                *word = u32::from_le_bytes(words_in.next().unwrap().try_into().unwrap());
                if *word == 0 {
                    return Err(EncodeError::CorruptStream("bitmap marks a zero word"));
                }
            }
        }
        unshuffle_block(&words, &mut block);
        out.extend_from_slice(&block);
    }
    if out[n..].iter().any(|&c| c != 0) {
        return Err(EncodeError::CorruptStream("non-zero block padding"));
    }
    out.truncate(n);
    if let Some(index) = out.iter().position(|&c| c >= alphabet) {
        return Err(EncodeError::CodeOutOfRange {
            index,
            code: out[index],
            alphabet: alphabet as u64,
        });
    }
    Ok(out)
}
