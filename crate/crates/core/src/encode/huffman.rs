//! Canonical, length-limited Huffman coding.
//!
//! Code lengths come from package-merge (limit [`MAX_CODE_LEN`]); codes are
//! assigned canonically in (length, symbol) order, so the codebook is fully
//! described by its lengths. Bits are packed MSB-first and the final byte is
//! zero-padded.

use super::histogram::Histogram;
use super::EncodeError;

pub const MAX_CODE_LEN: u8 = 32;
const LUT_BITS: u32 = 11;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HuffmanCodebook {
    lengths: Vec<u8>,
}

impl HuffmanCodebook {
    /// Validates lengths: at most [`MAX_CODE_LEN`], and either a single used
    /// symbol of length 1, or a complete prefix code (Kraft sum exactly 1).
    pub fn from_lengths(lengths: Vec<u8>) -> Result<Self, EncodeError> {
        if lengths.iter().any(|&l| l > MAX_CODE_LEN) {
            return Err(EncodeError::InvalidCodebook("code length above limit"));
        }
        let used: Vec<u8> = lengths.iter().copied().filter(|&l| l > 0).collect();
        match used.len() {
            0 => {}
            1 if used[0] == 1 => {}
            1 => {
                return Err(EncodeError::InvalidCodebook(
                    "lone symbol must have length 1",
                ))
            }
            _ => {
                let kraft: u64 = used.iter().map(|&l| 1u64 << (MAX_CODE_LEN - l)).sum();
                if kraft != 1u64 << MAX_CODE_LEN {
                    return Err(EncodeError::InvalidCodebook("Kraft sum is not 1"));
                }
            }
        }
        Ok(Self { lengths })
    }

    /// Optimal length-limited code for `hist`.
    pub fn from_histogram(hist: &Histogram) -> Result<Self, EncodeError> {
        Self::from_lengths(package_merge(&hist.bins, MAX_CODE_LEN))
    }

    pub fn lengths(&self) -> &[u8] {
        &self.lengths
    }

    pub fn alphabet(&self) -> usize {
        self.lengths.len()
    }

    /// Serialized form: one length byte per symbol.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.lengths.clone()
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, EncodeError> {
        Self::from_lengths(b.to_vec())
    }

    /// Symbols in canonical order: (length asc, symbol asc).
    fn canonical_order(&self) -> Vec<usize> {
        let mut syms: Vec<usize> = (0..self.lengths.len())
            .filter(|&s| self.lengths[s] > 0)
            .collect();
        syms.sort_by_key(|&s| (self.lengths[s], s));
        syms
    }

    /// Canonical code value per symbol (0 for unused symbols).
    pub fn codes(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.lengths.len()];
        let mut code: u64 = 0;
        let mut prev_len = 0u8;
        for s in self.canonical_order() {
            let len = self.lengths[s];
            code <<= len - prev_len;
            out[s] = code as u32;
            code += 1;
            prev_len = len;
        }
        out
    }

    /// Mean code length under `hist`, in bits per symbol.
    pub fn mean_length(&self, hist: &Histogram) -> f64 {
        if hist.total == 0 {
            return 0.0;
        }
        let bits: u64 = hist
            .bins
            .iter()
            .zip(&self.lengths)
            .map(|(&c, &l)| c * l as u64)
            .sum();
        bits as f64 / hist.total as f64
    }
}

/// Package-merge: optimal code lengths under a maximum length.
///
/// Symbols with zero count get length 0; a single used symbol gets length 1.
/// Ties are broken by symbol index, and leaves sort ahead of packages of
/// equal weight, so the result is deterministic.
pub fn package_merge(counts: &[u64], max_len: u8) -> Vec<u8> {
    let mut lengths = vec![0u8; counts.len()];
    let mut leaves: Vec<(u64, usize)> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| (c, s))
        .collect();
    leaves.sort_unstable();
    let n = leaves.len();
    match n {
        0 => return lengths,
        1 => {
            lengths[leaves[0].1] = 1;
            return lengths;
        }
        _ => {}
    }
    assert!(
        max_len < 64 && (n as u128) <= (1u128 << max_len),
        "alphabet too large for length limit"
    );

    // lists[d] holds the merged list at depth max_len - d as is-package flags
    let mut lists: Vec<Vec<bool>> = Vec::with_capacity(max_len as usize);
    let mut prev: Vec<u128> = leaves.iter().map(|&(c, _)| c as u128).collect();
    lists.push(vec![false; n]);
    for _ in 1..max_len {
        let packages: Vec<u128> = prev.chunks_exact(2).map(|p| p[0] + p[1]).collect();
        let mut merged = Vec::with_capacity(n + packages.len());
        let mut flags = Vec::with_capacity(n + packages.len());
        let (mut li, mut pi) = (0, 0);
        while li < n || pi < packages.len() {
            let take_leaf =
                pi >= packages.len() || (li < n && leaves[li].0 as u128 <= packages[pi]);
            if take_leaf {
                merged.push(leaves[li].0 as u128);
                flags.push(false);
                li += 1;
            } else {
                merged.push(packages[pi]);
                flags.push(true);
                pi += 1;
            }
        }
        lists.push(flags);
        prev = merged;
    }

    // walk back from the shallowest list, taking 2n - 2 items
    let mut take = 2 * n - 2;
    for flags in lists.iter().rev() {
        let chosen = &flags[..take];
        let leaf_count = chosen.iter().filter(|&&p| !p).count();
        for &(_, s) in &leaves[..leaf_count] {
            lengths[s] += 1;
        }
        take = 2 * (take - leaf_count);
        if take == 0 {
            break;
        }
    }
    lengths
}

/// Encoded stream plus the codebook needed to decode it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HuffmanEncoded {
    pub codebook: HuffmanCodebook,
    pub bitstream: Vec<u8>,
    pub bit_count: u64,
}

pub fn huffman_encode(codes: &[u32], hist: &Histogram) -> Result<HuffmanEncoded, EncodeError> {
    if hist.total != codes.len() as u64 {
        return Err(EncodeError::HistogramMismatch);
    }
    let codebook = HuffmanCodebook::from_histogram(hist)?;
    let table = codebook.codes();
    let lengths = codebook.lengths();

    let mut out = Vec::with_capacity(codes.len() / 4 + 8);
    let mut acc: u64 = 0;
    let mut nbits: u32 = 0;
    let mut bit_count: u64 = 0;
    for &c in codes {
        let len = *lengths.get(c as usize).unwrap_or(&0) as u32;
        if len == 0 {
            return Err(EncodeError::HistogramMismatch);
        }
        acc = (acc << len) | table[c as usize] as u64;
        nbits += len;
        bit_count += len as u64;
        while nbits >= 8 {
            nbits -= 8;
            out.push((acc >> nbits) as u8);
        }
        acc &= (1u64 << nbits) - 1;
    }
    if nbits > 0 {
        out.push((acc << (8 - nbits)) as u8);
    }
    Ok(HuffmanEncoded {
        codebook,
        bitstream: out,
        bit_count,
    })
}

struct Decoder {
    /// per length: first canonical code, count, offset into `symbols`
    first: [u64; MAX_CODE_LEN as usize + 1],
    count: [u64; MAX_CODE_LEN as usize + 1],
    offset: [usize; MAX_CODE_LEN as usize + 1],
    symbols: Vec<usize>,
    /// (symbol, length) for every LUT_BITS-bit prefix whose code fits
    lut: Vec<(u32, u8)>,
}

impl Decoder {
    fn new(cb: &HuffmanCodebook) -> Self {
        let symbols = cb.canonical_order();
        let mut first = [0u64; MAX_CODE_LEN as usize + 1];
        let mut count = [0u64; MAX_CODE_LEN as usize + 1];
        let mut offset = [0usize; MAX_CODE_LEN as usize + 1];
        for &s in &symbols {
            count[cb.lengths[s] as usize] += 1;
        }
        let mut code = 0u64;
        let mut off = 0usize;
        for len in 1..=MAX_CODE_LEN as usize {
            code <<= 1;
            first[len] = code;
            offset[len] = off;
            code += count[len];
            off += count[len] as usize;
        }
        let codes = cb.codes();
        let mut lut = vec![(0u32, 0u8); 1 << LUT_BITS];
        for &s in &symbols {
            let len = cb.lengths[s] as u32;
            if len <= LUT_BITS {
                let lo = (codes[s] as usize) << (LUT_BITS - len);
                let hi = lo + (1usize << (LUT_BITS - len));
                for e in &mut lut[lo..hi] {
                    *e = (s as u32, len as u8);
                }
            }
        }
        Self {
            first,
            count,
            offset,
            symbols,
            lut,
        }
    }
}

fn bit_at(stream: &[u8], pos: u64) -> u64 {
    let byte = stream.get((pos / 8) as usize).copied().unwrap_or(0);
    ((byte >> (7 - (pos % 8))) & 1) as u64
}

fn peek(stream: &[u8], pos: u64, n: u32) -> u64 {
    let byte_idx = (pos / 8) as usize;
    let mut window = 0u64;
    for i in 0..3 {
        window = (window << 8) | stream.get(byte_idx + i).copied().unwrap_or(0) as u64;
    }
    let shift = 24 - (pos % 8) as u32 - n;
    (window >> shift) & ((1u64 << n) - 1)
}

/// Decodes exactly `n` symbols. Rejects streams whose padding is non-zero,
/// that carry bytes beyond the last symbol, or whose codebook is not the one
/// [`huffman_encode`] would build for the decoded symbols.
pub fn huffman_decode(
    cb: &HuffmanCodebook,
    bitstream: &[u8],
    n: usize,
) -> Result<Vec<u32>, EncodeError> {
    if n == 0 {
        if !bitstream.is_empty() {
            return Err(EncodeError::CorruptStream("bytes after the last symbol"));
        }
        if cb.lengths.iter().any(|&l| l != 0) {
            return Err(EncodeError::CorruptStream(
                "codebook does not match the data",
            ));
        }
        return Ok(Vec::new());
    }
    if cb.lengths.iter().all(|&l| l == 0) {
        return Err(EncodeError::InvalidCodebook(
            "empty codebook for non-empty stream",
        ));
    }
    let dec = Decoder::new(cb);
    let total_bits = bitstream.len() as u64 * 8;
    let mut out = Vec::with_capacity(n);
    let mut pos: u64 = 0;
    for _ in 0..n {
        let (sym, len) = dec.lut[peek(bitstream, pos, LUT_BITS) as usize];
        if len > 0 {
            pos += len as u64;
            if pos > total_bits {
                return Err(EncodeError::Truncated);
            }
            out.push(sym);
            continue;
        }
        let mut code = 0u64;
        let mut len = 0usize;
        loop {
            if pos >= total_bits {
                return Err(EncodeError::Truncated);
            }
            code = (code << 1) | bit_at(bitstream, pos);
            pos += 1;
            len += 1;
            let idx = code.wrapping_sub(dec.first[len]);
            if code >= dec.first[len] && idx < dec.count[len] {
                out.push(dec.symbols[dec.offset[len] + idx as usize] as u32);
                break;
            }
            if len == MAX_CODE_LEN as usize {
                return Err(EncodeError::CorruptStream("bit pattern matches no code"));
            }
        }
    }
    if pos.div_ceil(8) != bitstream.len() as u64 {
        return Err(EncodeError::CorruptStream("bytes after the last symbol"));
    }
    if !pos.is_multiple_of(8) {
        let last = bitstream[bitstream.len() - 1];
        if last & ((1u8 << (8 - pos % 8)) - 1) != 0 {
            return Err(EncodeError::CorruptStream("non-zero padding"));
        }
    }
    // The encoder derives the codebook from the symbols it codes, so any
    // other codebook means the stream was altered.
    let mut counts = vec![0u64; cb.lengths.len()];
    for &s in &out {
        counts[s as usize] += 1;
    }
    if package_merge(&counts, MAX_CODE_LEN) != cb.lengths {
        return Err(EncodeError::CorruptStream(
            "codebook does not match the data",
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::histogram_exact;
    use proptest::prelude::*;

    /// Exhaustive search over prefix-code length assignments.
    fn brute_force_optimal_bits(weights: &[u64]) -> u64 {
        fn rec(weights: &[u64], i: usize, kraft: f64, cost: u64, best: &mut u64) {
            if kraft > 1.0 + 1e-12 || cost >= *best {
                return;
            }
            if i == weights.len() {
                *best = cost;
                return;
            }
            for l in 1..=weights.len() as u32 {
                rec(
                    weights,
                    i + 1,
                    kraft + 0.5f64.powi(l as i32),
                    cost + weights[i] * l as u64,
                    best,
                );
            }
        }
        let mut best = u64::MAX;
        rec(weights, 0, 0.0, 0, &mut best);
        best
    }

    #[test]
    fn textbook_multiset_is_14_bits() {
        let codes = [0u32, 0, 0, 0, 1, 1, 2, 3];
        assert_eq!(brute_force_optimal_bits(&[4, 2, 1, 1]), 14);
        let hist = histogram_exact(&codes, 2).unwrap();
        let enc = huffman_encode(&codes, &hist).unwrap();
        assert_eq!(enc.bit_count, 14);
        assert_eq!(enc.codebook.lengths(), &[1, 2, 3, 3]);
        assert_eq!(enc.codebook.codes(), vec![0b0, 0b10, 0b110, 0b111]);
        assert_eq!(
            huffman_decode(&enc.codebook, &enc.bitstream, 8).unwrap(),
            codes
        );
    }

    #[test]
    fn single_symbol() {
        let codes = vec![7u32; 100];
        let hist = histogram_exact(&codes, 8).unwrap();
        let enc = huffman_encode(&codes, &hist).unwrap();
        assert_eq!(enc.bit_count, 100);
        assert_eq!(enc.bitstream.len(), 13);
        assert_eq!(enc.codebook.lengths().iter().filter(|&&l| l > 0).count(), 1);
        assert_eq!(enc.codebook.lengths()[7], 1);
        assert_eq!(
            huffman_decode(&enc.codebook, &enc.bitstream, 100).unwrap(),
            codes
        );
    }

    #[test]
    fn empty_input() {
        let hist = histogram_exact(&[], 4).unwrap();
        let enc = huffman_encode(&[], &hist).unwrap();
        assert!(enc.bitstream.is_empty());
        assert_eq!(enc.bit_count, 0);
        assert!(huffman_decode(&enc.codebook, &[], 0).unwrap().is_empty());
    }

    #[test]
    fn every_single_bit_flip_is_caught() {
        let codes: Vec<u32> = (0..300u32)
            .map(|i| [5, 5, 5, 4, 6, 5, 3, 5][i as usize % 8] + (i % 37 == 0) as u32)
            .collect();
        let hist = histogram_exact(&codes, 4).unwrap();
        let enc = huffman_encode(&codes, &hist).unwrap();
        for bit in 0..enc.bitstream.len() * 8 {
            let mut bad = enc.bitstream.clone();
            bad[bit / 8] ^= 0x80 >> (bit % 8);
            if let Ok(out) = huffman_decode(&enc.codebook, &bad, codes.len()) {
                assert_ne!(out, codes, "flip of bit {bit} decoded silently")
            }
        }
    }

    #[test]
    fn truncated_stream() {
        let codes: Vec<u32> = (0..64).map(|i| i % 5).collect();
        let hist = histogram_exact(&codes, 4).unwrap();
        let enc = huffman_encode(&codes, &hist).unwrap();
        let short = &enc.bitstream[..enc.bitstream.len() - 2];
        assert_eq!(
            huffman_decode(&enc.codebook, short, 64),
            Err(EncodeError::Truncated)
        );
    }

    #[test]
    fn long_codes_beyond_lut() {
        // Fibonacci weights force a deep, skewed tree
        let mut fib = vec![1u64, 1];
        while fib.len() < 20 {
            let k = fib.len();
            fib.push(fib[k - 1] + fib[k - 2]);
        }
        let mut codes = Vec::new();
        for (s, &w) in fib.iter().enumerate() {
            codes.extend(std::iter::repeat_n(s as u32, w as usize));
        }
        codes.reverse();
        let hist = histogram_exact(&codes, 16).unwrap();
        let enc = huffman_encode(&codes, &hist).unwrap();
        assert!(enc.codebook.lengths().iter().any(|&l| l as u32 > LUT_BITS));
        assert_eq!(
            huffman_decode(&enc.codebook, &enc.bitstream, codes.len()).unwrap(),
            codes
        );
    }

    #[test]
    fn length_limit_binds() {
        // 40 Fibonacci weights would need codes of length 39 without the limit
        let mut counts = vec![1u64, 1];
        while counts.len() < 40 {
            let k = counts.len();
            counts.push(counts[k - 1] + counts[k - 2]);
        }
        let lens = package_merge(&counts, 32);
        assert_eq!(*lens.iter().max().unwrap(), 32);
        assert!(HuffmanCodebook::from_lengths(lens).is_ok());
    }

    #[test]
    fn package_merge_matches_brute_force() {
        for weights in [
            vec![1u64, 32, 16, 4, 8, 2, 1],
            vec![3, 3, 3],
            vec![10, 1, 1, 1, 1, 1],
            vec![5, 9, 12, 13, 16, 45],
        ] {
            let lens = package_merge(&weights, 32);
            let cost: u64 = weights.iter().zip(&lens).map(|(w, &l)| w * l as u64).sum();
            assert_eq!(cost, brute_force_optimal_bits(&weights), "{weights:?}");
        }
    }

    #[test]
    fn codebook_validation() {
        assert!(HuffmanCodebook::from_lengths(vec![1, 1, 0]).is_ok());
        assert!(HuffmanCodebook::from_lengths(vec![1, 2, 2]).is_ok());
        assert!(HuffmanCodebook::from_lengths(vec![1, 2, 0]).is_err());
        assert!(HuffmanCodebook::from_lengths(vec![0, 3, 0]).is_err());
        assert!(HuffmanCodebook::from_lengths(vec![33, 1]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_and_entropy_bound(
            radius in 1u32..40,
            raw in proptest::collection::vec(any::<u32>(), 1..2000),
            skew in 1u32..6,
        ) {
            let alphabet = 2 * radius;
            let codes: Vec<u32> = raw.iter().map(|&c| (c % alphabet) / skew.min(alphabet)).collect();
            let hist = histogram_exact(&codes, radius).unwrap();
            let enc = huffman_encode(&codes, &hist).unwrap();
            let dec = huffman_decode(&enc.codebook, &enc.bitstream, codes.len()).unwrap();
            prop_assert_eq!(&dec, &codes);
            let h = hist.entropy_bits();
            let mean = enc.codebook.mean_length(&hist);
            prop_assert!(mean >= h - 1e-9);
            if hist.used_symbols() >= 2 {
                prop_assert!(mean < h + 1.0);
            } else {
                // a lone symbol still costs one bit
                prop_assert_eq!(mean, 1.0);
            }
        }
    }
}
