//! Secondary lossless codecs applied to already-encoded segments.
//!
//! The built-in codec (id 0) is a zero-run-length coder. Its stream is a
//! sequence of tokens:
//!
//! * `0x00, varint(n)` : a run of `n >= 3` zero bytes,
//! * `c, b_1 .. b_c`  : `c` in `1..=255` literal bytes.
//!
//! Zero runs shorter than three stay in literal chunks, which caps expansion
//! at one header byte per 255 input bytes plus one. Other codecs plug in
//! through [`SecondaryCodec`] and a [`SecondaryRegistry`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::EncodeError;
use crate::archive::{Segment, SegmentKind};

pub const ZERO_RLE_ID: u8 = 0;
const MIN_ZERO_RUN: usize = 3;
const MAX_LITERAL_CHUNK: usize = 255;

pub trait SecondaryCodec: Send + Sync {
    fn id(&self) -> u8;
    fn name(&self) -> &str;
    fn encode(&self, input: &[u8]) -> Vec<u8>;
    fn decode(&self, input: &[u8]) -> Result<Vec<u8>, EncodeError>;
}

pub fn write_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

/// Reads an LEB128 varint, returning the value and the bytes consumed.
pub fn read_varint(b: &[u8]) -> Result<(u64, usize), EncodeError> {
    let mut v: u64 = 0;
    for (i, &byte) in b.iter().enumerate().take(10) {
        let bits = (byte & 0x7f) as u64;
        if i == 9 && bits > 1 {
            return Err(EncodeError::CorruptPayload("varint overflow"));
        }
        v |= bits << (7 * i);
        if byte & 0x80 == 0 {
            return Ok((v, i + 1));
        }
    }
    Err(EncodeError::CorruptPayload("unterminated varint"))
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroRle;

impl ZeroRle {
    fn flush(out: &mut Vec<u8>, literal: &[u8]) {
        for chunk in literal.chunks(MAX_LITERAL_CHUNK) {
            out.push(chunk.len() as u8);
            out.extend_from_slice(chunk);
        }
    }
}

impl SecondaryCodec for ZeroRle {
    fn id(&self) -> u8 {
        ZERO_RLE_ID
    }

    fn name(&self) -> &str {
        "zero-rle"
    }

    fn encode(&self, input: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(input.len() / 2 + 8);
        let mut lit_start = 0;
        let mut i = 0;
        while i < input.len() {
            if input[i] != 0 {
                i += 1;
                continue;
            }
            let run = input[i..].iter().take_while(|&&b| b == 0).count();
            if run >= MIN_ZERO_RUN {
                Self::flush(&mut out, &input[lit_start..i]);
                out.push(0);
                write_varint(&mut out, run as u64);
                lit_start = i + run;
            }
            i += run;
        }
        Self::flush(&mut out, &input[lit_start..]);
        out
    }

    /// Rejects any stream the encoder would not have produced.
    fn decode(&self, input: &[u8]) -> Result<Vec<u8>, EncodeError> {
        let mut out = Vec::with_capacity(input.len() * 2);
        let mut i = 0;
        while i < input.len() {
            let head = input[i] as usize;
            i += 1;
            if head == 0 {
                let (run, used) = read_varint(&input[i..])?;
                i += used;
                if run < MIN_ZERO_RUN as u64 || run > (1 << 40) {
                    return Err(EncodeError::CorruptPayload("zero run length"));
                }
                out.resize(out.len() + run as usize, 0);
            } else {
                let lit = input
                    .get(i..i + head)
                    .ok_or(EncodeError::CorruptPayload("literal chunk past end"))?;
                out.extend_from_slice(lit);
                i += head;
            }
        }
        if self.encode(&out) != input {
            return Err(EncodeError::CorruptPayload("non-canonical stream"));
        }
        Ok(out)
    }
}

/// Secondary codecs by id. Id 0 (zero-RLE) is always present.
#[derive(Clone)]
pub struct SecondaryRegistry {
    codecs: BTreeMap<u8, Arc<dyn SecondaryCodec>>,
}

impl fmt::Debug for SecondaryRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.codecs.iter().map(|(id, c)| (id, c.name())))
            .finish()
    }
}

impl Default for SecondaryRegistry {
    fn default() -> Self {
        let mut codecs: BTreeMap<u8, Arc<dyn SecondaryCodec>> = BTreeMap::new();
        codecs.insert(ZERO_RLE_ID, Arc::new(ZeroRle));
        Self { codecs }
    }
}

impl SecondaryRegistry {
    pub fn register(&mut self, codec: Arc<dyn SecondaryCodec>) -> Result<(), EncodeError> {
        let id = codec.id();
        if self.codecs.contains_key(&id) {
            return Err(EncodeError::DuplicateCodec(id));
        }
        self.codecs.insert(id, codec);
        Ok(())
    }

    pub fn get(&self, id: u8) -> Result<&Arc<dyn SecondaryCodec>, EncodeError> {
        self.codecs.get(&id).ok_or(EncodeError::UnknownCodec(id))
    }

    pub fn contains(&self, id: u8) -> bool {
        self.codecs.contains_key(&id)
    }

    pub fn encode(&self, input: &[u8], id: u8) -> Result<Vec<u8>, EncodeError> {
        Ok(self.get(id)?.encode(input))
    }

    pub fn decode(&self, input: &[u8], id: u8) -> Result<Vec<u8>, EncodeError> {
        self.get(id)?.decode(input)
    }

    /// Packs `segments` (kind, u64 length, payload each) into one
    /// secondary-wrapped segment whose payload starts with the codec id.
    pub fn wrap(&self, segments: &[Segment], id: u8) -> Result<Segment, EncodeError> {
        let codec = self.get(id)?;
        let mut inner = Vec::new();
        for s in segments {
            inner.push(s.kind as u8);
            inner.extend_from_slice(&(s.payload.len() as u64).to_le_bytes());
            inner.extend_from_slice(&s.payload);
        }
        let mut payload = vec![id];
        payload.extend(codec.encode(&inner));
        Ok(Segment::new(SegmentKind::SecondaryWrapped, payload))
    }

    /// Inverse of [`SecondaryRegistry::wrap`]; returns the codec id used too.
    pub fn unwrap(&self, payload: &[u8]) -> Result<(u8, Vec<Segment>), EncodeError> {
        let (&id, body) = payload
            .split_first()
            .ok_or(EncodeError::CorruptPayload("empty wrapped segment"))?;
        let inner = self.decode(body, id)?;
        let mut segments = Vec::new();
        let mut i = 0;
        while i < inner.len() {
            if inner.len() - i < 9 {
                return Err(EncodeError::CorruptPayload("wrapped segment header"));
            }
            let kind = SegmentKind::from_byte(inner[i])
                .ok_or(EncodeError::CorruptPayload("wrapped segment kind"))?;
            let len = u64::from_le_bytes(inner[i + 1..i + 9].try_into().unwrap()) as usize;
            i += 9;
            let body = inner
                .get(i..i.saturating_add(len))
                .ok_or(EncodeError::CorruptPayload("wrapped segment length"))?;
            segments.push(Segment::new(kind, body.to_vec()));
            i += len;
        }
        Ok((id, segments))
    }
}

/// Encodes with a built-in codec (without the codec-id prefix byte).
pub fn secondary_encode(segment: &[u8], codec_id: u8) -> Result<Vec<u8>, EncodeError> {
    SecondaryRegistry::default().encode(segment, codec_id)
}

pub fn secondary_decode(encoded: &[u8], codec_id: u8) -> Result<Vec<u8>, EncodeError> {
    SecondaryRegistry::default().decode(encoded, codec_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn thousand_zeros_is_three_bytes() {
        let out = secondary_encode(&[0; 1000], ZERO_RLE_ID).unwrap();
        assert_eq!(out, vec![0x00, 0xe8, 0x07]);
        assert_eq!(secondary_decode(&out, ZERO_RLE_ID).unwrap(), vec![0; 1000]);
    }

    #[test]
    fn short_zero_runs_stay_literal() {
        let input = [1, 0, 0, 2, 0, 0, 0, 3];
        let out = ZeroRle.encode(&input);
        assert_eq!(out, vec![4, 1, 0, 0, 2, 0, 3, 1, 3]);
        assert_eq!(ZeroRle.decode(&out).unwrap(), input);
    }

    #[test]
    fn empty_round_trip() {
        assert!(ZeroRle.encode(&[]).is_empty());
        assert!(ZeroRle.decode(&[]).unwrap().is_empty());
    }

    #[test]
    fn unknown_codec() {
        assert_eq!(secondary_encode(&[1], 9), Err(EncodeError::UnknownCodec(9)));
        assert_eq!(secondary_decode(&[1], 9), Err(EncodeError::UnknownCodec(9)));
    }

    #[test]
    fn corrupt_payloads() {
        assert!(ZeroRle.decode(&[5, 1, 2]).is_err());
        assert!(ZeroRle.decode(&[0]).is_err());
        assert!(ZeroRle.decode(&[0, 0x80]).is_err());
        // run of 1 is never emitted by the encoder
        assert!(ZeroRle.decode(&[0, 1]).is_err());
        // two adjacent literal chunks where one would do
        assert!(ZeroRle.decode(&[1, 7, 1, 8]).is_err());
    }

    #[test]
    fn wrap_unwrap_segments() {
        let reg = SecondaryRegistry::default();
        let segs = vec![
            Segment::new(SegmentKind::HuffmanCodebook, vec![0; 1024]),
            Segment::new(SegmentKind::OutlierValues, vec![1, 2, 3]),
            Segment::new(SegmentKind::OutlierIndices, vec![]),
        ];
        let wrapped = reg.wrap(&segs, ZERO_RLE_ID).unwrap();
        assert_eq!(wrapped.kind, SegmentKind::SecondaryWrapped);
        assert_eq!(wrapped.payload[0], ZERO_RLE_ID);
        assert!(wrapped.payload.len() < 64);
        assert_eq!(reg.unwrap(&wrapped.payload).unwrap(), (ZERO_RLE_ID, segs));
    }

    #[test]
    fn every_single_bit_flip_is_caught() {
        let input: Vec<u8> = (0..400u32)
            .map(|i| {
                if (i / 7) % 3 == 0 {
                    0
                } else {
                    (i * 31 % 251) as u8
                }
            })
            .collect();
        let enc = ZeroRle.encode(&input);
        for bit in 0..enc.len() * 8 {
            let mut bad = enc.clone();
            bad[bit / 8] ^= 1 << (bit % 8);
            if let Ok(out) = ZeroRle.decode(&bad) {
                assert_ne!(out, input);
            }
        }
    }

    struct Reverse;
    impl SecondaryCodec for Reverse {
        fn id(&self) -> u8 {
            42
        }
        fn name(&self) -> &str {
            "reverse"
        }
        fn encode(&self, input: &[u8]) -> Vec<u8> {
            input.iter().rev().copied().collect()
        }
        fn decode(&self, input: &[u8]) -> Result<Vec<u8>, EncodeError> {
            Ok(input.iter().rev().copied().collect())
        }
    }

    #[test]
    fn pluggable_codec() {
        let mut reg = SecondaryRegistry::default();
        reg.register(Arc::new(Reverse)).unwrap();
        assert!(reg.register(Arc::new(Reverse)).is_err());
        assert_eq!(reg.encode(&[1, 2, 3], 42).unwrap(), vec![3, 2, 1]);
        let seg = reg
            .wrap(&[Segment::new(SegmentKind::AnchorGrid, vec![9, 8])], 42)
            .unwrap();
        assert_eq!(reg.unwrap(&seg.payload).unwrap().0, 42);
    }

    proptest! {
        #[test]
        fn random_bytes_round_trip_and_bounded(input in proptest::collection::vec(any::<u8>(), 0..4000)) {
            let out = ZeroRle.encode(&input);
            let n = input.len();
            prop_assert!(out.len() * 254 <= n * 254 + n + 254);
            prop_assert_eq!(ZeroRle.decode(&out).unwrap(), input);
        }

        #[test]
        fn zero_heavy_round_trip(runs in proptest::collection::vec((0usize..300, any::<u8>()), 0..40)) {
            let mut input = Vec::new();
            for (zeros, b) in runs {
                input.resize(input.len() + zeros, 0);
                input.push(b);
            }
            let out = ZeroRle.encode(&input);
            prop_assert_eq!(ZeroRle.decode(&out).unwrap(), input);
        }
    }
}
