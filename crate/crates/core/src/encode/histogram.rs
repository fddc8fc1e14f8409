//! Exact code histograms.
//!
//! [`histogram_topk`] is a fast path for peaked distributions: a sparse sample
//! picks the `k` hottest symbols, which are then counted in a small set of
//! dedicated counters while everything else goes to the shared bins. The
//! result is always identical to [`histogram_exact`].

use super::EncodeError;

/// Every `SAMPLE_STRIDE`-th code is inspected when choosing hot symbols.
pub const SAMPLE_STRIDE: usize = 64;
pub const DEFAULT_TOPK: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    pub bins: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn radius(&self) -> u32 {
        (self.bins.len() / 2) as u32
    }

    /// Shannon entropy in bits per symbol.
    pub fn entropy_bits(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let n = self.total as f64;
        self.bins
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.log2()
            })
            .sum()
    }

    pub fn used_symbols(&self) -> usize {
        self.bins.iter().filter(|&&c| c > 0).count()
    }
}

fn out_of_range(index: usize, code: u32, radius: u32) -> EncodeError {
    EncodeError::CodeOutOfRange {
        index,
        code,
        alphabet: 2 * radius as u64,
    }
}

pub fn histogram_exact(codes: &[u32], radius: u32) -> Result<Histogram, EncodeError> {
    let alphabet = 2 * radius as usize;
    let mut bins = vec![0u64; alphabet];
    for (i, &c) in codes.iter().enumerate() {
        match bins.get_mut(c as usize) {
            Some(b) => *b += 1,
            None => return Err(out_of_range(i, c, radius)),
        }
    }
    Ok(Histogram {
        bins,
        total: codes.len() as u64,
    })
}

pub fn histogram_topk(codes: &[u32], radius: u32, k: usize) -> Result<Histogram, EncodeError> {
    let alphabet = 2 * radius as usize;
    if k == 0 || k > alphabet {
        return Err(EncodeError::InvalidTopK { k, alphabet });
    }
    if k == alphabet || k >= u16::MAX as usize {
        return histogram_exact(codes, radius);
    }

    // sample
    let mut sample = vec![0u32; alphabet];
    for (i, &c) in codes.iter().enumerate().step_by(SAMPLE_STRIDE) {
        match sample.get_mut(c as usize) {
            Some(s) => *s += 1,
            None => return Err(out_of_range(i, c, radius)),
        }
    }
    let mut order: Vec<usize> = (0..alphabet).filter(|&s| sample[s] > 0).collect();
    order.sort_unstable_by(|&a, &b| sample[b].cmp(&sample[a]).then(a.cmp(&b)));
    order.truncate(k);

    const COLD: u16 = u16::MAX;
    let mut slot = vec![COLD; alphabet];
    for (i, &s) in order.iter().enumerate() {
        slot[s] = i as u16;
    }

    // four interleaved copies of the hot counters break the
    // read-after-write chain on runs of the same symbol
    let hot_n = order.len();
    let mut hot = vec![[0u64; 4]; hot_n];
    let mut bins = vec![0u64; alphabet];
    let mut chunks = codes.chunks_exact(4);
    let mut base = 0usize;
    for chunk in &mut chunks {
        for (lane, &c) in chunk.iter().enumerate() {
            let s = *slot
                .get(c as usize)
                .ok_or_else(|| out_of_range(base + lane, c, radius))?;
            if s != COLD {
                hot[s as usize][lane] += 1;
            } else {
                bins[c as usize] += 1;
            }
        }
        base += 4;
    }
    for (lane, &c) in chunks.remainder().iter().enumerate() {
        let s = *slot
            .get(c as usize)
            .ok_or_else(|| out_of_range(base + lane, c, radius))?;
        if s != COLD {
            hot[s as usize][lane] += 1;
        } else {
            bins[c as usize] += 1;
        }
    }
    for (i, &s) in order.iter().enumerate() {
        bins[s] += hot[i].iter().sum::<u64>();
    }
    Ok(Histogram {
        bins,
        total: codes.len() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(codes: &[u32], radius: u32) -> Vec<u64> {
        (0..2 * radius)
            .map(|s| codes.iter().filter(|&&c| c == s).count() as u64)
            .collect()
    }

    #[test]
    fn hand_counted() {
        let h = histogram_exact(&[512, 513, 513], 512).unwrap();
        assert_eq!(h.bins[512], 1);
        assert_eq!(h.bins[513], 2);
        assert_eq!(h.total, 3);
        assert_eq!(h.bins.iter().sum::<u64>(), 3);
    }

    #[test]
    fn empty_codes() {
        let h = histogram_exact(&[], 8).unwrap();
        assert_eq!(h.bins, vec![0; 16]);
        assert_eq!(h.total, 0);
        assert_eq!(histogram_topk(&[], 8, 3).unwrap(), h);
    }

    #[test]
    fn out_of_range_reported() {
        assert!(matches!(
            histogram_exact(&[1, 16], 8),
            Err(EncodeError::CodeOutOfRange {
                index: 1,
                code: 16,
                ..
            })
        ));
        assert!(matches!(
            histogram_topk(&[1, 2, 3, 4, 5, 99], 8, 2),
            Err(EncodeError::CodeOutOfRange {
                index: 5,
                code: 99,
                ..
            })
        ));
        assert!(histogram_topk(&[1], 8, 0).is_err());
        assert!(histogram_topk(&[1], 8, 17).is_err());
    }

    #[test]
    fn peaked_topk_matches() {
        let codes: Vec<u32> = (0..100_000u32)
            .map(|i| if i % 100 == 7 { (i / 100) % 1024 } else { 512 })
            .collect();
        assert_eq!(
            histogram_topk(&codes, 512, 4).unwrap(),
            histogram_exact(&codes, 512).unwrap()
        );
    }

    proptest! {
        #[test]
        fn topk_equals_exact_equals_naive(
            radius in 1u32..64,
            raw in proptest::collection::vec(any::<u32>(), 0..600),
            k_frac in 0.0f64..1.0,
        ) {
            let alphabet = 2 * radius;
            let codes: Vec<u32> = raw.iter().map(|c| c % alphabet).collect();
            let k = 1 + ((alphabet - 1) as f64 * k_frac) as usize;
            let exact = histogram_exact(&codes, radius).unwrap();
            prop_assert_eq!(&exact.bins, &naive(&codes, radius));
            prop_assert_eq!(histogram_topk(&codes, radius, k).unwrap(), exact);
        }
    }
}
