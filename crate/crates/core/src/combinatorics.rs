//! Bitmask helpers for subsets of a ground set of at most 64 elements.

/// Binomial coefficient as a float; exact for the ranges used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Binomial coefficient as an integer, saturating on overflow.
pub fn binomial_u64(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

pub fn mask_from_indices(indices: &[usize]) -> u64 {
    indices.iter().fold(0u64, |m, &i| m | (1u64 << i))
}

pub fn indices_from_mask(mut mask: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        out.push(i);
        mask &= mask - 1;
    }
    out
}

pub fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Iterates over all `k`-subsets of `{0, .., n-1}` in increasing mask order
/// (Gosper's hack).
pub struct KSubsets {
    next: Option<u64>,
    limit: u64,
}

impl Iterator for KSubsets {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let cur = self.next?;
        if cur == 0 {
            self.next = None;
            return Some(0);
        }
        let c = cur & cur.wrapping_neg();
        let r = cur.wrapping_add(c);
        self.next = if r == 0 || r < cur {
            None
        } else {
            let nxt = (((r ^ cur) >> 2) / c) | r;
            if nxt > self.limit {
                None
            } else {
                Some(nxt)
            }
        };
        Some(cur)
    }
}

pub fn k_subsets(n: usize, k: usize) -> KSubsets {
    debug_assert!(n <= 64);
    if k > n {
        return KSubsets { next: None, limit: 0 };
    }
    KSubsets {
        next: Some(full_mask(k)),
        limit: full_mask(n),
    }
}

/// Scatters the low bits of `bits` onto the set positions of `mask`
/// (software `pdep`).
#[inline]
pub fn deposit(mut bits: u64, mut mask: u64) -> u64 {
    let mut out = 0u64;
    while mask != 0 && bits != 0 {
        let low = mask & mask.wrapping_neg();
        if bits & 1 == 1 {
            out |= low;
        }
        bits >>= 1;
        mask &= mask - 1;
    }
    out
}

/// All `size`-subsets of the set encoded by `mask`.
pub fn sub_subsets(mask: u64, size: usize) -> impl Iterator<Item = u64> {
    let k = mask.count_ones() as usize;
    k_subsets(k, size).map(move |b| deposit(b, mask))
}

/// Uniformly random `size`-subset of `mask`.
pub fn random_sub_subset<R: rand::Rng + ?Sized>(mask: u64, size: usize, rng: &mut R) -> u64 {
    let mut members = indices_from_mask(mask);
    let k = members.len();
    // partial Fisher-Yates
    for i in 0..size {
        let j = rng.random_range(i..k);
        members.swap(i, j);
    }
    mask_from_indices(&members[..size])
}
