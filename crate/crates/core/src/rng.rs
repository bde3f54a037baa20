//! SplitMix64 streams and FNV-1a seed derivation.
//!
//! Every random decision in a run draws from a stream seeded by
//! `derive_seed(master_seed, role, ids, repetition)`. The seed is the FNV-1a
//! 64-bit hash of: the master seed as 8 little-endian bytes, the role string,
//! each identifier, and the repetition index as 8 little-endian bytes. Every
//! string is followed by a single `0x00` byte.

use crate::rational::Rational;
use num_traits::Signed;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone, Copy, Default)]
pub struct Fnv1a64(u64);

impl Fnv1a64 {
    pub fn new() -> Self {
        Self(FNV_OFFSET)
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

pub fn derive_seed(master_seed: u64, role: &str, ids: &[&str], repetition: u64) -> u64 {
    let mut h = Fnv1a64::new();
    h.write(&master_seed.to_le_bytes());
    h.write(role.as_bytes());
    h.write(&[0]);
    for id in ids {
        h.write(id.as_bytes());
        h.write(&[0]);
    }
    h.write(&repetition.to_le_bytes());
    h.finish()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
    draws: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed, draws: 0 }
    }

    pub fn for_role(master_seed: u64, role: &str, ids: &[&str], repetition: u64) -> Self {
        Self::new(derive_seed(master_seed, role, ids, repetition))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.draws += 1;
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Number of values drawn so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform integer in `[0, n)` by widening multiply (one draw). `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u64
    }

    /// Uniform integer in `[0, hi]` (one draw).
    pub fn up_to(&mut self, hi: u64) -> u64 {
        match hi.checked_add(1) {
            Some(n) => self.below(n),
            None => self.next_u64(),
        }
    }

    /// Draws `u = x / 2^64` and reports whether `u < p` (one draw).
    pub fn chance(&mut self, p: &Rational) -> bool {
        let x = self.next_u64();
        if !p.is_positive() {
            return false;
        }
        let (num, den) = (*p.numer() as u128, *p.denom() as u128);
        if num >= den {
            return true;
        }
        // u < num/den  <=>  x < ceil(num * 2^64 / den)
        let threshold = match num.checked_mul(1u128 << 64) {
            Some(scaled) => scaled.div_ceil(den),
            None => {
                let q = num / den;
                let r = num % den;
                (q << 64) + ((r << 64) / den) + u128::from((r << 64) % den != 0)
            }
        };
        u128::from(x) < threshold
    }

    /// Uniform `k` in `[0, 2^53)`; `k / 2^53` is an exactly representable unit fraction.
    pub fn unit_53(&mut self) -> u64 {
        self.next_u64() >> 11
    }
}
