//! Deterministic, splittable random streams.
//!
//! Every stream is a SplitMix64 counter sequence whose key is a hash of a
//! master seed and a path of labels. Streams are never shared: a consumer
//! that needs independent randomness derives a child stream by label, so
//! results do not depend on evaluation order or thread scheduling.

use std::fmt;

/// Identifier written into every output file so runs can be replayed.
pub const RNG_ALGORITHM: &str = "splitmix64-labels-v1";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const STR_TAG: u64 = 0x5354_525f_4c41_4245; // "STR_LABE"
const INT_TAG: u64 = 0x494e_545f_4c41_4245; // "INT_LABE"

#[inline(always)]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One element of a stream's label path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label<'a> {
    Str(&'a str),
    Int(u64),
}

impl Label<'_> {
    fn hash(self) -> u64 {
        match self {
            Label::Str(s) => {
                // FNV-1a over the bytes, then finalised so short strings spread.
                let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ STR_TAG;
                for &b in s.as_bytes() {
                    h ^= u64::from(b);
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
                mix64(h ^ s.len() as u64)
            }
            Label::Int(v) => mix64(v ^ INT_TAG),
        }
    }
}

impl<'a> From<&'a str> for Label<'a> {
    fn from(s: &'a str) -> Self {
        Label::Str(s)
    }
}

impl<'a> From<&'a String> for Label<'a> {
    fn from(s: &'a String) -> Self {
        Label::Str(s.as_str())
    }
}

impl From<u64> for Label<'_> {
    fn from(v: u64) -> Self {
        Label::Int(v)
    }
}

impl From<usize> for Label<'_> {
    fn from(v: usize) -> Self {
        Label::Int(v as u64)
    }
}

impl From<u32> for Label<'_> {
    fn from(v: u32) -> Self {
        Label::Int(u64::from(v))
    }
}

/// A pseudorandom stream bound to a (seed, label path) key.
#[derive(Clone, PartialEq, Eq)]
pub struct RngStream {
    key: u64,
    counter: u64,
}

impl fmt::Debug for RngStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RngStream({:016x}@{})", self.key, self.counter)
    }
}

/// Derives the stream for `labels` under `master_seed`.
///
/// Pure: the same inputs always give the same stream.
pub fn derive_stream(master_seed: u64, labels: &[Label<'_>]) -> RngStream {
    let mut key = mix64(master_seed ^ GOLDEN_GAMMA);
    for label in labels {
        key = mix64(key ^ label.hash()).wrapping_add(GOLDEN_GAMMA);
    }
    RngStream { key, counter: 0 }
}

impl RngStream {
    /// Child stream keyed by this stream's key and `label`. Independent of how
    /// many values have already been drawn from `self`.
    pub fn child<'a>(&self, label: impl Into<Label<'a>>) -> RngStream {
        let key = mix64(self.key ^ label.into().hash()).wrapping_add(GOLDEN_GAMMA);
        RngStream { key, counter: 0 }
    }

    #[inline(always)]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n). `n` must be non-zero.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u64
    }

    /// Uniform integer in [lo, hi].
    pub fn range_i32(&mut self, lo: i32, hi: i32) -> i32 {
        debug_assert!(lo <= hi);
        let span = (i64::from(hi) - i64::from(lo) + 1) as u64;
        (i64::from(lo) + self.below(span) as i64) as i32
    }

    /// Number of values drawn so far.
    pub fn position(&self) -> u64 {
        self.counter
    }
}
