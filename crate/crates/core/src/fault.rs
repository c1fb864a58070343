//! Probabilistic bit-flip model for 32-bit datapath results.
//!
//! Faults are applied to the value an operation drives onto the result bus,
//! never to its operands. A [`FaultSpec`] names the per-operation event
//! probability, the contiguous bit range eligible for flips, and whether an
//! event flips one bit or each bit independently.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::rng::{mix64, RngStream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FaultError {
    #[error("bit range {lo}-{hi} is invalid (need 0 <= lo <= hi <= 31)")]
    BadRange { lo: u32, hi: u32 },
    #[error("cannot parse bit range {0:?} (expected \"lo-hi\")")]
    RangeSyntax(String),
    #[error("error rate {0} is outside [0, 1]")]
    BadRate(f64),
    #[error("unknown flip model {0:?} (expected \"single\" or \"perbit\")")]
    BadModel(String),
}

/// A 32-bit two's-complement bus value. Arithmetic on it wraps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Word32(pub u32);

impl Word32 {
    pub fn from_i32(v: i32) -> Self {
        Word32(v as u32)
    }

    pub fn as_i32(self) -> i32 {
        self.0 as i32
    }

    pub fn wrapping_add(self, o: Word32) -> Word32 {
        Word32(self.0.wrapping_add(o.0))
    }

    pub fn wrapping_sub(self, o: Word32) -> Word32 {
        Word32(self.0.wrapping_sub(o.0))
    }

    pub fn wrapping_mul(self, o: Word32) -> Word32 {
        Word32(self.0.wrapping_mul(o.0))
    }

    /// Hamming distance to `o`.
    pub fn distance(self, o: Word32) -> u32 {
        (self.0 ^ o.0).count_ones()
    }
}

impl From<i32> for Word32 {
    fn from(v: i32) -> Self {
        Word32::from_i32(v)
    }
}

/// Inclusive bit range, 0 = LSB.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BitRange {
    lo: u32,
    hi: u32,
}

impl BitRange {
    pub const FULL: BitRange = BitRange { lo: 0, hi: 31 };

    pub fn new(lo: u32, hi: u32) -> Result<Self, FaultError> {
        if lo > hi || hi > 31 {
            return Err(FaultError::BadRange { lo, hi });
        }
        Ok(BitRange { lo, hi })
    }

    /// `[0, hi]`, the shape used by the bit-range sweep.
    pub fn lsb(hi: u32) -> Result<Self, FaultError> {
        Self::new(0, hi)
    }

    pub fn lo(self) -> u32 {
        self.lo
    }

    pub fn hi(self) -> u32 {
        self.hi
    }

    pub fn width(self) -> u32 {
        self.hi - self.lo + 1
    }

    pub fn contains(self, bit: u32) -> bool {
        bit >= self.lo && bit <= self.hi
    }

    /// Mask with every in-range bit set.
    pub fn mask(self) -> u32 {
        let w = self.width();
        let ones = if w == 32 { u32::MAX } else { (1u32 << w) - 1 };
        ones << self.lo
    }
}

impl fmt::Display for BitRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

impl FromStr for BitRange {
    type Err = FaultError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FaultError::RangeSyntax(s.to_string());
        let (lo, hi) = s.trim().split_once('-').ok_or_else(bad)?;
        let lo = lo.trim().parse().map_err(|_| bad())?;
        let hi = hi.trim().parse().map_err(|_| bad())?;
        BitRange::new(lo, hi)
    }
}

impl Serialize for BitRange {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitRange {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlipModel {
    /// An event flips exactly one bit, uniform over the range.
    #[default]
    #[serde(rename = "single")]
    SingleBitUniform,
    /// Every in-range bit flips independently with probability `rate`.
    #[serde(rename = "perbit")]
    PerBitIndependent,
}

impl FromStr for FlipModel {
    type Err = FaultError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(FlipModel::SingleBitUniform),
            "perbit" => Ok(FlipModel::PerBitIndependent),
            other => Err(FaultError::BadModel(other.to_string())),
        }
    }
}

impl fmt::Display for FlipModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlipModel::SingleBitUniform => "single",
            FlipModel::PerBitIndependent => "perbit",
        })
    }
}

/// Unreliability of one elastic unit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FaultSpec {
    rate: f64,
    #[serde(rename = "bits")]
    range: BitRange,
    #[serde(default)]
    model: FlipModel,
}

impl FaultSpec {
    pub const RELIABLE: FaultSpec = FaultSpec {
        rate: 0.0,
        range: BitRange::FULL,
        model: FlipModel::SingleBitUniform,
    };

    pub fn new(rate: f64, range: BitRange, model: FlipModel) -> Result<Self, FaultError> {
        if !(0.0..=1.0).contains(&rate) || rate.is_nan() {
            return Err(FaultError::BadRate(rate));
        }
        Ok(FaultSpec { rate, range, model })
    }

    /// Single-bit spec, the default model.
    pub fn single(rate: f64, range: BitRange) -> Result<Self, FaultError> {
        Self::new(rate, range, FlipModel::SingleBitUniform)
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn range(&self) -> BitRange {
        self.range
    }

    pub fn model(&self) -> FlipModel {
        self.model
    }

    pub fn is_reliable(&self) -> bool {
        self.rate == 0.0
    }

    pub fn with_rate(self, rate: f64) -> Result<Self, FaultError> {
        Self::new(rate, self.range, self.model)
    }

    pub fn with_range(self, range: BitRange) -> Self {
        FaultSpec { range, ..self }
    }

    /// Pre-resolves the spec into integer thresholds for the hot path.
    pub fn compile(&self) -> Injector {
        Injector {
            threshold: rate_threshold(self.rate),
            lo: self.range.lo,
            width: self.range.width(),
            model: self.model,
        }
    }
}

impl<'de> Deserialize<'de> for FaultSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            rate: f64,
            #[serde(default = "full_range")]
            bits: BitRange,
            #[serde(default)]
            model: FlipModel,
        }
        fn full_range() -> BitRange {
            BitRange::FULL
        }
        let raw = Raw::deserialize(d)?;
        FaultSpec::new(raw.rate, raw.bits, raw.model).map_err(serde::de::Error::custom)
    }
}

/// P(event) scaled to 2^64; rate 1.0 maps to exactly 2^64.
fn rate_threshold(rate: f64) -> u128 {
    (rate * 18_446_744_073_709_551_616.0) as u128
}

/// A compiled [`FaultSpec`]. Each call to [`Injector::apply`] consumes
/// exactly one value from the stream, whatever the outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Injector {
    threshold: u128,
    lo: u32,
    width: u32,
    model: FlipModel,
}

impl Injector {
    pub const NONE: Injector = Injector {
        threshold: 0,
        lo: 0,
        width: 32,
        model: FlipModel::SingleBitUniform,
    };

    #[inline(always)]
    pub fn is_active(&self) -> bool {
        self.threshold != 0
    }

    /// XOR mask to apply to one result.
    #[inline(always)]
    pub fn flip_mask(&self, rng: &mut RngStream) -> u32 {
        let u = rng.next_u64();
        match self.model {
            FlipModel::SingleBitUniform => {
                let u = u128::from(u);
                if u < self.threshold {
                    // u is uniform on [0, threshold) here; rescale it onto the range.
                    let offset = (u * u128::from(self.width) / self.threshold) as u32;
                    1u32 << (self.lo + offset)
                } else {
                    0
                }
            }
            FlipModel::PerBitIndependent => {
                let mut mask = 0u32;
                let mut state = u;
                for bit in self.lo..self.lo + self.width {
                    state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
                    if u128::from(mix64(state)) < self.threshold {
                        mask |= 1 << bit;
                    }
                }
                mask
            }
        }
    }

    #[inline(always)]
    pub fn apply(&self, value: u32, rng: &mut RngStream) -> u32 {
        value ^ self.flip_mask(rng)
    }
}

/// Passes `value` through the unreliable bus described by `spec`.
pub fn inject_word(value: Word32, spec: &FaultSpec, rng: &mut RngStream) -> Word32 {
    Word32(spec.compile().apply(value.0, rng))
}

/// Marginal probability that `bit` is flipped by one operation.
pub fn flip_probability(spec: &FaultSpec, bit: u32) -> f64 {
    assert!(bit <= 31, "bit index {bit} out of range");
    if !spec.range.contains(bit) {
        return 0.0;
    }
    match spec.model {
        FlipModel::SingleBitUniform => spec.rate / f64::from(spec.range.width()),
        FlipModel::PerBitIndependent => spec.rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    fn spec(rate: f64, lo: u32, hi: u32, model: FlipModel) -> FaultSpec {
        FaultSpec::new(rate, BitRange::new(lo, hi).unwrap(), model).unwrap()
    }

    #[test]
    fn zero_rate_is_identity() {
        let mut rng = derive_stream(1, &[]);
        let s = spec(0.0, 0, 31, FlipModel::PerBitIndependent);
        for _ in 0..1000 {
            assert_eq!(inject_word(Word32(0xFF), &s, &mut rng), Word32(0xFF));
        }
    }

    #[test]
    fn forced_single_flip() {
        let mut rng = derive_stream(1, &[]);
        let s = spec(1.0, 3, 3, FlipModel::SingleBitUniform);
        for _ in 0..100 {
            assert_eq!(inject_word(Word32(0), &s, &mut rng), Word32(8));
        }
    }

    #[test]
    fn rate_one_full_range_always_flips_one_bit() {
        let mut rng = derive_stream(2, &[]);
        let s = spec(1.0, 0, 31, FlipModel::SingleBitUniform);
        let mut seen = 0u32;
        for _ in 0..10_000 {
            let out = inject_word(Word32(0), &s, &mut rng);
            assert_eq!(out.0.count_ones(), 1);
            seen |= out.0;
        }
        assert_eq!(seen, u32::MAX, "every bit should be reachable");
    }

    #[test]
    fn four_percent_over_low_byte() {
        let trials = 100_000u32;
        let mut rng = derive_stream(3, &[]);
        let s = spec(0.04, 0, 7, FlipModel::SingleBitUniform);
        let mut changed = 0u32;
        for _ in 0..trials {
            let out = inject_word(Word32(0), &s, &mut rng);
            if out != Word32(0) {
                changed += 1;
                assert_eq!(out.0.count_ones(), 1);
                assert_eq!(out.0 & !0xFF, 0);
            }
        }
        let p = 0.04;
        let n = f64::from(trials);
        let tol = 3.0 * (p * (1.0 - p) / n).sqrt();
        let frac = f64::from(changed) / n;
        assert!((frac - p).abs() <= tol, "changed fraction {frac}");
    }

    #[test]
    fn flip_probability_examples() {
        let single = spec(0.04, 0, 7, FlipModel::SingleBitUniform);
        assert!((flip_probability(&single, 3) - 0.005).abs() < 1e-15);
        assert_eq!(flip_probability(&single, 12), 0.0);
        let perbit = spec(0.04, 0, 7, FlipModel::PerBitIndependent);
        assert_eq!(flip_probability(&perbit, 12), 0.0);
        let perbit16 = spec(0.04, 0, 15, FlipModel::PerBitIndependent);
        assert_eq!(flip_probability(&perbit16, 9), 0.04);
    }

    #[test]
    fn range_parsing_and_validation() {
        assert_eq!("0-7".parse::<BitRange>().unwrap(), BitRange::new(0, 7).unwrap());
        assert_eq!(" 4 - 31 ".parse::<BitRange>().unwrap().width(), 28);
        assert!("7-0".parse::<BitRange>().is_err());
        assert!("0-32".parse::<BitRange>().is_err());
        assert!("seven".parse::<BitRange>().is_err());
        assert_eq!(BitRange::FULL.mask(), u32::MAX);
        assert_eq!(BitRange::new(4, 7).unwrap().mask(), 0xF0);
    }

    #[test]
    fn rate_validation() {
        assert!(FaultSpec::single(1.5, BitRange::FULL).is_err());
        assert!(FaultSpec::single(-0.1, BitRange::FULL).is_err());
        assert!(FaultSpec::single(f64::NAN, BitRange::FULL).is_err());
    }

    #[test]
    fn serde_shape() {
        let s: FaultSpec =
            serde_json::from_str(r#"{"rate": 0.04, "bits": "0-7", "model": "perbit"}"#).unwrap();
        assert_eq!(s, spec(0.04, 0, 7, FlipModel::PerBitIndependent));
        let d: FaultSpec = serde_json::from_str(r#"{"rate": 0.1}"#).unwrap();
        assert_eq!(d.model(), FlipModel::SingleBitUniform);
        assert_eq!(d.range(), BitRange::FULL);
        assert!(serde_json::from_str::<FaultSpec>(r#"{"rate": 2.0}"#).is_err());
        let back = serde_json::to_string(&s).unwrap();
        assert_eq!(back, r#"{"rate":0.04,"bits":"0-7","model":"perbit"}"#);
    }

    #[test]
    fn widening_range_dilutes_each_bit() {
        for hi in 0..31 {
            let narrow = spec(0.04, 0, hi, FlipModel::SingleBitUniform);
            let wide = spec(0.04, 0, hi + 1, FlipModel::SingleBitUniform);
            for bit in 0..=hi {
                assert!(flip_probability(&wide, bit) < flip_probability(&narrow, bit));
            }
        }
    }
}
