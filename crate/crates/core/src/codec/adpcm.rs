//! 4-bit IMA-style ADPCM with a leaky predictor.
//!
//! Stage to region mapping (decoder, per codeword):
//!
//! | region           | work                                                  |
//! |------------------|-------------------------------------------------------|
//! | `step_size`      | step partials `step>>1`, `step>>2`, `step>>3`         |
//! | `quantization`   | inverse-quantised magnitude from the code bits        |
//! | `reconstruction` | `sample = predictor +/- magnitude`, saturating        |
//! | `predictor`      | next prediction `sample - (sample >> 5)`              |
//!
//! All region arithmetic is 16-bit. The step-table index is address
//! arithmetic: it is updated with ordinary integer ops and clamped to the
//! table, so this decoder cannot fail on corrupted data.

use crate::alu::{Alu, Exact};
use crate::media::{MediaError, PcmAudio};

use super::bitstream::{Bitstream, CodecId, Header};
use super::{check_codec, DecodeFailure, EncodeError, FailureKind};

pub const QUANTIZATION: &str = "quantization";
pub const STEP_SIZE: &str = "step_size";
pub const PREDICTOR: &str = "predictor";
pub const RECONSTRUCTION: &str = "reconstruction";
pub const REGIONS: &[&str] = &[QUANTIZATION, STEP_SIZE, PREDICTOR, RECONSTRUCTION];

/// Predictor leak: each prediction keeps 31/32 of the last sample.
pub const LEAK_SHIFT: u32 = 5;

const INDEX_TABLE: [i8; 16] = [-1, -1, -1, -1, 2, 4, 6, 8, -1, -1, -1, -1, 2, 4, 6, 8];

const STEP_TABLE: [i16; 89] = [
    7, 8, 9, 10, 11, 12, 13, 14, 16, 17, 19, 21, 23, 25, 28, 31, 34, 37, 41, 45, 50, 55, 60, 66,
    73, 80, 88, 97, 107, 118, 130, 143, 157, 173, 190, 209, 230, 253, 279, 307, 337, 371, 408,
    449, 494, 544, 598, 658, 724, 796, 876, 963, 1060, 1166, 1282, 1411, 1552, 1707, 1878, 2066,
    2272, 2499, 2749, 3024, 3327, 3660, 4026, 4428, 4871, 5358, 5894, 6484, 7132, 7845, 8630,
    9493, 10442, 11487, 12635, 13899, 15289, 16818, 18500, 20350, 22385, 24623, 27086, 29794,
    32767,
];

/// Smallest quantiser step; a silent input never decodes further from zero.
pub const MIN_STEP: i16 = STEP_TABLE[0];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct State {
    predictor: i16,
    index: usize,
}

struct Regions<R> {
    quant: R,
    step: R,
    pred: R,
    recon: R,
}

fn resolve<A: Alu>(alu: &mut A) -> Regions<crate::alu::RegionId> {
    Regions {
        quant: alu.region(QUANTIZATION),
        step: alu.region(STEP_SIZE),
        pred: alu.region(PREDICTOR),
        recon: alu.region(RECONSTRUCTION),
    }
}

/// Decodes one codeword, advancing `state`. Shared by the encoder's local
/// loop (with [`Exact`]) and the decoder.
#[inline]
fn decode_code<A: Alu>(
    alu: &mut A,
    r: &Regions<crate::alu::RegionId>,
    state: &mut State,
    code: u8,
) -> i16 {
    let step = STEP_TABLE[state.index];

    alu.enter(r.step);
    let half = alu.shr16(step, 1);
    let quarter = alu.shr16(step, 2);
    let eighth = alu.shr16(step, 3);
    alu.leave();

    alu.enter(r.quant);
    let mut magnitude = eighth;
    if code & 4 != 0 {
        magnitude = alu.add16_sat(magnitude, step);
    }
    if code & 2 != 0 {
        magnitude = alu.add16_sat(magnitude, half);
    }
    if code & 1 != 0 {
        magnitude = alu.add16_sat(magnitude, quarter);
    }
    alu.leave();

    alu.enter(r.recon);
    let sample = if code & 8 != 0 {
        alu.sub16_sat(state.predictor, magnitude)
    } else {
        alu.add16_sat(state.predictor, magnitude)
    };
    alu.leave();

    alu.enter(r.pred);
    let leak = alu.shr16(sample, LEAK_SHIFT);
    state.predictor = alu.sub16(sample, leak);
    alu.leave();

    let next = state.index as i32 + i32::from(INDEX_TABLE[usize::from(code & 15)]);
    state.index = next.clamp(0, STEP_TABLE.len() as i32 - 1) as usize;
    sample
}

fn quantize(diff: i32, step: i16) -> u8 {
    let mut code = 0u8;
    let mut d = diff.abs();
    let mut s = i32::from(step);
    if diff < 0 {
        code = 8;
    }
    if d >= s {
        code |= 4;
        d -= s;
    }
    s >>= 1;
    if d >= s {
        code |= 2;
        d -= s;
    }
    s >>= 1;
    if d >= s {
        code |= 1;
    }
    code
}

/// Encodes audio and returns the bitstream together with the decoder-exact
/// reconstruction the encoder tracked.
pub fn encode_with_reconstruction(audio: &PcmAudio) -> Result<(Bitstream, PcmAudio), EncodeError> {
    if audio.is_empty() {
        return Err(MediaError::EmptyAudio.into());
    }
    let mut alu = Exact;
    let regions = resolve(&mut alu);
    let mut state = State::default();
    let mut codes = Vec::with_capacity(audio.len());
    let mut recon = Vec::with_capacity(audio.len());
    for &x in &audio.samples {
        let code = quantize(i32::from(x) - i32::from(state.predictor), STEP_TABLE[state.index]);
        recon.push(decode_code(&mut alu, &regions, &mut state, code));
        codes.push(code);
    }
    let payload = codes
        .chunks(2)
        .map(|c| (c[0] << 4) | c.get(1).copied().unwrap_or(0))
        .collect();
    let bs = Bitstream {
        header: Header {
            codec: CodecId::Adpcm,
            quality: 0,
            width: audio.sample_rate,
            height: audio.len() as u32,
            frames: 0,
            rate: 0,
        },
        payload,
    };
    Ok((bs, PcmAudio::new(recon, audio.sample_rate)?))
}

pub fn encode(audio: &PcmAudio) -> Result<Bitstream, EncodeError> {
    encode_with_reconstruction(audio).map(|(bs, _)| bs)
}

pub fn decode<A: Alu>(bs: &Bitstream, alu: &mut A) -> Result<PcmAudio, DecodeFailure> {
    check_codec(bs, CodecId::Adpcm)?;
    let n = bs.header.height as usize;
    if bs.payload.len() < n.div_ceil(2) {
        return Err(DecodeFailure::new(FailureKind::StreamExhausted, "payload"));
    }
    let rate = bs.header.width;
    if rate == 0 {
        return Err(DecodeFailure::new(FailureKind::InvalidCode, "header"));
    }
    let regions = resolve(alu);
    let mut state = State::default();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let byte = bs.payload[i / 2];
        let code = if i % 2 == 0 { byte >> 4 } else { byte & 15 };
        out.push(decode_code(alu, &regions, &mut state, code));
    }
    Ok(PcmAudio {
        samples: out,
        sample_rate: rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alu::FidelityContext;
    use crate::metrics::snr_seg;

    fn sine(freq: f64, amp: f64, rate: u32, secs: f64) -> PcmAudio {
        let n = (f64::from(rate) * secs) as usize;
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / f64::from(rate);
                (amp * 32767.0 * (2.0 * std::f64::consts::PI * freq * t).sin()).round() as i16
            })
            .collect();
        PcmAudio::new(samples, rate).unwrap()
    }

    #[test]
    fn silence_stays_near_zero() {
        let a = PcmAudio::new(vec![0; 1000], 8000).unwrap();
        let bs = encode(&a).unwrap();
        let out = decode(&bs, &mut FidelityContext::reliable()).unwrap();
        assert!(out.samples.iter().all(|&s| s.abs() <= MIN_STEP));
    }

    #[test]
    fn encode_is_deterministic() {
        let a = sine(440.0, 0.3, 8000, 0.1);
        assert_eq!(encode(&a).unwrap(), encode(&a).unwrap());
    }

    #[test]
    fn reliable_decode_matches_encoder_loop() {
        let a = sine(1000.0, 0.5, 16_000, 0.25);
        let (bs, recon) = encode_with_reconstruction(&a).unwrap();
        let out = decode(&bs, &mut FidelityContext::reliable()).unwrap();
        assert_eq!(out, recon);
    }

    #[test]
    fn sine_baseline_quality() {
        let a = sine(1000.0, 0.5, 16_000, 1.0);
        let (_, recon) = encode_with_reconstruction(&a).unwrap();
        let q = snr_seg(&a, &recon, 256).unwrap().value;
        // Frozen from the reliable round trip.
        assert!(q >= 15.0, "SNRseg {q}");
        assert!((q - FROZEN_SINE_SNRSEG).abs() < 1e-9, "SNRseg {q}");
    }

    const FROZEN_SINE_SNRSEG: f64 = 28.059566745456113;

    #[test]
    fn truncated_payload_is_detected() {
        let a = sine(440.0, 0.3, 8000, 0.05);
        let mut bs = encode(&a).unwrap();
        bs.payload.truncate(bs.payload.len() / 2);
        let err = decode(&bs, &mut FidelityContext::reliable()).unwrap_err();
        assert_eq!(err.kind, FailureKind::StreamExhausted);
    }

    #[test]
    fn wrong_codec_rejected() {
        let a = sine(440.0, 0.3, 8000, 0.01);
        let mut bs = encode(&a).unwrap();
        bs.header.codec = CodecId::MiniJpeg;
        assert!(decode(&bs, &mut FidelityContext::reliable()).is_err());
    }

    #[test]
    fn empty_audio_rejected() {
        assert!(encode(&PcmAudio::new(vec![], 8000).unwrap()).is_err());
    }

    #[test]
    fn step_index_never_leaves_table() {
        let mut alu = Exact;
        let r = resolve(&mut alu);
        let mut s = State::default();
        for code in [7u8, 15, 7, 15].iter().cycle().take(400) {
            decode_code(&mut alu, &r, &mut s, *code);
            assert!(s.index < STEP_TABLE.len());
        }
        for _ in 0..400 {
            decode_code(&mut alu, &r, &mut s, 0);
        }
        assert_eq!(s.index, 0);
    }
}
