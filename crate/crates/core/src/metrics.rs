//! Reference-vs-decoded quality scores.
//!
//! PSNR (peak 255) for images and video, segmented SNR for audio. Both are
//! clamped so that perfect reconstructions produce finite, comparable numbers.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::media::{ImageYCbCr, PcmAudio, Plane, VideoSeq};

pub const PSNR_PEAK: f64 = 255.0;
pub const PSNR_MAX_DB: f64 = 99.0;
pub const SNRSEG_MIN_DB: f64 = -10.0;
pub const SNRSEG_MAX_DB: f64 = 35.0;
pub const SNRSEG_SEGMENT: usize = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("sequence lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("sequences are empty")]
    Empty,
    #[error("shapes differ: {0}")]
    ShapeMismatch(String),
    #[error("signal of {len} samples is shorter than one {segment}-sample segment")]
    TooShort { len: usize, segment: usize },
    #[error("every segment of the reference is silent")]
    AllSegmentsSkipped,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Metric {
    #[serde(rename = "PSNR")]
    Psnr,
    #[serde(rename = "SNRseg")]
    SnrSeg,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Psnr => "PSNR",
            Metric::SnrSeg => "SNRseg",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QualityScore {
    pub metric: Metric,
    /// dB after clamping.
    pub value: f64,
    /// Whether a clamp was applied anywhere in the computation.
    pub clamped: bool,
}

impl fmt::Display for QualityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:.2} dB", self.metric, self.value)?;
        if self.clamped {
            f.write_str(" (clamped)")?;
        }
        Ok(())
    }
}

impl QualityScore {
    /// The best score the metric can report.
    pub fn ceiling(metric: Metric) -> f64 {
        match metric {
            Metric::Psnr => PSNR_MAX_DB,
            Metric::SnrSeg => SNRSEG_MAX_DB,
        }
    }
}

/// Mean squared difference.
pub fn mse<T: Copy + Into<f64>>(reference: &[T], test: &[T]) -> Result<f64, MetricError> {
    if reference.len() != test.len() {
        return Err(MetricError::LengthMismatch(reference.len(), test.len()));
    }
    if reference.is_empty() {
        return Err(MetricError::Empty);
    }
    let (sum, n) = sq_err(reference, test);
    Ok(sum / n as f64)
}

fn sq_err<T: Copy + Into<f64>>(reference: &[T], test: &[T]) -> (f64, usize) {
    let sum = reference
        .iter()
        .zip(test)
        .map(|(&a, &b)| {
            let d = a.into() - b.into();
            d * d
        })
        .sum();
    (sum, reference.len())
}

/// Anything made of 8-bit planes that PSNR can pool over.
pub trait Planar {
    fn plane_list(&self) -> Vec<&Plane>;
}

impl Planar for ImageYCbCr {
    fn plane_list(&self) -> Vec<&Plane> {
        self.planes().to_vec()
    }
}

impl Planar for VideoSeq {
    fn plane_list(&self) -> Vec<&Plane> {
        self.frames.iter().flat_map(|f| f.planes()).collect()
    }
}

/// PSNR from a pooled MSE, before clamping. Infinite when `mse == 0`.
pub fn psnr_from_mse(mse: f64) -> f64 {
    10.0 * (PSNR_PEAK * PSNR_PEAK / mse).log10()
}

/// PSNR over every plane (and every frame, for video) with one pooled MSE.
pub fn psnr<P: Planar + ?Sized>(reference: &P, test: &P) -> Result<QualityScore, MetricError> {
    let a = reference.plane_list();
    let b = test.plane_list();
    if a.len() != b.len() {
        return Err(MetricError::ShapeMismatch(format!(
            "{} planes vs {} planes",
            a.len(),
            b.len()
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, (pa, pb)) in a.iter().zip(&b).enumerate() {
        if pa.width != pb.width || pa.height != pb.height {
            return Err(MetricError::ShapeMismatch(format!(
                "plane {i}: {}x{} vs {}x{}",
                pa.width, pa.height, pb.width, pb.height
            )));
        }
        let (s, n) = sq_err(&pa.data, &pb.data);
        total += s;
        count += n;
    }
    if count == 0 {
        return Err(MetricError::Empty);
    }
    let raw = psnr_from_mse(total / count as f64);
    let value = raw.clamp(0.0, PSNR_MAX_DB);
    Ok(QualityScore {
        metric: Metric::Psnr,
        value,
        clamped: value != raw,
    })
}

/// Per-segment SNR in dB, unclamped. `None` marks a silent reference segment;
/// a segment with zero error is `Some(INFINITY)`. The trailing partial
/// segment is dropped.
pub fn snr_segments(
    reference: &[i16],
    test: &[i16],
    segment_len: usize,
) -> Result<Vec<Option<f64>>, MetricError> {
    if reference.len() != test.len() {
        return Err(MetricError::LengthMismatch(reference.len(), test.len()));
    }
    if segment_len == 0 || reference.len() < segment_len {
        return Err(MetricError::TooShort {
            len: reference.len(),
            segment: segment_len,
        });
    }
    Ok(reference
        .chunks_exact(segment_len)
        .zip(test.chunks_exact(segment_len))
        .map(|(r, t)| {
            let mut signal: u64 = 0;
            let mut noise: u64 = 0;
            for (&a, &b) in r.iter().zip(t) {
                let a = i64::from(a);
                let d = a - i64::from(b);
                signal += (a * a) as u64;
                noise += (d * d) as u64;
            }
            if signal == 0 {
                None
            } else {
                Some(10.0 * (signal as f64 / noise as f64).log10())
            }
        })
        .collect())
}

/// Segmented SNR: per-segment SNR clamped to [-10, 35] dB, averaged over
/// segments whose reference is not silent.
pub fn snr_seg(
    reference: &PcmAudio,
    test: &PcmAudio,
    segment_len: usize,
) -> Result<QualityScore, MetricError> {
    let segs = snr_segments(&reference.samples, &test.samples, segment_len)?;
    let mut clamped = false;
    let mut sum = 0.0;
    let mut n = 0usize;
    for s in segs.into_iter().flatten() {
        let c = s.clamp(SNRSEG_MIN_DB, SNRSEG_MAX_DB);
        clamped |= c != s;
        sum += c;
        n += 1;
    }
    if n == 0 {
        return Err(MetricError::AllSegmentsSkipped);
    }
    Ok(QualityScore {
        metric: Metric::SnrSeg,
        value: sum / n as f64,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: usize, h: usize, v: u8) -> ImageYCbCr {
        let mut img = ImageYCbCr::new(w, h).unwrap();
        for p in img.planes_mut() {
            p.data.fill(v);
        }
        img
    }

    fn audio(samples: Vec<i16>) -> PcmAudio {
        PcmAudio::new(samples, 16_000).unwrap()
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1u8, 2, 3], &[1u8, 2, 3]).unwrap(), 0.0);
        assert_eq!(mse(&[0u8; 4], &[255u8; 4]).unwrap(), 65025.0);
        assert_eq!(mse(&[0i16; 4], &[1i16, 2, 3, 4]).unwrap(), 7.5);
        assert!(matches!(mse(&[0u8; 3], &[0u8; 4]), Err(MetricError::LengthMismatch(3, 4))));
        assert_eq!(mse::<u8>(&[], &[]), Err(MetricError::Empty));
    }

    #[test]
    fn psnr_examples() {
        let a = gray(16, 16, 0);
        let s = psnr(&a, &a).unwrap();
        assert_eq!(s.value, 99.0);
        assert!(s.clamped);
        let s = psnr(&a, &gray(16, 16, 255)).unwrap();
        assert_eq!(s.value, 0.0);
        let s = psnr(&a, &gray(16, 16, 16)).unwrap();
        assert!((s.value - 24.048).abs() < 0.01, "{}", s.value);
        assert!(!s.clamped);
    }

    #[test]
    fn psnr_shape_mismatch() {
        assert!(psnr(&gray(16, 16, 0), &gray(32, 16, 0)).is_err());
    }

    #[test]
    fn video_psnr_pools_mse() {
        // Frame 0 perfect, frame 1 off by 16: pooled MSE is 128, not an
        // average of per-frame PSNRs (which would be infinite).
        let r = VideoSeq::new(vec![gray(16, 16, 0), gray(16, 16, 0)], 25).unwrap();
        let t = VideoSeq::new(vec![gray(16, 16, 0), gray(16, 16, 16)], 25).unwrap();
        let s = psnr(&r, &t).unwrap();
        assert!((s.value - 10.0 * (65025.0f64 / 128.0).log10()).abs() < 1e-12);
    }

    #[test]
    fn psnr_decreases_with_noise() {
        let base = gray(16, 16, 100);
        let mut last = f64::INFINITY;
        for amp in [2u8, 8, 32] {
            let mut noisy = base.clone();
            for (i, v) in noisy.y.data.iter_mut().enumerate() {
                *v = if i % 2 == 0 { *v + amp } else { *v - amp };
            }
            let s = psnr(&base, &noisy).unwrap().value;
            assert!(s < last);
            last = s;
        }
    }

    #[test]
    fn snrseg_identical_is_clamped_high() {
        let a = audio((0..512).map(|i| (i * 37 % 2000) as i16 - 1000).collect());
        let s = snr_seg(&a, &a, 256).unwrap();
        assert_eq!(s.value, 35.0);
        assert!(s.clamped);
    }

    #[test]
    fn snrseg_negated_signal() {
        let r: Vec<i16> = (0..512).map(|i| ((i % 50) as i16 - 25) * 40 + 1).collect();
        let t: Vec<i16> = r.iter().map(|&v| -v).collect();
        let s = snr_seg(&audio(r), &audio(t), 256).unwrap();
        assert!((s.value + 6.0206).abs() < 0.01, "{}", s.value);
    }

    #[test]
    fn snrseg_small_error_clamps() {
        let s = snr_seg(&audio(vec![1000; 256]), &audio(vec![1001; 256]), 256).unwrap();
        assert_eq!(s.value, 35.0);
        assert!(s.clamped);
    }

    #[test]
    fn snrseg_is_not_symmetric() {
        let r: Vec<i16> = (0..256).map(|i| (i as i16 - 128) * 100).collect();
        let t: Vec<i16> = r.iter().map(|&v| v / 2).collect();
        let ab = snr_seg(&audio(r.clone()), &audio(t.clone()), 256).unwrap().value;
        let ba = snr_seg(&audio(t), &audio(r), 256).unwrap().value;
        assert!((ab - ba).abs() > 1.0);
    }

    #[test]
    fn snrseg_skips_silence_and_partial_tail() {
        let mut r = vec![0i16; 256];
        r.extend(std::iter::repeat(1000).take(256));
        r.extend(std::iter::repeat(5).take(100));
        let mut t = r.clone();
        t[300] = 0;
        let segs = snr_segments(&r, &t, 256).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0], None);
        assert!(snr_seg(&audio(vec![0; 512]), &audio(vec![3; 512]), 256).is_err());
        assert!(matches!(
            snr_seg(&audio(vec![1; 100]), &audio(vec![1; 100]), 256),
            Err(MetricError::TooShort { .. })
        ));
    }
}
