//! Deterministic synthetic test media.
//!
//! Every generator is a pure function of its [`CorpusSpec`]. Images and video
//! use integer arithmetic only; audio uses an integer phase accumulator and a
//! fixed polynomial sine built from IEEE add and multiply, so output does not
//! depend on the platform's math library.

use serde::{Deserialize, Serialize};

use crate::codec::Kernel;
use crate::media::{check_dims, ImageYCbCr, MediaError, PcmAudio, Plane, VideoSeq};
use crate::rng::{derive_stream, RngStream};

/// Seed of the standard corpus.
pub const STANDARD_SEED: u64 = 2010;
/// Peak amplitude of generated audio.
pub const AUDIO_PEAK: i16 = 22938;
pub const MIN_VIDEO_FRAMES: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorpusSpec {
    AudioSineMix {
        seed: u64,
        sample_rate: u32,
        duration_ms: u32,
    },
    ImageGradient {
        seed: u64,
        width: usize,
        height: usize,
    },
    ImagePlasma {
        seed: u64,
        width: usize,
        height: usize,
    },
    VideoMovingBlocks {
        seed: u64,
        width: usize,
        height: usize,
        frames: usize,
        fps: u32,
    },
}

/// Generated media of any kind.
#[derive(Clone, Debug, PartialEq)]
pub enum Media {
    Audio(PcmAudio),
    Image(ImageYCbCr),
    Video(VideoSeq),
}

impl CorpusSpec {
    /// The standard input for a kernel: 1 s of 16 kHz audio, a 128x128
    /// image, or 16 frames of 128x128 video.
    pub fn standard(kernel: Kernel) -> Self {
        match kernel {
            Kernel::Adpcm => CorpusSpec::AudioSineMix {
                seed: STANDARD_SEED,
                sample_rate: 16_000,
                duration_ms: 1000,
            },
            Kernel::MiniJpeg => CorpusSpec::ImagePlasma {
                seed: STANDARD_SEED,
                width: 128,
                height: 128,
            },
            Kernel::MiniVideo => CorpusSpec::VideoMovingBlocks {
                seed: STANDARD_SEED,
                width: 128,
                height: 128,
                frames: 16,
                fps: 25,
            },
        }
    }

    /// The kernel able to code this kind of media.
    pub fn kernel(&self) -> Kernel {
        match self {
            CorpusSpec::AudioSineMix { .. } => Kernel::Adpcm,
            CorpusSpec::ImageGradient { .. } | CorpusSpec::ImagePlasma { .. } => Kernel::MiniJpeg,
            CorpusSpec::VideoMovingBlocks { .. } => Kernel::MiniVideo,
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            CorpusSpec::AudioSineMix { seed, .. }
            | CorpusSpec::ImageGradient { seed, .. }
            | CorpusSpec::ImagePlasma { seed, .. }
            | CorpusSpec::VideoMovingBlocks { seed, .. } => seed,
        }
    }

    pub fn with_seed(mut self, new: u64) -> Self {
        match &mut self {
            CorpusSpec::AudioSineMix { seed, .. }
            | CorpusSpec::ImageGradient { seed, .. }
            | CorpusSpec::ImagePlasma { seed, .. }
            | CorpusSpec::VideoMovingBlocks { seed, .. } => *seed = new,
        }
        self
    }

    pub fn generate(&self) -> Result<Media, MediaError> {
        Ok(match self {
            CorpusSpec::AudioSineMix { .. } => Media::Audio(gen_audio(self)?),
            CorpusSpec::ImageGradient { .. } | CorpusSpec::ImagePlasma { .. } => Media::Image(gen_image(self)?),
            CorpusSpec::VideoMovingBlocks { .. } => Media::Video(gen_video(self)?),
        })
    }
}

impl Media {
    pub fn kernel(&self) -> Kernel {
        match self {
            Media::Audio(_) => Kernel::Adpcm,
            Media::Image(_) => Kernel::MiniJpeg,
            Media::Video(_) => Kernel::MiniVideo,
        }
    }
}

/// `sin(2 pi p)` for a phase `p = phase / 2^32`.
fn sin_cycle(phase: u32) -> f64 {
    let (half, neg) = if phase >= 1 << 31 {
        (phase - (1 << 31), true)
    } else {
        (phase, false)
    };
    // half in [0, 2^31) covers [0, pi); fold onto [0, pi/2].
    let folded = if half > 1 << 30 { (1u32 << 31) - half } else { half };
    let x = f64::from(folded) * (std::f64::consts::PI / f64::from(1u32 << 31));
    let x2 = x * x;
    // Taylor series to x^15; error below 3e-12 on [0, pi/2].
    let mut term = x;
    let mut sum = x;
    for n in 1..8 {
        term = -term * x2 / f64::from((2 * n) * (2 * n + 1));
        sum += term;
    }
    if neg {
        -sum
    } else {
        sum
    }
}

/// Sum of three seeded sinusoids (200-3000 Hz) plus low-level noise.
pub fn gen_audio(spec: &CorpusSpec) -> Result<PcmAudio, MediaError> {
    let CorpusSpec::AudioSineMix {
        seed,
        sample_rate,
        duration_ms,
    } = *spec
    else {
        return Err(MediaError::EmptyAudio);
    };
    if sample_rate == 0 {
        return Err(MediaError::SampleRate);
    }
    let n = (u64::from(sample_rate) * u64::from(duration_ms) / 1000) as usize;
    if n == 0 {
        return Err(MediaError::EmptyAudio);
    }
    let mut rng = derive_stream(seed, &["audio".into()]);
    let tones: Vec<(u32, u32, f64)> = (0..3)
        .map(|_| {
            let freq = 200 + rng.below(2801) as u32;
            let step = ((u64::from(freq) << 32) / u64::from(sample_rate)) as u32;
            let start = rng.next_u64() as u32;
            let amp = 0.12 + 0.08 * rng.next_f64();
            (step, start, amp)
        })
        .collect();
    let mut noise = rng.child("noise");
    let full = 32767.0;
    let samples = (0..n)
        .map(|i| {
            let mut v = 0.0;
            for &(step, start, amp) in &tones {
                v += amp * sin_cycle(start.wrapping_add(step.wrapping_mul(i as u32)));
            }
            v += 0.01 * (2.0 * noise.next_f64() - 1.0);
            let s = (v * full).round();
            s.clamp(-f64::from(AUDIO_PEAK), f64::from(AUDIO_PEAK)) as i16
        })
        .collect();
    PcmAudio::new(samples, sample_rate)
}

/// Value noise: a seeded lattice with `cell`-pixel spacing, bilinearly
/// interpolated, returning values in [-amp, amp].
fn value_noise(rng: &RngStream, width: usize, height: usize, cell: usize, amp: i32) -> Vec<i32> {
    let gw = width / cell + 2;
    let gh = height / cell + 2;
    let mut r = rng.clone();
    let lattice: Vec<i32> = (0..gw * gh).map(|_| r.range_i32(-amp, amp)).collect();
    let c = cell as i32;
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        let (gy, fy) = (y / cell, (y % cell) as i32);
        for x in 0..width {
            let (gx, fx) = (x / cell, (x % cell) as i32);
            let at = |i: usize, j: usize| lattice[j * gw + i];
            let top = at(gx, gy) * (c - fx) + at(gx + 1, gy) * fx;
            let bot = at(gx, gy + 1) * (c - fx) + at(gx + 1, gy + 1) * fx;
            out.push((top * (c - fy) + bot * fy) / (c * c));
        }
    }
    out
}

/// A plane holding a linear gradient between two seeded levels plus
/// optional plasma texture.
fn textured_plane(rng: &RngStream, width: usize, height: usize, plasma: bool, lo: i32, hi: i32) -> Plane {
    let mut r = rng.clone();
    let a = r.range_i32(lo, hi);
    let b = r.range_i32(lo, hi);
    let horizontal = r.below(2) == 0;
    let mut texture = vec![0; width * height];
    if plasma {
        for (i, (cell, amp)) in [(32, 40), (16, 20), (8, 10)].into_iter().enumerate() {
            let n = value_noise(&rng.child(i as u64), width, height, cell.min(width.max(1)), amp);
            for (t, v) in texture.iter_mut().zip(n) {
                *t += v;
            }
        }
    }
    let mut p = Plane::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let (t, span) = if horizontal { (x, width) } else { (y, height) };
            let g = a + (b - a) * t as i32 / span.max(2) as i32;
            p.set(x, y, (g + texture[y * width + x]).clamp(0, 255) as u8);
        }
    }
    p
}

fn image_from(seed: u64, width: usize, height: usize, plasma: bool, label: &str) -> Result<ImageYCbCr, MediaError> {
    check_dims(width, height)?;
    let root = derive_stream(seed, &[label.into()]);
    let y = textured_plane(&root.child("y"), width, height, plasma, 40, 216);
    let cb = textured_plane(&root.child("cb"), width / 2, height / 2, plasma, 96, 160);
    let cr = textured_plane(&root.child("cr"), width / 2, height / 2, plasma, 96, 160);
    ImageYCbCr::from_planes(y, cb, cr)
}

/// Smooth gradient image, with plasma texture for [`CorpusSpec::ImagePlasma`].
pub fn gen_image(spec: &CorpusSpec) -> Result<ImageYCbCr, MediaError> {
    match *spec {
        CorpusSpec::ImageGradient { seed, width, height } => image_from(seed, width, height, false, "gradient"),
        CorpusSpec::ImagePlasma { seed, width, height } => image_from(seed, width, height, true, "plasma"),
        _ => Err(MediaError::Dimensions { width: 0, height: 0 }),
    }
}

struct Block {
    x: i32,
    y: i32,
    w: i32,
    h: i32,
    vx: i32,
    vy: i32,
    luma: u8,
    cb: u8,
    cr: u8,
}

impl Block {
    fn random(r: &mut RngStream, width: i32, height: i32) -> Self {
        let w = r.range_i32(16, 32).min(width / 2);
        let h = r.range_i32(16, 32).min(height / 2);
        let mut vel = || {
            let v = r.range_i32(1, 3);
            if r.below(2) == 0 {
                v
            } else {
                -v
            }
        };
        let vx = vel();
        let vy = vel();
        Block {
            x: r.range_i32(0, width - w),
            y: r.range_i32(0, height - h),
            w,
            h,
            vx,
            vy,
            luma: r.range_i32(0, 255) as u8,
            cb: r.range_i32(64, 192) as u8,
            cr: r.range_i32(64, 192) as u8,
        }
    }

    /// Moves one frame, bouncing off the frame edges.
    fn step(&mut self, width: i32, height: i32) {
        self.x += self.vx;
        if self.x < 0 || self.x + self.w > width {
            self.vx = -self.vx;
            self.x = self.x.clamp(0, width - self.w);
        }
        self.y += self.vy;
        if self.y < 0 || self.y + self.h > height {
            self.vy = -self.vy;
            self.y = self.y.clamp(0, height - self.h);
        }
    }

    fn paint(&self, img: &mut ImageYCbCr) {
        for y in self.y..self.y + self.h {
            for x in self.x..self.x + self.w {
                img.y.set(x as usize, y as usize, self.luma);
                img.cb.set(x as usize / 2, y as usize / 2, self.cb);
                img.cr.set(x as usize / 2, y as usize / 2, self.cr);
            }
        }
    }
}

/// Static plasma background with two seeded solid rectangles moving at
/// constant whole-pixel velocities.
pub fn gen_video(spec: &CorpusSpec) -> Result<VideoSeq, MediaError> {
    let CorpusSpec::VideoMovingBlocks {
        seed,
        width,
        height,
        frames,
        fps,
    } = *spec
    else {
        return Err(MediaError::NoFrames);
    };
    check_dims(width, height)?;
    if frames < MIN_VIDEO_FRAMES {
        return Err(MediaError::NoFrames);
    }
    let background = image_from(seed, width, height, true, "background")?;
    let mut r = derive_stream(seed, &["blocks".into()]);
    let (w, h) = (width as i32, height as i32);
    let mut blocks = [Block::random(&mut r, w, h), Block::random(&mut r, w, h)];
    let mut out = Vec::with_capacity(frames);
    for _ in 0..frames {
        let mut f = background.clone();
        for b in &blocks {
            b.paint(&mut f);
        }
        out.push(f);
        for b in &mut blocks {
            b.step(w, h);
        }
    }
    VideoSeq::new(out, fps)
}

pub fn standard_audio() -> PcmAudio {
    gen_audio(&CorpusSpec::standard(Kernel::Adpcm)).expect("standard spec is valid")
}

pub fn standard_image() -> ImageYCbCr {
    gen_image(&CorpusSpec::standard(Kernel::MiniJpeg)).expect("standard spec is valid")
}

pub fn standard_video() -> VideoSeq {
    gen_video(&CorpusSpec::standard(Kernel::MiniVideo)).expect("standard spec is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_polynomial_is_accurate() {
        for i in 0..4096u32 {
            let phase = i.wrapping_mul(1_048_573);
            let want = (2.0 * std::f64::consts::PI * f64::from(phase) / 4_294_967_296.0).sin();
            assert!((sin_cycle(phase) - want).abs() < 1e-10, "{phase}");
        }
    }

    #[test]
    fn audio_is_deterministic_and_bounded() {
        let a = standard_audio();
        assert_eq!(a, standard_audio());
        assert_eq!(a.len(), 16_000);
        assert!(a.samples.iter().all(|s| s.unsigned_abs() <= AUDIO_PEAK as u16));
        assert!(a.samples.iter().any(|s| s.unsigned_abs() > 3000));
    }

    #[test]
    fn audio_regression_vector() {
        assert_eq!(standard_audio().samples[..8], FROZEN_AUDIO_HEAD);
    }

    const FROZEN_AUDIO_HEAD: [i16; 8] = [10115, 5149, 234, -5407, -9309, -12122, -12708, -11275];

    #[test]
    fn seeds_differ() {
        let spec = |seed| CorpusSpec::AudioSineMix {
            seed,
            sample_rate: 8000,
            duration_ms: 100,
        };
        assert_ne!(gen_audio(&spec(1)).unwrap(), gen_audio(&spec(2)).unwrap());
    }

    #[test]
    fn images_are_deterministic() {
        for spec in [
            CorpusSpec::standard(Kernel::MiniJpeg),
            CorpusSpec::ImageGradient {
                seed: 3,
                width: 64,
                height: 32,
            },
        ] {
            assert_eq!(gen_image(&spec).unwrap(), gen_image(&spec).unwrap());
        }
    }

    #[test]
    fn dimension_errors() {
        assert!(gen_image(&CorpusSpec::ImagePlasma {
            seed: 1,
            width: 100,
            height: 64
        })
        .is_err());
        assert!(gen_video(&CorpusSpec::VideoMovingBlocks {
            seed: 1,
            width: 64,
            height: 64,
            frames: 4,
            fps: 25
        })
        .is_err());
    }

    #[test]
    fn video_has_motion() {
        let v = standard_video();
        assert_eq!(v.frames.len(), 16);
        assert_eq!(v, standard_video());
        assert!(v.frames.windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn spec_json_round_trip() {
        let s = CorpusSpec::standard(Kernel::MiniVideo);
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"kind\":\"video_moving_blocks\""));
        assert_eq!(serde_json::from_str::<CorpusSpec>(&j).unwrap(), s);
    }
}
