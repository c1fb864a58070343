//! Raw media containers shared by the corpus, codecs and metrics.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MediaError {
    #[error("dimensions {width}x{height} must be non-zero multiples of 16")]
    Dimensions { width: usize, height: usize },
    #[error("plane {plane} has {got} samples, expected {expected}")]
    PlaneSize {
        plane: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("video needs at least one frame")]
    NoFrames,
    #[error("frame {index} is {got_w}x{got_h}, expected {width}x{height}")]
    FrameSize {
        index: usize,
        got_w: usize,
        got_h: usize,
        width: usize,
        height: usize,
    },
    #[error("audio is empty")]
    EmptyAudio,
    #[error("sample rate must be positive")]
    SampleRate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PcmAudio {
    pub samples: Vec<i16>,
    pub sample_rate: u32,
}

impl PcmAudio {
    pub fn new(samples: Vec<i16>, sample_rate: u32) -> Result<Self, MediaError> {
        if sample_rate == 0 {
            return Err(MediaError::SampleRate);
        }
        Ok(PcmAudio {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// One 8-bit sample plane.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Plane {
    pub fn new(width: usize, height: usize) -> Self {
        Plane {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    /// Sample with coordinates clamped into the plane.
    #[inline]
    pub fn at_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.at(x, y)
    }
}

/// 8-bit YCbCr image with 4:2:0 chroma.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageYCbCr {
    pub y: Plane,
    pub cb: Plane,
    pub cr: Plane,
}

impl ImageYCbCr {
    /// Blank image; dimensions must be multiples of 16.
    pub fn new(width: usize, height: usize) -> Result<Self, MediaError> {
        check_dims(width, height)?;
        Ok(ImageYCbCr {
            y: Plane::new(width, height),
            cb: Plane::filled(width / 2, height / 2, 128),
            cr: Plane::filled(width / 2, height / 2, 128),
        })
    }

    pub fn from_planes(y: Plane, cb: Plane, cr: Plane) -> Result<Self, MediaError> {
        let (w, h) = (y.width, y.height);
        check_dims(w, h)?;
        for (name, p, pw, ph) in [("Y", &y, w, h), ("Cb", &cb, w / 2, h / 2), ("Cr", &cr, w / 2, h / 2)] {
            if p.width != pw || p.height != ph || p.data.len() != pw * ph {
                return Err(MediaError::PlaneSize {
                    plane: name,
                    got: p.data.len(),
                    expected: pw * ph,
                });
            }
        }
        Ok(ImageYCbCr { y, cb, cr })
    }

    pub fn width(&self) -> usize {
        self.y.width
    }

    pub fn height(&self) -> usize {
        self.y.height
    }

    pub fn planes(&self) -> [&Plane; 3] {
        [&self.y, &self.cb, &self.cr]
    }

    pub fn planes_mut(&mut self) -> [&mut Plane; 3] {
        [&mut self.y, &mut self.cb, &mut self.cr]
    }

    /// Total sample count over all planes.
    pub fn sample_count(&self) -> usize {
        self.planes().iter().map(|p| p.data.len()).sum()
    }
}

pub(crate) fn check_dims(width: usize, height: usize) -> Result<(), MediaError> {
    if width == 0 || height == 0 || width % 16 != 0 || height % 16 != 0 {
        return Err(MediaError::Dimensions { width, height });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VideoSeq {
    pub frames: Vec<ImageYCbCr>,
    pub fps: u32,
}

impl VideoSeq {
    pub fn new(frames: Vec<ImageYCbCr>, fps: u32) -> Result<Self, MediaError> {
        let first = frames.first().ok_or(MediaError::NoFrames)?;
        let (w, h) = (first.width(), first.height());
        for (index, f) in frames.iter().enumerate() {
            if f.width() != w || f.height() != h {
                return Err(MediaError::FrameSize {
                    index,
                    got_w: f.width(),
                    got_h: f.height(),
                    width: w,
                    height: h,
                });
            }
        }
        Ok(VideoSeq { frames, fps })
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions_must_be_macroblock_aligned() {
        assert!(ImageYCbCr::new(32, 16).is_ok());
        assert!(ImageYCbCr::new(30, 16).is_err());
        assert!(ImageYCbCr::new(0, 16).is_err());
    }

    #[test]
    fn chroma_is_half_resolution() {
        let img = ImageYCbCr::new(32, 48).unwrap();
        assert_eq!((img.cb.width, img.cb.height), (16, 24));
        assert_eq!(img.sample_count(), 32 * 48 + 2 * 16 * 24);
    }

    #[test]
    fn mismatched_frames_rejected() {
        let a = ImageYCbCr::new(16, 16).unwrap();
        let b = ImageYCbCr::new(32, 16).unwrap();
        assert!(VideoSeq::new(vec![a.clone(), b], 25).is_err());
        assert!(VideoSeq::new(vec![], 25).is_err());
        assert!(VideoSeq::new(vec![a], 25).is_ok());
    }
}
