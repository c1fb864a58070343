//! `EFC1` container and MSB-first bit I/O.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! off  size  field
//!   0     4  magic "EFC1"
//!   4     1  container version (1)
//!   5     1  codec id (1 adpcm, 2 mini-jpeg, 3 mini-video)
//!   6     1  quality (1-100, 0 for adpcm)
//!   7     1  flags (reserved, 0)
//!   8     4  width  | adpcm: sample rate
//!  12     4  height | adpcm: sample count
//!  16     4  frame count (1 for still images, 0 for adpcm)
//!  20     4  frame rate (video only, else 0)
//!  24     4  payload length in bytes
//!  28     n  payload
//! ```

use std::fmt;

use thiserror::Error;

use super::{DecodeFailure, FailureKind};

pub const MAGIC: &[u8; 4] = b"EFC1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CodecId {
    Adpcm = 1,
    MiniJpeg = 2,
    MiniVideo = 3,
}

impl CodecId {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            1 => Some(CodecId::Adpcm),
            2 => Some(CodecId::MiniJpeg),
            3 => Some(CodecId::MiniVideo),
            _ => None,
        }
    }
}

impl fmt::Display for CodecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodecId::Adpcm => "adpcm",
            CodecId::MiniJpeg => "mini_jpeg",
            CodecId::MiniVideo => "mini_video",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContainerError {
    #[error("container is {0} bytes, shorter than the {HEADER_LEN}-byte header")]
    Short(usize),
    #[error("bad magic {0:02x?}")]
    Magic([u8; 4]),
    #[error("unsupported container version {0}")]
    Version(u8),
    #[error("unknown codec id {0}")]
    Codec(u8),
    #[error("payload length {declared} does not match the {actual} bytes present")]
    PayloadLength { declared: usize, actual: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Header {
    pub codec: CodecId,
    pub quality: u8,
    pub width: u32,
    pub height: u32,
    pub frames: u32,
    pub rate: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitstream {
    pub header: Header,
    pub payload: Vec<u8>,
}

impl Bitstream {
    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(h.codec as u8);
        out.push(h.quality);
        out.push(0);
        for v in [h.width, h.height, h.frames, h.rate, self.payload.len() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parses and verifies a container. The magic is checked before anything
    /// else is read.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ContainerError> {
        if bytes.len() < HEADER_LEN {
            return Err(ContainerError::Short(bytes.len()));
        }
        let magic: [u8; 4] = bytes[0..4].try_into().expect("length checked");
        if &magic != MAGIC {
            return Err(ContainerError::Magic(magic));
        }
        if bytes[4] != VERSION {
            return Err(ContainerError::Version(bytes[4]));
        }
        let codec = CodecId::from_byte(bytes[5]).ok_or(ContainerError::Codec(bytes[5]))?;
        let word = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().expect("in header"));
        let declared = word(24) as usize;
        let actual = bytes.len() - HEADER_LEN;
        if declared != actual {
            return Err(ContainerError::PayloadLength { declared, actual });
        }
        Ok(Bitstream {
            header: Header {
                codec,
                quality: bytes[6],
                width: word(8),
                height: word(12),
                frames: word(16),
                rate: word(20),
            },
            payload: bytes[HEADER_LEN..].to_vec(),
        })
    }
}

/// MSB-first bit packer. The final byte is padded with one bits.
#[derive(Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    acc: u32,
    nbits: u32,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes the low `n` bits of `value`, `n <= 24`.
    pub fn put(&mut self, value: u32, n: u32) {
        debug_assert!(n <= 24);
        if n == 0 {
            return;
        }
        self.acc = (self.acc << n) | (value & ((1 << n) - 1));
        self.nbits += n;
        while self.nbits >= 8 {
            self.nbits -= 8;
            self.bytes.push((self.acc >> self.nbits) as u8);
        }
        self.acc &= (1 << self.nbits) - 1;
    }

    pub fn put_bit(&mut self, bit: bool) {
        self.put(u32::from(bit), 1);
    }

    pub fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            let pad = 8 - self.nbits;
            self.put((1 << pad) - 1, pad);
        }
        self.bytes
    }
}

/// MSB-first bit reader. Reading past the end is a decode failure, never a
/// panic.
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    region: &'static str,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader {
            bytes,
            pos: 0,
            region: "bitstream",
        }
    }

    /// Region name reported when the stream runs dry.
    pub fn set_region(&mut self, region: &'static str) {
        self.region = region;
    }

    #[inline]
    pub fn bit(&mut self) -> Result<u32, DecodeFailure> {
        let byte = self.pos >> 3;
        if byte >= self.bytes.len() {
            return Err(DecodeFailure::new(FailureKind::StreamExhausted, self.region));
        }
        let b = (self.bytes[byte] >> (7 - (self.pos & 7))) & 1;
        self.pos += 1;
        Ok(u32::from(b))
    }

    pub fn bits(&mut self, n: u32) -> Result<u32, DecodeFailure> {
        let mut v = 0;
        for _ in 0..n {
            v = (v << 1) | self.bit()?;
        }
        Ok(v)
    }

    pub fn bits_read(&self) -> usize {
        self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Bitstream {
        Bitstream {
            header: Header {
                codec: CodecId::MiniVideo,
                quality: 75,
                width: 128,
                height: 96,
                frames: 16,
                rate: 25,
            },
            payload: vec![1, 2, 3, 250],
        }
    }

    #[test]
    fn header_layout_is_fixed() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[..4], b"EFC1");
        assert_eq!(bytes[4..8], [1, 3, 75, 0]);
        assert_eq!(bytes[8..12], 128u32.to_le_bytes());
        assert_eq!(bytes[24..28], 4u32.to_le_bytes());
        assert_eq!(bytes.len(), HEADER_LEN + 4);
        assert_eq!(Bitstream::from_bytes(&bytes).unwrap(), sample());
    }

    #[test]
    fn header_rejections() {
        let good = sample().to_bytes();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(Bitstream::from_bytes(&bad), Err(ContainerError::Magic(_))));
        let mut bad = good.clone();
        bad[4] = 9;
        assert_eq!(Bitstream::from_bytes(&bad), Err(ContainerError::Version(9)));
        let mut bad = good.clone();
        bad[5] = 0;
        assert_eq!(Bitstream::from_bytes(&bad), Err(ContainerError::Codec(0)));
        assert!(matches!(
            Bitstream::from_bytes(&good[..good.len() - 1]),
            Err(ContainerError::PayloadLength { .. })
        ));
        assert_eq!(Bitstream::from_bytes(&good[..10]), Err(ContainerError::Short(10)));
    }

    #[test]
    fn bits_round_trip() {
        let mut w = BitWriter::new();
        w.put(0b101, 3);
        w.put(0xABCD, 16);
        w.put_bit(false);
        let bytes = w.finish();
        let mut r = BitReader::new(&bytes);
        assert_eq!(r.bits(3).unwrap(), 0b101);
        assert_eq!(r.bits(16).unwrap(), 0xABCD);
        assert_eq!(r.bit().unwrap(), 0);
        // Padding is all ones, then the stream is exhausted.
        assert_eq!(r.bits(4).unwrap(), 0xF);
        let err = r.bit().unwrap_err();
        assert_eq!(err.kind, FailureKind::StreamExhausted);
    }
}
