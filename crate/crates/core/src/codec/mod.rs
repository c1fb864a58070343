//! Codec kernels.
//!
//! Each kernel has a fully reliable encoder and a decoder whose arithmetic is
//! split into named fidelity regions. Decoders never panic on corrupted
//! state: anything that would index outside a table or buffer surfaces as a
//! [`DecodeFailure`], which sweeps record as a failed ("crashed") run.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub mod adpcm;
pub mod bitstream;
pub mod dct;
pub mod entropy;
pub mod jpeg;
pub mod video;

pub use bitstream::{Bitstream, CodecId, ContainerError, Header};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FailureKind {
    InvalidCode,
    IndexOutOfRange,
    StreamExhausted,
    LimitExceeded,
}

impl FailureKind {
    pub const ALL: [FailureKind; 4] = [
        FailureKind::InvalidCode,
        FailureKind::IndexOutOfRange,
        FailureKind::StreamExhausted,
        FailureKind::LimitExceeded,
    ];
}

/// A detected abort of one decode. No partial output survives it.
#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
#[error("{kind:?} in {location}")]
pub struct DecodeFailure {
    pub kind: FailureKind,
    pub location: String,
}

impl DecodeFailure {
    pub fn new(kind: FailureKind, location: &str) -> Self {
        DecodeFailure {
            kind,
            location: location.to_string(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error(transparent)]
    Media(#[from] crate::media::MediaError),
    #[error("quality {0} is outside 1-100")]
    Quality(u8),
}

/// Which kernel a bitstream or experiment refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Adpcm,
    #[serde(alias = "jpeg")]
    MiniJpeg,
    #[serde(alias = "video")]
    MiniVideo,
}

impl Kernel {
    pub const ALL: [Kernel; 3] = [Kernel::Adpcm, Kernel::MiniJpeg, Kernel::MiniVideo];

    /// Every fidelity region the decoder executes.
    pub fn regions(self) -> &'static [&'static str] {
        match self {
            Kernel::Adpcm => adpcm::REGIONS,
            Kernel::MiniJpeg => jpeg::REGIONS,
            Kernel::MiniVideo => video::REGIONS,
        }
    }

    /// Regions held reliable when a rate sweep targets the whole kernel.
    pub fn pinned_reliable(self) -> &'static [&'static str] {
        match self {
            Kernel::Adpcm => &[],
            Kernel::MiniJpeg => &[jpeg::ENTROPY],
            Kernel::MiniVideo => &[video::MOTION, video::HUFFMAN],
        }
    }

    pub fn codec_id(self) -> CodecId {
        match self {
            Kernel::Adpcm => CodecId::Adpcm,
            Kernel::MiniJpeg => CodecId::MiniJpeg,
            Kernel::MiniVideo => CodecId::MiniVideo,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Adpcm => "adpcm",
            Kernel::MiniJpeg => "mini_jpeg",
            Kernel::MiniVideo => "mini_video",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Kernel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adpcm" => Ok(Kernel::Adpcm),
            "mini_jpeg" | "jpeg" => Ok(Kernel::MiniJpeg),
            "mini_video" | "video" => Ok(Kernel::MiniVideo),
            other => Err(format!(
                "unknown kernel {other:?} (expected adpcm, mini_jpeg or mini_video)"
            )),
        }
    }
}

pub(crate) fn check_codec(bs: &Bitstream, want: CodecId) -> Result<(), DecodeFailure> {
    if bs.header.codec != want {
        return Err(DecodeFailure::new(FailureKind::InvalidCode, "header"));
    }
    Ok(())
}

pub(crate) fn check_quality(q: u8) -> Result<(), EncodeError> {
    if (1..=100).contains(&q) {
        Ok(())
    } else {
        Err(EncodeError::Quality(q))
    }
}
