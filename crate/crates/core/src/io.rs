//! Media import and export for inspection: WAV (PCM16), PGM and PPM.
//!
//! Colour conversion uses the full-range BT.601 matrix. Chroma is
//! replicated 2x2 on export and box-averaged 2x2 on import.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::media::{ImageYCbCr, MediaError, PcmAudio, Plane, VideoSeq};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}: not a supported file ({1})")]
    Format(PathBuf, &'static str),
    #[error(transparent)]
    Media(#[from] MediaError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| IoError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub fn wav_bytes(a: &PcmAudio) -> Vec<u8> {
    let data_len = (a.samples.len() * 2) as u32;
    let mut b = Vec::with_capacity(44 + data_len as usize);
    b.extend_from_slice(b"RIFF");
    b.extend_from_slice(&(36 + data_len).to_le_bytes());
    b.extend_from_slice(b"WAVEfmt ");
    b.extend_from_slice(&16u32.to_le_bytes());
    b.extend_from_slice(&1u16.to_le_bytes());
    b.extend_from_slice(&1u16.to_le_bytes());
    b.extend_from_slice(&a.sample_rate.to_le_bytes());
    b.extend_from_slice(&(a.sample_rate * 2).to_le_bytes());
    b.extend_from_slice(&2u16.to_le_bytes());
    b.extend_from_slice(&16u16.to_le_bytes());
    b.extend_from_slice(b"data");
    b.extend_from_slice(&data_len.to_le_bytes());
    for s in &a.samples {
        b.extend_from_slice(&s.to_le_bytes());
    }
    b
}

/// Parses a mono PCM16 WAV file. Other chunks are skipped.
pub fn parse_wav(path: &Path, b: &[u8]) -> Result<PcmAudio, IoError> {
    let bad = |why| IoError::Format(path.to_path_buf(), why);
    if b.len() < 12 || &b[0..4] != b"RIFF" || &b[8..12] != b"WAVE" {
        return Err(bad("missing RIFF/WAVE header"));
    }
    let u16_at = |i: usize| u16::from_le_bytes([b[i], b[i + 1]]);
    let u32_at = |i: usize| u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]]);
    let mut pos = 12;
    let mut rate = None;
    while pos + 8 <= b.len() {
        let id = &b[pos..pos + 4];
        let len = u32_at(pos + 4) as usize;
        let body = pos + 8;
        if body + len > b.len() {
            return Err(bad("truncated chunk"));
        }
        if id == b"fmt " {
            if len < 16 || u16_at(body) != 1 || u16_at(body + 2) != 1 || u16_at(body + 14) != 16 {
                return Err(bad("only mono 16-bit PCM is supported"));
            }
            rate = Some(u32_at(body + 4));
        } else if id == b"data" {
            let rate = rate.ok_or_else(|| bad("data chunk before fmt chunk"))?;
            let samples = b[body..body + len]
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]))
                .collect();
            return Ok(PcmAudio::new(samples, rate)?);
        }
        pos = body + len + (len & 1);
    }
    Err(bad("no data chunk"))
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn to_rgb(y: u8, cb: u8, cr: u8) -> [u8; 3] {
    let (y, cb, cr) = (f64::from(y), f64::from(cb) - 128.0, f64::from(cr) - 128.0);
    [
        clamp_u8(y + 1.402 * cr),
        clamp_u8(y - 0.344136 * cb - 0.714136 * cr),
        clamp_u8(y + 1.772 * cb),
    ]
}

fn to_ycbcr([r, g, b]: [u8; 3]) -> [f64; 3] {
    let (r, g, b) = (f64::from(r), f64::from(g), f64::from(b));
    [
        0.299 * r + 0.587 * g + 0.114 * b,
        128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b,
        128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b,
    ]
}

pub fn pgm_bytes(p: &Plane) -> Vec<u8> {
    let mut b = format!("P5\n{} {}\n255\n", p.width, p.height).into_bytes();
    b.extend_from_slice(&p.data);
    b
}

pub fn ppm_bytes(img: &ImageYCbCr) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let mut b = format!("P6\n{w} {h}\n255\n").into_bytes();
    b.reserve(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            b.extend_from_slice(&to_rgb(img.y.at(x, y), img.cb.at(x / 2, y / 2), img.cr.at(x / 2, y / 2)));
        }
    }
    b
}

/// Parses a binary PPM (P6, maxval 255) into 4:2:0 YCbCr.
pub fn parse_ppm(path: &Path, b: &[u8]) -> Result<ImageYCbCr, IoError> {
    let bad = |why| IoError::Format(path.to_path_buf(), why);
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < b.len() && (b[pos].is_ascii_whitespace() || b[pos] == b'#') {
            if b[pos] == b'#' {
                while pos < b.len() && b[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < b.len() && !b[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(&b[start..pos]);
    }
    pos += 1;
    if fields[0] != b"P6" {
        return Err(bad("only binary P6 is supported"));
    }
    let num = |f: &[u8]| std::str::from_utf8(f).ok().and_then(|s| s.parse::<usize>().ok());
    let (w, h, max) = match (num(fields[1]), num(fields[2]), num(fields[3])) {
        (Some(w), Some(h), Some(m)) => (w, h, m),
        _ => return Err(bad("malformed header")),
    };
    if max != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    let pix = b.get(pos..pos + w * h * 3).ok_or_else(|| bad("truncated pixel data"))?;
    let mut img = ImageYCbCr::new(w, h)?;
    let mut cb = vec![0.0; (w / 2) * (h / 2)];
    let mut cr = vec![0.0; (w / 2) * (h / 2)];
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) * 3;
            let [ly, lb, lr] = to_ycbcr([pix[i], pix[i + 1], pix[i + 2]]);
            img.y.set(x, y, clamp_u8(ly));
            let c = (y / 2) * (w / 2) + x / 2;
            cb[c] += lb / 4.0;
            cr[c] += lr / 4.0;
        }
    }
    img.cb.data = cb.into_iter().map(clamp_u8).collect();
    img.cr.data = cr.into_iter().map(clamp_u8).collect();
    Ok(img)
}

/// Frame file name inside a video directory.
pub fn frame_name(index: usize) -> String {
    format!("frame_{index:04}.ppm")
}

/// Writes a video as numbered PPM frames plus an `fps.txt` into `dir`.
pub fn write_video_dir(dir: &Path, v: &VideoSeq) -> Result<(), IoError> {
    for (i, f) in v.frames.iter().enumerate() {
        write_atomic(&dir.join(frame_name(i)), &ppm_bytes(f))?;
    }
    write_atomic(&dir.join("fps.txt"), format!("{}\n", v.fps).as_bytes())
}

pub fn read_video_dir(dir: &Path) -> Result<VideoSeq, IoError> {
    let fps_path = dir.join("fps.txt");
    let fps = fs::read_to_string(&fps_path)
        .map_err(io_err(&fps_path))?
        .trim()
        .parse()
        .map_err(|_| IoError::Format(fps_path.clone(), "fps.txt must hold an integer"))?;
    let mut frames = Vec::new();
    loop {
        let p = dir.join(frame_name(frames.len()));
        if !p.exists() {
            break;
        }
        let b = fs::read(&p).map_err(io_err(&p))?;
        frames.push(parse_ppm(&p, &b)?);
    }
    Ok(VideoSeq::new(frames, fps)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn wav_round_trip() {
        let a = PcmAudio::new(vec![0, 1, -1, i16::MAX, i16::MIN], 8000).unwrap();
        let b = wav_bytes(&a);
        assert_eq!(b.len(), 44 + 10);
        assert_eq!(parse_wav(Path::new("x.wav"), &b).unwrap(), a);
        assert!(parse_wav(Path::new("x.wav"), &b[..20]).is_err());
    }

    #[test]
    fn ppm_round_trip_is_close() {
        let img = corpus::gen_image(&corpus::CorpusSpec::ImagePlasma {
            seed: 3,
            width: 32,
            height: 32,
        })
        .unwrap();
        let b = ppm_bytes(&img);
        let back = parse_ppm(Path::new("x.ppm"), &b).unwrap();
        let max_err = img
            .y
            .data
            .iter()
            .zip(&back.y.data)
            .map(|(a, b)| (i32::from(*a) - i32::from(*b)).abs())
            .max()
            .unwrap();
        assert!(max_err <= 3, "luma error {max_err}");
    }

    #[test]
    fn ppm_header_comments() {
        let mut b = b"P6\n# made by hand\n16 16\n255\n".to_vec();
        b.extend(std::iter::repeat(128).take(16 * 16 * 3));
        let img = parse_ppm(Path::new("x.ppm"), &b).unwrap();
        assert!(img.y.data.iter().all(|&v| v == 128));
        assert!(parse_ppm(Path::new("x.ppm"), b"P3\n1 1\n255\n").is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
