//! Mini-JPEG: baseline-style still image coding.
//!
//! Luma is coded at full resolution. Chroma planes (already 4:2:0 in
//! [`ImageYCbCr`]) are decimated by a further 2x2 average before coding, and
//! the decoder interpolates them back, so the chroma path has a genuine
//! upsampling stage.
//!
//! Payload: every luma block in raster order, then every Cb block, then every
//! Cr block, each coded with [`entropy::encode_block`] and one DC predictor
//! per component. Blocks are forward transformed with [`dct::fdct`] and
//! quantized by the standard tables scaled by the quality setting.
//!
//! | region           | work                                                 |
//! |------------------|------------------------------------------------------|
//! | `entropy_decode` | sign extension and DC prediction                     |
//! | `dequantize`     | coefficient x table entry, nonzero coefficients only |
//! | `idct`           | [`dct::idct`] with the +128 level shift folded in    |
//! | `upsample`       | 2x triangle-filter chroma interpolation              |
//!
//! Upsampled values are clipped through a range-limit table covering
//! [-384, 639]; anything outside that window is an index fault.

use crate::alu::{Alu, Exact, RegionId};
use crate::media::{ImageYCbCr, Plane};

use super::bitstream::{BitReader, BitWriter, Bitstream, CodecId, Header};
use super::dct::{fdct, idct};
use super::entropy::{self, BlockTables, AC_LIMIT, DC_CODED_LIMIT};
use super::{check_codec, check_quality, DecodeFailure, EncodeError, FailureKind};

pub const ENTROPY: &str = "entropy_decode";
pub const DEQUANTIZE: &str = "dequantize";
pub const IDCT: &str = "idct";
pub const UPSAMPLE: &str = "upsample";
pub const REGIONS: &[&str] = &[ENTROPY, DEQUANTIZE, IDCT, UPSAMPLE];

/// Largest frame edge a decoder will allocate for.
pub const MAX_DIMENSION: u32 = 4096;

/// Offset of value 0 in the range-limit table.
pub const RANGE_LIMIT_OFFSET: i32 = 384;
pub const RANGE_LIMIT_LEN: usize = 1024;

#[rustfmt::skip]
const LUMA_QUANT: [u16; 64] = [
    16, 11, 10, 16,  24,  40,  51,  61,
    12, 12, 14, 19,  26,  58,  60,  55,
    14, 13, 16, 24,  40,  57,  69,  56,
    14, 17, 22, 29,  51,  87,  80,  62,
    18, 22, 37, 56,  68, 109, 103,  77,
    24, 35, 55, 64,  81, 104, 113,  92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103,  99,
];

#[rustfmt::skip]
const CHROMA_QUANT: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
];

/// Raster-order quantization tables `(luma, chroma)` for a quality in 1-100,
/// using the usual 50-is-nominal scaling.
pub fn quant_tables(quality: u8) -> ([i32; 64], [i32; 64]) {
    let q = i32::from(quality.clamp(1, 100));
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let build = |base: &[u16; 64]| {
        let mut t = [0i32; 64];
        for (o, &b) in t.iter_mut().zip(base) {
            *o = ((i32::from(b) * scale + 50) / 100).clamp(1, 255);
        }
        t
    };
    (build(&LUMA_QUANT), build(&CHROMA_QUANT))
}

/// Rounds `coef / q` to nearest, halves away from zero.
pub(crate) fn quantize(coef: i32, q: i32) -> i32 {
    let m = (coef.abs() + q / 2) / q;
    if coef < 0 {
        -m
    } else {
        m
    }
}

/// Quantizes a raster-order coefficient block into codable range.
pub(crate) fn quantize_block(coef: &[i32; 64], table: &[i32; 64]) -> [i32; 64] {
    let mut out = [0; 64];
    for i in 0..64 {
        let lim = if i == 0 { DC_CODED_LIMIT } else { AC_LIMIT };
        out[i] = quantize(coef[i], table[i]).clamp(-lim, lim);
    }
    out
}

/// Reads the 8x8 block at `(bx, by)` of a plane, with edge replication.
pub(crate) fn load_block(p: &Plane, bx: usize, by: usize) -> [i32; 64] {
    let mut b = [0; 64];
    for y in 0..8 {
        for x in 0..8 {
            b[y * 8 + x] = i32::from(p.at_clamped((bx + x) as isize, (by + y) as isize));
        }
    }
    b
}

pub(crate) fn store_block(p: &mut Plane, bx: usize, by: usize, block: &[i32; 64]) {
    for y in 0..8.min(p.height.saturating_sub(by)) {
        for x in 0..8.min(p.width.saturating_sub(bx)) {
            p.set(bx + x, by + y, block[y * 8 + x] as u8);
        }
    }
}

/// Averages 2x2 neighbourhoods, rounding to nearest.
fn decimate(p: &Plane) -> Plane {
    let (w, h) = (p.width / 2, p.height / 2);
    let mut out = Plane::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let s = u32::from(p.at(2 * x, 2 * y))
                + u32::from(p.at(2 * x + 1, 2 * y))
                + u32::from(p.at(2 * x, 2 * y + 1))
                + u32::from(p.at(2 * x + 1, 2 * y + 1));
            out.set(x, y, ((s + 2) / 4) as u8);
        }
    }
    out
}

/// Coded chroma plane size for a given image size.
fn coded_chroma_dims(width: usize, height: usize) -> (usize, usize) {
    ((width / 4).div_ceil(8) * 8, (height / 4).div_ceil(8) * 8)
}

fn encode_plane(w: &mut BitWriter, p: &Plane, table: &[i32; 64], t: BlockTables) {
    let mut pred = 0;
    for by in (0..p.height).step_by(8) {
        for bx in (0..p.width).step_by(8) {
            let mut block = load_block(p, bx, by);
            for v in block.iter_mut() {
                *v -= 128;
            }
            let q = quantize_block(&fdct(&block), table);
            entropy::encode_block(w, &q, &mut pred, t);
        }
    }
}

pub fn encode(img: &ImageYCbCr, quality: u8) -> Result<Bitstream, EncodeError> {
    check_quality(quality)?;
    crate::media::check_dims(img.width(), img.height())?;
    let (lq, cq) = quant_tables(quality);
    let mut w = BitWriter::new();
    encode_plane(&mut w, &img.y, &lq, entropy::luma());
    let (cw, ch) = coded_chroma_dims(img.width(), img.height());
    for p in [&img.cb, &img.cr] {
        let small = decimate(p);
        // Pad by edge replication up to whole blocks.
        let mut padded = Plane::new(cw, ch);
        for y in 0..ch {
            for x in 0..cw {
                padded.set(x, y, small.at_clamped(x as isize, y as isize));
            }
        }
        encode_plane(&mut w, &padded, &cq, entropy::chroma());
    }
    Ok(Bitstream {
        header: Header {
            codec: CodecId::MiniJpeg,
            quality,
            width: img.width() as u32,
            height: img.height() as u32,
            frames: 1,
            rate: 0,
        },
        payload: w.finish(),
    })
}

struct Regions {
    entropy: RegionId,
    dequant: RegionId,
    idct: RegionId,
    upsample: RegionId,
}

fn resolve<A: Alu>(alu: &mut A) -> Regions {
    Regions {
        entropy: alu.region(ENTROPY),
        dequant: alu.region(DEQUANTIZE),
        idct: alu.region(IDCT),
        upsample: alu.region(UPSAMPLE),
    }
}

/// Checks image dimensions and quality from a header.
pub(crate) fn header_dims(h: &Header) -> Result<(usize, usize), DecodeFailure> {
    let ok = |v: u32| v > 0 && v % 16 == 0 && v <= MAX_DIMENSION;
    if !ok(h.width) || !ok(h.height) || !(1..=100).contains(&h.quality) {
        return Err(DecodeFailure::new(FailureKind::InvalidCode, "header"));
    }
    Ok((h.width as usize, h.height as usize))
}

/// Entropy decode, dequantize and inverse transform one block.
#[allow(clippy::too_many_arguments)]
fn decode_block<A: Alu>(
    alu: &mut A,
    r: &Regions,
    reader: &mut BitReader,
    pred: &mut i32,
    t: BlockTables,
    table: &[i32; 64],
) -> Result<[i32; 64], DecodeFailure> {
    let mut coef = [0; 64];
    alu.enter(r.entropy);
    let res = entropy::decode_block(alu, reader, pred, t, ENTROPY, &mut coef);
    alu.leave();
    res?;

    alu.enter(r.dequant);
    for (c, &q) in coef.iter_mut().zip(table) {
        if *c != 0 {
            *c = alu.mul(*c, q);
        }
    }
    alu.leave();

    alu.enter(r.idct);
    let px = idct(alu, &coef, 128, 0, 255);
    alu.leave();
    Ok(px)
}

fn decode_plane<A: Alu>(
    alu: &mut A,
    r: &Regions,
    reader: &mut BitReader,
    width: usize,
    height: usize,
    t: BlockTables,
    table: &[i32; 64],
) -> Result<Plane, DecodeFailure> {
    let mut p = Plane::new(width, height);
    let mut pred = 0;
    for by in (0..height).step_by(8) {
        for bx in (0..width).step_by(8) {
            let px = decode_block(alu, r, reader, &mut pred, t, table)?;
            store_block(&mut p, bx, by, &px);
        }
    }
    Ok(p)
}

fn range_limit() -> &'static [u8; RANGE_LIMIT_LEN] {
    static T: std::sync::OnceLock<[u8; RANGE_LIMIT_LEN]> = std::sync::OnceLock::new();
    T.get_or_init(|| {
        let mut t = [0u8; RANGE_LIMIT_LEN];
        for (i, v) in t.iter_mut().enumerate() {
            *v = (i as i32 - RANGE_LIMIT_OFFSET).clamp(0, 255) as u8;
        }
        t
    })
}

/// Clips a sample through the range-limit table. Values outside the table
/// window are an index fault, as they would be in a table-driven decoder.
#[inline]
pub(crate) fn limit(v: i32, region: &'static str) -> Result<u8, DecodeFailure> {
    let idx = v.wrapping_add(RANGE_LIMIT_OFFSET);
    if !(0..RANGE_LIMIT_LEN as i32).contains(&idx) {
        return Err(DecodeFailure::new(FailureKind::IndexOutOfRange, region));
    }
    Ok(range_limit()[idx as usize])
}

/// Interpolates `src` up to `width x height` (twice its visible size) with
/// the separable (3/4, 1/4) triangle filter.
fn upsample<A: Alu>(alu: &mut A, src: &Plane, width: usize, height: usize) -> Result<Plane, DecodeFailure> {
    let mut out = Plane::new(width, height);
    let (sw, sh) = ((width / 2) as isize, (height / 2) as isize);
    let at = |x: isize, y: isize| i32::from(src.at(x.clamp(0, sw - 1) as usize, y.clamp(0, sh - 1) as usize));
    for oy in 0..height {
        let sy = (oy / 2) as isize;
        let ny = if oy % 2 == 0 { sy - 1 } else { sy + 1 };
        for ox in 0..width {
            let sx = (ox / 2) as isize;
            let nx = if ox % 2 == 0 { sx - 1 } else { sx + 1 };
            let near = alu.mul(at(sx, sy), 9);
            let horiz = alu.mul(at(nx, sy), 3);
            let vert = alu.mul(at(sx, ny), 3);
            let mut acc = alu.add(near, horiz);
            acc = alu.add(acc, vert);
            acc = alu.add(acc, at(nx, ny));
            acc = alu.add(acc, 8);
            let v = alu.shr(acc, 4);
            out.set(ox, oy, limit(v, UPSAMPLE)?);
        }
    }
    Ok(out)
}

pub fn decode<A: Alu>(bs: &Bitstream, alu: &mut A) -> Result<ImageYCbCr, DecodeFailure> {
    check_codec(bs, CodecId::MiniJpeg)?;
    let (width, height) = header_dims(&bs.header)?;
    if bs.header.frames != 1 {
        return Err(DecodeFailure::new(FailureKind::InvalidCode, "header"));
    }
    let (lq, cq) = quant_tables(bs.header.quality);
    let r = resolve(alu);
    let mut reader = BitReader::new(&bs.payload);
    reader.set_region(ENTROPY);

    let y = decode_plane(alu, &r, &mut reader, width, height, entropy::luma(), &lq)?;
    let (cw, ch) = coded_chroma_dims(width, height);
    let mut chroma = Vec::with_capacity(2);
    for _ in 0..2 {
        let small = decode_plane(alu, &r, &mut reader, cw, ch, entropy::chroma(), &cq)?;
        alu.enter(r.upsample);
        let up = upsample(alu, &small, width / 2, height / 2);
        alu.leave();
        chroma.push(up?);
    }
    let cr = chroma.pop().expect("two planes");
    let cb = chroma.pop().expect("two planes");
    Ok(ImageYCbCr::from_planes(y, cb, cr).expect("decoder builds consistent planes"))
}

/// Decode with exact arithmetic.
pub fn decode_reference(bs: &Bitstream) -> Result<ImageYCbCr, DecodeFailure> {
    decode(bs, &mut Exact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alu::{FidelityContext, RegionTable};
    use crate::fault::{BitRange, FaultSpec};
    use crate::metrics::psnr;
    use crate::rng::derive_stream;

    fn gradient(w: usize, h: usize) -> ImageYCbCr {
        let mut img = ImageYCbCr::new(w, h).unwrap();
        for y in 0..h {
            for x in 0..w {
                img.y.set(x, y, ((x * 255) / (w - 1)) as u8 / 2 + ((y * 255) / (h - 1)) as u8 / 2);
            }
        }
        for y in 0..h / 2 {
            for x in 0..w / 2 {
                img.cb.set(x, y, (64 + x) as u8);
                img.cr.set(x, y, (192 - y) as u8);
            }
        }
        img
    }

    #[test]
    fn quant_table_scaling() {
        let (l, c) = quant_tables(50);
        assert_eq!(l[0], 16);
        assert_eq!(c[63], 99);
        let (l, _) = quant_tables(100);
        assert!(l.iter().all(|&q| q == 1));
        let (l, _) = quant_tables(1);
        assert!(l.iter().all(|&q| q == 255));
        let (l75, _) = quant_tables(75);
        assert_eq!(l75[0], 8);
    }

    #[test]
    fn flat_gray_is_tiny() {
        let mut img = ImageYCbCr::new(128, 128).unwrap();
        img.y.data.fill(128);
        let bs = encode(&img, 75).unwrap();
        let raw = img.sample_count();
        assert!(bs.payload.len() * 20 < raw, "{} bytes", bs.payload.len());
        assert_eq!(decode_reference(&bs).unwrap(), img);
    }

    #[test]
    fn encode_is_deterministic() {
        let img = gradient(64, 48);
        assert_eq!(encode(&img, 60).unwrap(), encode(&img, 60).unwrap());
    }

    #[test]
    fn gradient_baseline_quality() {
        let img = gradient(128, 128);
        let bs = encode(&img, 75).unwrap();
        let q = psnr(&img, &decode_reference(&bs).unwrap()).unwrap().value;
        assert!(q >= 30.0, "PSNR {q}");
        assert!((q - FROZEN_GRADIENT_PSNR).abs() < 1e-9, "PSNR {q}");
    }

    const FROZEN_GRADIENT_PSNR: f64 = 52.050706763842896;

    #[test]
    fn reliable_context_matches_reference() {
        let bs = encode(&gradient(64, 64), 75).unwrap();
        let a = decode(&bs, &mut FidelityContext::reliable()).unwrap();
        assert_eq!(a, decode_reference(&bs).unwrap());
    }

    #[test]
    fn odd_block_counts_pad_cleanly() {
        // 48/4 = 12 chroma columns, padded to 16.
        let img = gradient(48, 80);
        let bs = encode(&img, 90).unwrap();
        let out = decode_reference(&bs).unwrap();
        assert!(psnr(&img, &out).unwrap().value > 30.0);
    }

    #[test]
    fn bad_headers_fail() {
        let mut bs = encode(&gradient(32, 32), 75).unwrap();
        bs.header.width = 33;
        assert_eq!(decode_reference(&bs).unwrap_err().kind, FailureKind::InvalidCode);
        let mut bs = encode(&gradient(32, 32), 75).unwrap();
        bs.payload.truncate(10);
        assert_eq!(decode_reference(&bs).unwrap_err().kind, FailureKind::StreamExhausted);
    }

    #[test]
    fn upsample_limit_window() {
        assert_eq!(limit(-384, UPSAMPLE).unwrap(), 0);
        assert_eq!(limit(639, UPSAMPLE).unwrap(), 255);
        assert_eq!(limit(100, UPSAMPLE).unwrap(), 100);
        assert_eq!(limit(640, UPSAMPLE).unwrap_err().kind, FailureKind::IndexOutOfRange);
        assert_eq!(limit(-385, UPSAMPLE).unwrap_err().kind, FailureKind::IndexOutOfRange);
    }

    #[test]
    fn heavy_entropy_faults_fail() {
        let bs = encode(&gradient(64, 64), 75).unwrap();
        let mut table = RegionTable::new();
        table.insert(ENTROPY.into(), FaultSpec::single(0.5, BitRange::new(0, 31).unwrap()).unwrap());
        let mut fails = 0;
        for t in 0..50u64 {
            let mut ctx = FidelityContext::new(&table, derive_stream(1, &[t.into()])).unwrap();
            fails += usize::from(decode(&bs, &mut ctx).is_err());
        }
        assert!(fails >= 45, "{fails}/50");
    }
}
