//! Mini-video: block motion-compensated coding in the style of H.263.
//!
//! Frame 0 is intra coded: every 16x16 macroblock carries four luma and two
//! chroma blocks coded as in mini-JPEG. Later frames are inter coded: each
//! macroblock is either skipped (copy from the previous decoded frame at zero
//! motion) or carries a motion vector difference, a 6-bit coded-block
//! pattern and the coded residual blocks.
//!
//! Inter macroblock syntax:
//!
//! ```text
//! skip      1 bit      1 = copy at zero motion, nothing follows
//! mvd_x     se(v)      signed Exp-Golomb, predicted from the left macroblock
//! mvd_y     se(v)
//! cbp       6 bits     Y0 Y1 Y2 Y3 Cb Cr, MSB first
//! blocks    one entropy-coded block per set cbp bit
//! ```
//!
//! | region                | work                                            |
//! |-----------------------|-------------------------------------------------|
//! | `huffman_decode`      | sign extension, DC prediction, `mv = pred+mvd`  |
//! | `motion_compensation` | reference block addresses for luma and chroma   |
//! | `idct`                | dequantization and inverse transform            |
//! | `reconstruction`      | `prediction + residual`, through the clip table |
//!
//! Motion compensation runs for every inter macroblock, skipped or not, and
//! bounds-checks the addresses it computes. Intra blocks have no prediction,
//! so their transform output is the picture.

use crate::alu::{Alu, Exact, RegionId};
use crate::media::{ImageYCbCr, Plane, VideoSeq};

use super::bitstream::{BitReader, BitWriter, Bitstream, CodecId, Header};
use super::dct::{fdct, idct};
use super::entropy::{self, BlockTables};
use super::jpeg::{header_dims, limit, load_block, quant_tables, quantize_block, store_block};
use super::{check_codec, check_quality, DecodeFailure, EncodeError, FailureKind};

pub const HUFFMAN: &str = "huffman_decode";
pub const MOTION: &str = "motion_compensation";
pub const IDCT: &str = "idct";
pub const RECONSTRUCTION: &str = "reconstruction";
pub const REGIONS: &[&str] = &[HUFFMAN, MOTION, IDCT, RECONSTRUCTION];

/// Motion search range in whole pixels.
pub const SEARCH_RANGE: i32 = 7;
/// Largest motion vector component a decoder accepts.
pub const MV_LIMIT: i32 = 15;
/// Longest sequence a decoder will allocate for.
pub const MAX_FRAMES: u32 = 4096;

const MAX_EXP_GOLOMB_ZEROS: u32 = 16;

#[derive(Clone, Copy)]
struct Regions {
    huffman: RegionId,
    motion: RegionId,
    idct: RegionId,
    recon: RegionId,
}

fn resolve<A: Alu>(alu: &mut A) -> Regions {
    Regions {
        huffman: alu.region(HUFFMAN),
        motion: alu.region(MOTION),
        idct: alu.region(IDCT),
        recon: alu.region(RECONSTRUCTION),
    }
}

/// Position of block `b` (0-3 luma, 4 Cb, 5 Cr) of macroblock `(mx, my)`,
/// as `(plane index, x, y)`.
fn block_origin(b: usize, mx: usize, my: usize) -> (usize, usize, usize) {
    match b {
        0..=3 => (0, mx * 16 + (b % 2) * 8, my * 16 + (b / 2) * 8),
        4 => (1, mx * 8, my * 8),
        _ => (2, mx * 8, my * 8),
    }
}

fn tables_for(b: usize) -> BlockTables {
    if b < 4 {
        entropy::luma()
    } else {
        entropy::chroma()
    }
}

fn put_ue(w: &mut BitWriter, v: u32) {
    let x = v + 1;
    let n = 32 - x.leading_zeros();
    w.put(0, n - 1);
    w.put(x, n);
}

fn put_se(w: &mut BitWriter, v: i32) {
    let u = if v > 0 { 2 * v - 1 } else { -2 * v };
    put_ue(w, u as u32);
}

fn read_se(r: &mut BitReader) -> Result<i32, DecodeFailure> {
    let mut zeros = 0;
    while r.bit()? == 0 {
        zeros += 1;
        if zeros > MAX_EXP_GOLOMB_ZEROS {
            return Err(DecodeFailure::new(FailureKind::InvalidCode, HUFFMAN));
        }
    }
    let u = ((1u32 << zeros) | r.bits(zeros)?) - 1;
    let v = (u as i32 + 1) / 2;
    Ok(if u % 2 == 1 { v } else { -v })
}

/// Dequantizes one block. This runs in the huffman region, as part of
/// coefficient decoding.
fn dequantize<A: Alu>(alu: &mut A, r: Regions, coef: &[i32; 64], table: &[i32; 64]) -> [i32; 64] {
    alu.enter(r.huffman);
    let mut c = *coef;
    for (v, &q) in c.iter_mut().zip(table) {
        if *v != 0 {
            *v = alu.mul(*v, q);
        }
    }
    alu.leave();
    c
}

/// Dequantizes and inverse transforms one block. Intra blocks come out as
/// pixels, inter blocks as residuals.
fn inverse_block<A: Alu>(alu: &mut A, r: Regions, coef: &[i32; 64], table: &[i32; 64], intra: bool) -> [i32; 64] {
    let c = dequantize(alu, r, coef, table);
    alu.enter(r.idct);
    let out = if intra {
        idct(alu, &c, 128, 0, 255)
    } else {
        idct(alu, &c, 0, -256, 255)
    };
    alu.leave();
    out
}

/// Coded data of one inter macroblock after entropy decoding.
struct InterMb {
    mv: (i32, i32),
    cbp: u8,
    coef: [[i32; 64]; 6],
}

/// Motion compensation, inverse transform and reconstruction of one inter
/// macroblock into `cur`.
#[allow(clippy::too_many_arguments)]
fn reconstruct_inter<A: Alu>(
    alu: &mut A,
    r: Regions,
    reference: &ImageYCbCr,
    cur: &mut ImageYCbCr,
    mx: usize,
    my: usize,
    mb: &InterMb,
    tables: &([i32; 64], [i32; 64]),
) -> Result<(), DecodeFailure> {
    let (w, h) = (reference.width() as i32, reference.height() as i32);
    alu.enter(r.motion);
    let lx = alu.add(mx as i32 * 16, mb.mv.0);
    let ly = alu.add(my as i32 * 16, mb.mv.1);
    let cmx = alu.shr(mb.mv.0, 1);
    let cmy = alu.shr(mb.mv.1, 1);
    let cx = alu.add(mx as i32 * 8, cmx);
    let cy = alu.add(my as i32 * 8, cmy);
    alu.leave();
    let in_bounds = |x: i32, y: i32, size: i32, pw: i32, ph: i32| {
        (0..=pw - size).contains(&x) && (0..=ph - size).contains(&y)
    };
    if !in_bounds(lx, ly, 16, w, h) || !in_bounds(cx, cy, 8, w / 2, h / 2) {
        return Err(DecodeFailure::new(FailureKind::IndexOutOfRange, MOTION));
    }

    let refs = reference.planes();
    let planes = cur.planes_mut();
    for b in 0..6 {
        let (pi, bx, by) = block_origin(b, mx, my);
        let (sx, sy) = match b {
            0..=3 => (lx as usize + (b % 2) * 8, ly as usize + (b / 2) * 8),
            _ => (cx as usize, cy as usize),
        };
        let pred = load_block(refs[pi], sx, sy);
        let out = if mb.cbp & (0x20 >> b) != 0 {
            let table = if b < 4 { &tables.0 } else { &tables.1 };
            let res = inverse_block(alu, r, &mb.coef[b], table, false);
            let mut px = [0; 64];
            alu.enter(r.recon);
            for i in 0..64 {
                let v = alu.add(pred[i], res[i]);
                match limit(v, RECONSTRUCTION) {
                    Ok(p) => px[i] = i32::from(p),
                    Err(e) => {
                        alu.leave();
                        return Err(e);
                    }
                }
            }
            alu.leave();
            px
        } else {
            pred
        };
        store_block(planes[pi], bx, by, &out);
    }
    Ok(())
}

fn mb_dims(img: &ImageYCbCr) -> (usize, usize) {
    (img.width() / 16, img.height() / 16)
}

fn luma_sad(cur: &Plane, reference: &Plane, x: usize, y: usize, rx: usize, ry: usize, best: u32) -> u32 {
    let mut sad = 0u32;
    for j in 0..16 {
        let a = &cur.data[(y + j) * cur.width + x..][..16];
        let b = &reference.data[(ry + j) * reference.width + rx..][..16];
        sad += a.iter().zip(b).map(|(&p, &q)| u32::from(p.abs_diff(q))).sum::<u32>();
        if sad > best {
            break;
        }
    }
    sad
}

/// Full search over +/-[`SEARCH_RANGE`], preferring lower SAD, then shorter
/// vectors, then scan order.
fn motion_search(cur: &Plane, reference: &Plane, mx: usize, my: usize) -> (i32, i32) {
    let (x, y) = (mx as i32 * 16, my as i32 * 16);
    let (w, h) = (cur.width as i32, cur.height as i32);
    let mut best = (luma_sad(cur, reference, x as usize, y as usize, x as usize, y as usize, u32::MAX), 0, (0, 0));
    for dy in -SEARCH_RANGE..=SEARCH_RANGE {
        for dx in -SEARCH_RANGE..=SEARCH_RANGE {
            let (rx, ry) = (x + dx, y + dy);
            if rx < 0 || ry < 0 || rx > w - 16 || ry > h - 16 {
                continue;
            }
            let sad = luma_sad(cur, reference, x as usize, y as usize, rx as usize, ry as usize, best.0);
            let cand = (sad, dx.abs() + dy.abs(), (dx, dy));
            if (cand.0, cand.1) < (best.0, best.1) {
                best = cand;
            }
        }
    }
    best.2
}

fn encode_intra(w: &mut BitWriter, frame: &ImageYCbCr, tables: &([i32; 64], [i32; 64]), recon: &mut ImageYCbCr) {
    let r = resolve(&mut Exact);
    let (mbw, mbh) = mb_dims(frame);
    let mut preds = [0i32; 3];
    for my in 0..mbh {
        for mx in 0..mbw {
            for b in 0..6 {
                let (pi, bx, by) = block_origin(b, mx, my);
                let mut px = load_block(frame.planes()[pi], bx, by);
                for v in px.iter_mut() {
                    *v -= 128;
                }
                let table = if b < 4 { &tables.0 } else { &tables.1 };
                let q = quantize_block(&fdct(&px), table);
                entropy::encode_block(w, &q, &mut preds[pi], tables_for(b));
                let out = inverse_block(&mut Exact, r, &q, table, true);
                store_block(recon.planes_mut()[pi], bx, by, &out);
            }
        }
    }
}

fn encode_inter(
    w: &mut BitWriter,
    frame: &ImageYCbCr,
    reference: &ImageYCbCr,
    tables: &([i32; 64], [i32; 64]),
    recon: &mut ImageYCbCr,
) {
    let r = resolve(&mut Exact);
    let (mbw, mbh) = mb_dims(frame);
    let mut preds = [0i32; 3];
    for my in 0..mbh {
        let mut mv_pred = (0, 0);
        for mx in 0..mbw {
            let mv = motion_search(&frame.y, &reference.y, mx, my);
            let mut mb = InterMb {
                mv,
                cbp: 0,
                coef: [[0; 64]; 6],
            };
            // Residuals against the motion-compensated prediction.
            let (cmx, cmy) = (mv.0 >> 1, mv.1 >> 1);
            for b in 0..6 {
                let (pi, bx, by) = block_origin(b, mx, my);
                let (sx, sy) = if b < 4 {
                    ((bx as i32 + mv.0) as usize, (by as i32 + mv.1) as usize)
                } else {
                    ((bx as i32 + cmx) as usize, (by as i32 + cmy) as usize)
                };
                let cur = load_block(frame.planes()[pi], bx, by);
                let pred = load_block(reference.planes()[pi], sx, sy);
                let mut res = [0; 64];
                for i in 0..64 {
                    res[i] = cur[i] - pred[i];
                }
                let table = if b < 4 { &tables.0 } else { &tables.1 };
                mb.coef[b] = quantize_block(&fdct(&res), table);
                if mb.coef[b].iter().any(|&c| c != 0) {
                    mb.cbp |= 0x20 >> b;
                }
            }
            if mv == (0, 0) && mb.cbp == 0 {
                w.put_bit(true);
                mv_pred = (0, 0);
            } else {
                w.put_bit(false);
                put_se(w, mv.0 - mv_pred.0);
                put_se(w, mv.1 - mv_pred.1);
                w.put(u32::from(mb.cbp), 6);
                for b in 0..6 {
                    if mb.cbp & (0x20 >> b) != 0 {
                        let (pi, _, _) = block_origin(b, mx, my);
                        entropy::encode_block(w, &mb.coef[b], &mut preds[pi], tables_for(b));
                    }
                }
                mv_pred = mv;
            }
            reconstruct_inter(&mut Exact, r, reference, recon, mx, my, &mb, tables)
                .expect("encoder vectors stay inside the frame");
        }
    }
}

/// Encodes a sequence and returns the bitstream with the decoder-exact
/// reconstruction the encoder predicted from.
pub fn encode_with_reconstruction(v: &VideoSeq, quality: u8) -> Result<(Bitstream, VideoSeq), EncodeError> {
    check_quality(quality)?;
    crate::media::check_dims(v.width(), v.height())?;
    let tables = quant_tables(quality);
    let mut w = BitWriter::new();
    let mut recon: Vec<ImageYCbCr> = Vec::with_capacity(v.frames.len());
    for (i, frame) in v.frames.iter().enumerate() {
        let mut out = ImageYCbCr::new(v.width(), v.height())?;
        if i == 0 {
            encode_intra(&mut w, frame, &tables, &mut out);
        } else {
            encode_inter(&mut w, frame, &recon[i - 1], &tables, &mut out);
        }
        recon.push(out);
    }
    let bs = Bitstream {
        header: Header {
            codec: CodecId::MiniVideo,
            quality,
            width: v.width() as u32,
            height: v.height() as u32,
            frames: v.frames.len() as u32,
            rate: v.fps,
        },
        payload: w.finish(),
    };
    Ok((bs, VideoSeq::new(recon, v.fps)?))
}

pub fn encode(v: &VideoSeq, quality: u8) -> Result<Bitstream, EncodeError> {
    encode_with_reconstruction(v, quality).map(|(bs, _)| bs)
}

/// Entropy decodes one block inside the huffman region.
fn read_block<A: Alu>(
    alu: &mut A,
    r: Regions,
    reader: &mut BitReader,
    pred: &mut i32,
    b: usize,
    out: &mut [i32; 64],
) -> Result<(), DecodeFailure> {
    alu.enter(r.huffman);
    let res = entropy::decode_block(alu, reader, pred, tables_for(b), HUFFMAN, out);
    alu.leave();
    res.map(|_| ())
}

fn decode_intra<A: Alu>(
    alu: &mut A,
    r: Regions,
    reader: &mut BitReader,
    tables: &([i32; 64], [i32; 64]),
    out: &mut ImageYCbCr,
) -> Result<(), DecodeFailure> {
    let (mbw, mbh) = mb_dims(out);
    let mut preds = [0i32; 3];
    let mut coef = [0; 64];
    for my in 0..mbh {
        for mx in 0..mbw {
            for b in 0..6 {
                let (pi, bx, by) = block_origin(b, mx, my);
                read_block(alu, r, reader, &mut preds[pi], b, &mut coef)?;
                let table = if b < 4 { &tables.0 } else { &tables.1 };
                let px = inverse_block(alu, r, &coef, table, true);
                store_block(out.planes_mut()[pi], bx, by, &px);
            }
        }
    }
    Ok(())
}

fn decode_inter<A: Alu>(
    alu: &mut A,
    r: Regions,
    reader: &mut BitReader,
    tables: &([i32; 64], [i32; 64]),
    reference: &ImageYCbCr,
    out: &mut ImageYCbCr,
) -> Result<(), DecodeFailure> {
    let (mbw, mbh) = mb_dims(out);
    let mut preds = [0i32; 3];
    for my in 0..mbh {
        let mut mv_pred = (0, 0);
        for mx in 0..mbw {
            let mut mb = InterMb {
                mv: (0, 0),
                cbp: 0,
                coef: [[0; 64]; 6],
            };
            if reader.bit()? == 0 {
                let dx = read_se(reader)?;
                let dy = read_se(reader)?;
                alu.enter(r.huffman);
                let mvx = alu.add(mv_pred.0, dx);
                let mvy = alu.add(mv_pred.1, dy);
                alu.leave();
                if mvx.abs() > MV_LIMIT || mvy.abs() > MV_LIMIT {
                    return Err(DecodeFailure::new(FailureKind::LimitExceeded, HUFFMAN));
                }
                mb.mv = (mvx, mvy);
                mb.cbp = reader.bits(6)? as u8;
                for b in 0..6 {
                    if mb.cbp & (0x20 >> b) != 0 {
                        let (pi, _, _) = block_origin(b, mx, my);
                        read_block(alu, r, reader, &mut preds[pi], b, &mut mb.coef[b])?;
                    }
                }
            }
            mv_pred = mb.mv;
            reconstruct_inter(alu, r, reference, out, mx, my, &mb, tables)?;
        }
    }
    Ok(())
}

pub fn decode<A: Alu>(bs: &Bitstream, alu: &mut A) -> Result<VideoSeq, DecodeFailure> {
    check_codec(bs, CodecId::MiniVideo)?;
    let (width, height) = header_dims(&bs.header)?;
    let n = bs.header.frames;
    if n == 0 || n > MAX_FRAMES || bs.header.rate == 0 {
        return Err(DecodeFailure::new(FailureKind::InvalidCode, "header"));
    }
    let tables = quant_tables(bs.header.quality);
    let r = resolve(alu);
    let mut reader = BitReader::new(&bs.payload);
    reader.set_region(HUFFMAN);
    let mut frames: Vec<ImageYCbCr> = Vec::with_capacity(n as usize);
    for i in 0..n as usize {
        let mut out = ImageYCbCr::new(width, height).expect("header dimensions checked");
        if i == 0 {
            decode_intra(alu, r, &mut reader, &tables, &mut out)?;
        } else {
            decode_inter(alu, r, &mut reader, &tables, &frames[i - 1], &mut out)?;
        }
        frames.push(out);
    }
    Ok(VideoSeq::new(frames, bs.header.rate).expect("frames share dimensions"))
}

/// Decode with exact arithmetic.
pub fn decode_reference(bs: &Bitstream) -> Result<VideoSeq, DecodeFailure> {
    decode(bs, &mut Exact)
}
