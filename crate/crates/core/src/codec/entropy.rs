//! Fixed canonical Huffman coding of quantized 8x8 blocks.
//!
//! The tables are the example tables of the baseline JPEG standard
//! (Annex K.3), baked in so every bitstream is reproducible. Blocks are coded
//! as a DC difference from the previous block's DC in the same component,
//! followed by (run, size) symbols for the AC coefficients in zig-zag order,
//! with `0x00` as end-of-block and `0xF0` as a run of sixteen zeros.
//!
//! Code matching and the coefficient position are control flow and stay
//! reliable. The elastic work is magnitude reconstruction: sign extension of
//! negative values and the DC predictor add.

use std::sync::OnceLock;

use crate::alu::Alu;

use super::bitstream::{BitReader, BitWriter};
use super::dct::ZIGZAG;
use super::{DecodeFailure, FailureKind};

/// Largest DC magnitude a decoder accepts (category 11).
pub const DC_LIMIT: i32 = 2047;
/// Encoders keep DC values within this bound so every difference fits
/// category 11.
pub const DC_CODED_LIMIT: i32 = 1023;
/// Largest AC magnitude a baseline stream can carry (category 10).
pub const AC_LIMIT: i32 = 1023;

const EOB: u8 = 0x00;
const ZRL: u8 = 0xF0;

const DC_LUMA_BITS: [u8; 16] = [0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0];
const DC_CHROMA_BITS: [u8; 16] = [0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
const DC_VALS: [u8; 12] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];

const AC_LUMA_BITS: [u8; 16] = [0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7d];
#[rustfmt::skip]
const AC_LUMA_VALS: [u8; 162] = [
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07,
    0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xa1, 0x08, 0x23, 0x42, 0xb1, 0xc1, 0x15, 0x52, 0xd1, 0xf0,
    0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0a, 0x16, 0x17, 0x18, 0x19, 0x1a, 0x25, 0x26, 0x27, 0x28,
    0x29, 0x2a, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49,
    0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59, 0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69,
    0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89,
    0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a, 0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7,
    0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5,
    0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe1, 0xe2,
    0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf1, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8,
    0xf9, 0xfa,
];

const AC_CHROMA_BITS: [u8; 16] = [0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77];
#[rustfmt::skip]
const AC_CHROMA_VALS: [u8; 162] = [
    0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21, 0x31, 0x06, 0x12, 0x41, 0x51, 0x07, 0x61, 0x71,
    0x13, 0x22, 0x32, 0x81, 0x08, 0x14, 0x42, 0x91, 0xa1, 0xb1, 0xc1, 0x09, 0x23, 0x33, 0x52, 0xf0,
    0x15, 0x62, 0x72, 0xd1, 0x0a, 0x16, 0x24, 0x34, 0xe1, 0x25, 0xf1, 0x17, 0x18, 0x19, 0x1a, 0x26,
    0x27, 0x28, 0x29, 0x2a, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48,
    0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59, 0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68,
    0x69, 0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a, 0x82, 0x83, 0x84, 0x85, 0x86, 0x87,
    0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a, 0xa2, 0xa3, 0xa4, 0xa5,
    0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3,
    0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda,
    0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8,
    0xf9, 0xfa,
];

/// A canonical Huffman table with both encode and decode views.
#[derive(Debug)]
pub struct HuffTable {
    /// `(code, length)` per symbol; length 0 marks an absent symbol.
    codes: [(u16, u8); 256],
    mincode: [i32; 17],
    maxcode: [i32; 17],
    valptr: [usize; 17],
    vals: &'static [u8],
}

impl HuffTable {
    fn build(bits: &[u8; 16], vals: &'static [u8]) -> Self {
        let mut t = HuffTable {
            codes: [(0, 0); 256],
            mincode: [0; 17],
            maxcode: [-1; 17],
            valptr: [0; 17],
            vals,
        };
        let mut code = 0i32;
        let mut k = 0usize;
        for len in 1..=16 {
            let n = usize::from(bits[len - 1]);
            if n > 0 {
                t.valptr[len] = k;
                t.mincode[len] = code;
                for _ in 0..n {
                    t.codes[usize::from(vals[k])] = (code as u16, len as u8);
                    code += 1;
                    k += 1;
                }
                t.maxcode[len] = code - 1;
            }
            code <<= 1;
        }
        t
    }

    pub fn code(&self, symbol: u8) -> Option<(u16, u8)> {
        let c = self.codes[usize::from(symbol)];
        (c.1 > 0).then_some(c)
    }

    fn put(&self, w: &mut BitWriter, symbol: u8) {
        let (code, len) = self.code(symbol).expect("symbol present in table");
        w.put(u32::from(code), u32::from(len));
    }

    /// Reads one symbol. A bit pattern that matches no code within 16 bits
    /// is an [`FailureKind::InvalidCode`].
    pub fn read(&self, r: &mut BitReader, region: &str) -> Result<u8, DecodeFailure> {
        let mut code = r.bit()? as i32;
        for len in 1..=16 {
            if code <= self.maxcode[len] {
                return Ok(self.vals[self.valptr[len] + (code - self.mincode[len]) as usize]);
            }
            if len < 16 {
                code = (code << 1) | r.bit()? as i32;
            }
        }
        Err(DecodeFailure::new(FailureKind::InvalidCode, region))
    }
}

/// The pair of tables that codes one component.
#[derive(Clone, Copy, Debug)]
pub struct BlockTables {
    pub dc: &'static HuffTable,
    pub ac: &'static HuffTable,
}

fn tables() -> &'static [HuffTable; 4] {
    static T: OnceLock<[HuffTable; 4]> = OnceLock::new();
    T.get_or_init(|| {
        [
            HuffTable::build(&DC_LUMA_BITS, &DC_VALS),
            HuffTable::build(&AC_LUMA_BITS, &AC_LUMA_VALS),
            HuffTable::build(&DC_CHROMA_BITS, &DC_VALS),
            HuffTable::build(&AC_CHROMA_BITS, &AC_CHROMA_VALS),
        ]
    })
}

pub fn luma() -> BlockTables {
    let t = tables();
    BlockTables {
        dc: &t[0],
        ac: &t[1],
    }
}

pub fn chroma() -> BlockTables {
    let t = tables();
    BlockTables {
        dc: &t[2],
        ac: &t[3],
    }
}

/// Magnitude category: the number of bits needed for `|v|`.
pub fn category(v: i32) -> u32 {
    32 - v.unsigned_abs().leading_zeros()
}

fn put_value(w: &mut BitWriter, v: i32, size: u32) {
    let bits = if v < 0 { v + (1 << size) - 1 } else { v };
    w.put(bits as u32, size);
}

/// Codes one block of quantized coefficients given in raster order.
/// Values must already be within [`DC_CODED_LIMIT`] and [`AC_LIMIT`].
pub fn encode_block(w: &mut BitWriter, coef: &[i32; 64], dc_pred: &mut i32, t: BlockTables) {
    let diff = coef[0] - *dc_pred;
    *dc_pred = coef[0];
    let s = category(diff);
    t.dc.put(w, s as u8);
    put_value(w, diff, s);

    let mut run = 0u32;
    for &pos in &ZIGZAG[1..] {
        let v = coef[pos];
        if v == 0 {
            run += 1;
            continue;
        }
        while run >= 16 {
            t.ac.put(w, ZRL);
            run -= 16;
        }
        let s = category(v);
        t.ac.put(w, ((run << 4) | s) as u8);
        put_value(w, v, s);
        run = 0;
    }
    if run > 0 {
        t.ac.put(w, EOB);
    }
}

/// Reads `size` magnitude bits and sign-extends them. Negative values cost
/// one elastic op.
#[inline]
fn read_value<A: Alu>(
    alu: &mut A,
    r: &mut BitReader,
    size: u32,
) -> Result<i32, DecodeFailure> {
    if size == 0 {
        return Ok(0);
    }
    let v = r.bits(size)? as i32;
    if v < 1 << (size - 1) {
        Ok(alu.sub(v, (1 << size) - 1))
    } else {
        Ok(v)
    }
}

/// Decodes one block into raster-order `out`, updating the component's DC
/// predictor. Returns the number of nonzero coefficients.
pub fn decode_block<A: Alu>(
    alu: &mut A,
    r: &mut BitReader,
    dc_pred: &mut i32,
    t: BlockTables,
    region: &'static str,
    out: &mut [i32; 64],
) -> Result<usize, DecodeFailure> {
    *out = [0; 64];
    let s = u32::from(t.dc.read(r, region)?);
    if s > 11 {
        return Err(DecodeFailure::new(FailureKind::InvalidCode, region));
    }
    let diff = read_value(alu, r, s)?;
    let dc = alu.add(*dc_pred, diff);
    if !(-DC_LIMIT..=DC_LIMIT).contains(&dc) {
        return Err(DecodeFailure::new(FailureKind::LimitExceeded, region));
    }
    *dc_pred = dc;
    out[0] = dc;
    let mut nonzero = usize::from(dc != 0);

    let mut k = 1usize;
    while k < 64 {
        let sym = t.ac.read(r, region)?;
        let run = usize::from(sym >> 4);
        let size = u32::from(sym & 15);
        if size == 0 {
            if run == 15 {
                k += 16;
                continue;
            }
            break;
        }
        k += run;
        if k > 63 {
            return Err(DecodeFailure::new(FailureKind::IndexOutOfRange, region));
        }
        let v = read_value(alu, r, size)?;
        if !(-AC_LIMIT..=AC_LIMIT).contains(&v) {
            return Err(DecodeFailure::new(FailureKind::LimitExceeded, region));
        }
        out[ZIGZAG[k]] = v;
        nonzero += usize::from(v != 0);
        k += 1;
    }
    if k > 64 {
        return Err(DecodeFailure::new(FailureKind::IndexOutOfRange, region));
    }
    Ok(nonzero)
}
