//! 8x8 fixed-point DCT.
//!
//! Both directions use one 8x8 basis table scaled by 2^11:
//! `BASIS[k][n] = round(2048 * c(k)/2 * cos((2n+1) k pi / 16))`, with
//! `c(0) = 1/sqrt(2)` and `c(k) = 1` otherwise. The 2-D transform is
//! orthonormal, so a coefficient error `e` costs `e^2` of summed pixel error.
//!
//! The inverse runs on an [`Alu`]. It is separable (columns, then rows) and
//! skips zero inputs, as sparse decoders do; every multiply, accumulate and
//! descale it does perform is an elastic operation. Final outputs are
//! saturated with plain comparisons, so corrupted coefficients never index
//! anything.

use crate::alu::Alu;

pub const CONST_BITS: u32 = 11;
/// Extra fractional bits kept between the two inverse passes.
pub const PASS1_BITS: u32 = 2;

#[rustfmt::skip]
pub const BASIS: [[i32; 8]; 8] = [
    [  724,   724,   724,   724,   724,   724,   724,   724],
    [ 1004,   851,   569,   200,  -200,  -569,  -851, -1004],
    [  946,   392,  -392,  -946,  -946,  -392,   392,   946],
    [  851,  -200, -1004,  -569,   569,  1004,   200,  -851],
    [  724,  -724,  -724,   724,   724,  -724,  -724,   724],
    [  569, -1004,   200,   851,  -851,  -200,  1004,  -569],
    [  392,  -946,   946,  -392,  -392,   946,  -946,   392],
    [  200,  -569,   851, -1004,  1004,  -851,   569,  -200],
];

/// Zig-zag scan order: `ZIGZAG[i]` is the raster index of the i-th coefficient.
#[rustfmt::skip]
pub const ZIGZAG: [usize; 64] = [
     0,  1,  8, 16,  9,  2,  3, 10,
    17, 24, 32, 25, 18, 11,  4,  5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13,  6,  7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63,
];

fn descale(v: i64, bits: u32) -> i64 {
    (v + (1 << (bits - 1))) >> bits
}

/// Forward DCT of a raster-order block of (level-shifted) samples. Reliable.
pub fn fdct(block: &[i32; 64]) -> [i32; 64] {
    // Rows: t[y][u] = sum_x B[u][x] f[y][x], kept at 2^3 scale.
    let mut tmp = [0i64; 64];
    for y in 0..8 {
        for u in 0..8 {
            let s: i64 = (0..8)
                .map(|x| i64::from(BASIS[u][x]) * i64::from(block[y * 8 + x]))
                .sum();
            tmp[y * 8 + u] = descale(s, CONST_BITS - 3);
        }
    }
    let mut out = [0i32; 64];
    for v in 0..8 {
        for u in 0..8 {
            let s: i64 = (0..8).map(|y| i64::from(BASIS[v][y]) * tmp[y * 8 + u]).sum();
            out[v * 8 + u] = descale(s, CONST_BITS + 3) as i32;
        }
    }
    out
}

/// Inverse DCT of raster-order coefficients on `alu`.
///
/// `bias` is added to every output sample (128 undoes the JPEG level shift)
/// and the result is saturated to `[lo, hi]`.
pub fn idct<A: Alu>(alu: &mut A, coef: &[i32; 64], bias: i32, lo: i32, hi: i32) -> [i32; 64] {
    let pass1_shift = CONST_BITS - PASS1_BITS;
    let round1 = 1i32 << (pass1_shift - 1);
    let final_shift = CONST_BITS + PASS1_BITS;
    let round2 = (1i32 << (final_shift - 1)) + (bias << final_shift);

    // Columns: tmp[y][u] = sum_v B[v][y] coef[v][u], at 2^PASS1_BITS scale.
    let mut tmp = [0i32; 64];
    let mut col_live = [false; 8];
    let mut nz = [(0usize, 0i32); 8];
    for u in 0..8 {
        let mut n = 0;
        for v in 0..8 {
            let c = coef[v * 8 + u];
            if c != 0 {
                nz[n] = (v, c);
                n += 1;
            }
        }
        if n == 0 {
            continue;
        }
        col_live[u] = true;
        let (v0, c0) = nz[0];
        for y in 0..8 {
            let mut acc = alu.mul(BASIS[v0][y], c0);
            for &(v, c) in &nz[1..n] {
                let p = alu.mul(BASIS[v][y], c);
                acc = alu.add(acc, p);
            }
            let r = alu.add(acc, round1);
            tmp[y * 8 + u] = alu.shr(r, pass1_shift);
        }
    }

    // Rows: out[y][x] = sum_u B[u][x] tmp[y][u].
    let mut out = [0i32; 64];
    for y in 0..8 {
        let mut n = 0;
        for u in 0..8 {
            let t = tmp[y * 8 + u];
            if col_live[u] && t != 0 {
                nz[n] = (u, t);
                n += 1;
            }
        }
        for x in 0..8 {
            let mut acc = round2;
            for &(u, t) in &nz[..n] {
                let p = alu.mul(BASIS[u][x], t);
                acc = alu.add(acc, p);
            }
            let v = alu.shr(acc, final_shift);
            out[y * 8 + x] = v.clamp(lo, hi);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alu::{Exact, FidelityContext};
    use crate::rng::derive_stream;

    /// Direct double-precision 2-D IDCT, independent of the basis table.
    fn idct_float(coef: &[i32; 64]) -> [f64; 64] {
        let c = |k: usize| if k == 0 { 1.0 / 2f64.sqrt() } else { 1.0 };
        let mut out = [0.0; 64];
        for y in 0..8 {
            for x in 0..8 {
                let mut s = 0.0;
                for v in 0..8 {
                    for u in 0..8 {
                        s += c(u) * c(v) / 4.0
                            * f64::from(coef[v * 8 + u])
                            * (((2 * x + 1) as f64) * u as f64 * std::f64::consts::PI / 16.0).cos()
                            * (((2 * y + 1) as f64) * v as f64 * std::f64::consts::PI / 16.0).cos();
                    }
                }
                out[y * 8 + x] = s;
            }
        }
        out
    }

    fn random_block(seed: u64, lo: i32, hi: i32) -> [i32; 64] {
        let mut rng = derive_stream(seed, &["block".into()]);
        let mut b = [0; 64];
        for v in b.iter_mut() {
            *v = rng.range_i32(lo, hi);
        }
        b
    }

    #[test]
    fn basis_matches_cosines() {
        for k in 0..8 {
            let c = if k == 0 { 1.0 / 2f64.sqrt() } else { 1.0 };
            for n in 0..8 {
                let exact = 2048.0 * c / 2.0
                    * (((2 * n + 1) * k) as f64 * std::f64::consts::PI / 16.0).cos();
                assert_eq!(BASIS[k][n], exact.round() as i32);
            }
        }
    }

    #[test]
    fn idct_tracks_float_reference() {
        for seed in 0..50 {
            let mut coef = random_block(seed, -300, 300);
            // Typical decoded blocks are sparse at high frequencies.
            for (i, c) in coef.iter_mut().enumerate() {
                if i % 8 + i / 8 > 6 {
                    *c = 0;
                }
            }
            let got = idct(&mut Exact, &coef, 0, -10_000, 10_000);
            let want = idct_float(&coef);
            for i in 0..64 {
                assert!(
                    (f64::from(got[i]) - want[i]).abs() <= 1.5,
                    "seed {seed} i {i}: {} vs {}",
                    got[i],
                    want[i]
                );
            }
        }
    }

    #[test]
    fn round_trip_is_near_lossless() {
        for seed in 0..20 {
            let block = random_block(seed + 100, -128, 127);
            let coef = fdct(&block);
            let back = idct(&mut Exact, &coef, 0, -256, 255);
            for i in 0..64 {
                assert!((back[i] - block[i]).abs() <= 1, "seed {seed}");
            }
        }
    }

    #[test]
    fn dc_only_block_is_flat() {
        let mut coef = [0; 64];
        coef[0] = 80; // mean of 10
        let out = idct(&mut Exact, &coef, 128, 0, 255);
        assert!(out.iter().all(|&v| v == 138));
    }

    #[test]
    fn all_zero_block_costs_only_the_final_descale() {
        let mut ctx = FidelityContext::reliable();
        ctx.enter_region("idct");
        let out = idct(&mut ctx, &[0; 64], 0, -256, 255);
        assert_eq!(out, [0; 64]);
        assert_eq!(ctx.op_counts()["idct"], 64);
    }

    #[test]
    fn reliable_context_matches_exact() {
        let coef = random_block(7, -500, 500);
        let mut ctx = FidelityContext::reliable();
        assert_eq!(idct(&mut ctx, &coef, 128, 0, 255), idct(&mut Exact, &coef, 128, 0, 255));
    }

    #[test]
    fn zigzag_is_a_permutation() {
        let mut seen = [false; 64];
        for &i in &ZIGZAG {
            assert!(!seen[i]);
            seen[i] = true;
        }
    }
}
