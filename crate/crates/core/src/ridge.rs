//! Register decoding and modular ridge arithmetic.
//!
//! The ideal signature of key `k` is concentration on the ridge
//! `v = k*u (mod 2^n)`. All functions here are pure; residuals live on the
//! cyclic group `Z_{2^n}`, so distance is circular.

use crate::data::Shot;
use crate::error::CoreError;

/// Decoded register values of one shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodedShot {
    pub u: u32,
    pub v: u32,
}

/// Split a shot into `(u, v)`: bits 1..n little-endian give `u`, bits n+1..2n give `v`.
pub fn decode_registers(shot: &Shot, n: usize) -> Result<DecodedShot, CoreError> {
    let bit_count = 2 * n;
    let used = 16 - shot.pattern.leading_zeros() as usize;
    if used > bit_count {
        return Err(CoreError::MalformedShot {
            expected: bit_count,
            got: used,
        });
    }
    let mask = (1u32 << n) - 1;
    Ok(DecodedShot {
        u: u32::from(shot.pattern) & mask,
        v: u32::from(shot.pattern) >> n,
    })
}

/// Inverse of [`decode_registers`]: pack `(u, v)` into a bit pattern.
pub fn encode_registers(u: u32, v: u32, n: usize) -> u16 {
    debug_assert!(u < (1 << n) && v < (1 << n));
    (u | (v << n)) as u16
}

/// Ridge residual `(v - k*u) mod 2^n`; zero iff `(u, v)` lies on the key-`k` ridge.
#[inline]
pub fn ridge_residual(k: u32, u: u32, v: u32, n: usize) -> u32 {
    debug_assert!(u < (1 << n) && v < (1 << n));
    let m = 1u64 << n;
    ((u64::from(v)).wrapping_sub(u64::from(k) * u64::from(u)) & (m - 1)) as u32
}

/// Ridge-hit indicator: `true` iff the residual is zero.
#[inline]
pub fn ridge_hit(k: u32, u: u32, v: u32, n: usize) -> bool {
    ridge_residual(k, u, v, n) == 0
}

/// Circular distance of a residual on `Z_{2^n}`: `min(r, 2^n - r)`.
#[inline]
pub fn ridge_distance(r: u32, n: usize) -> u32 {
    debug_assert!(r < (1 << n));
    let m = 1u32 << n;
    r.min(m - r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Shot;

    fn shot_from_str(bits: &str) -> Shot {
        let v: alloc::vec::Vec<u8> = bits.bytes().map(|b| b - b'0').collect();
        Shot::from_bits(0, &v, v.len()).unwrap()
    }

    #[test]
    fn decode_examples() {
        let cases = [("00000000", (0, 0)), ("10000000", (1, 0)), ("00100100", (4, 2))];
        for (bits, (u, v)) in cases {
            let d = decode_registers(&shot_from_str(bits), 4).unwrap();
            assert_eq!((d.u, d.v), (u, v), "bits {bits}");
        }
    }

    #[test]
    fn decode_rejects_pattern_wider_than_registers() {
        let shot = Shot { key: 0, pattern: 1 << 4 };
        assert!(decode_registers(&shot, 2).is_err());
        assert!(decode_registers(&shot, 4).is_ok());
    }

    #[test]
    fn encode_decode_round_trip_all_outcomes() {
        for u in 0..16 {
            for v in 0..16 {
                let shot = Shot { key: 0, pattern: encode_registers(u, v, 4) };
                let d = decode_registers(&shot, 4).unwrap();
                assert_eq!((d.u, d.v), (u, v));
            }
        }
    }

    #[test]
    fn residual_examples() {
        assert_eq!(ridge_residual(3, 2, 6, 4), 0);
        assert_eq!(ridge_residual(5, 3, 0, 4), 1);
        assert_eq!(ridge_residual(12, 4, 0, 4), 0); // 48 mod 16 = 0, even-key aliasing
    }

    #[test]
    fn hit_examples() {
        assert!(ridge_hit(1, 7, 7, 4));
        assert!(!ridge_hit(1, 7, 8, 4));
        assert!(ridge_hit(8, 2, 0, 4)); // 16 mod 16 = 0
    }

    #[test]
    fn distance_examples() {
        assert_eq!(ridge_distance(0, 4), 0);
        assert_eq!(ridge_distance(15, 4), 1);
        assert_eq!(ridge_distance(8, 4), 8);
    }

    #[test]
    fn ridge_is_translation_invariant() {
        // r_k(u, v) = 0 implies r_k(u + s, v + k*s) = 0, exhaustively at n = 4.
        for k in 0..16 {
            for u in 0..16u32 {
                let v = (k * u) % 16;
                assert!(ridge_hit(k, u, v, 4));
                for s in 0..16u32 {
                    assert!(ridge_hit(k, (u + s) % 16, (v + k * s) % 16, 4));
                }
            }
        }
    }

    #[test]
    fn each_key_ridge_has_one_v_per_u() {
        // Each (k, u) admits exactly one on-ridge v, so the ridge holds 2^n
        // of the 4^n outcomes and the uniform hit chance is exactly 2^-n.
        for k in [1u32, 3, 5, 7, 2, 4, 8, 12] {
            let mut total = 0;
            for u in 0..16u32 {
                let hits = (0..16u32).filter(|&v| ridge_hit(k, u, v, 4)).count();
                assert_eq!(hits, 1, "k={k} u={u}");
                total += hits;
            }
            assert_eq!(total, 16);
        }
    }
}
