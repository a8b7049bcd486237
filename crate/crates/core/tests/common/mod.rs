#![allow(dead_code)]

use num_bigint::BigInt;

/// `J₁(x)` from its power series in fixed point with 1600 fractional bits.
pub fn j1_oracle(x: f64) -> f64 {
    const BITS: usize = 1600;
    let (mant, exp) = decompose(x);
    let xs = if exp >= 0 {
        BigInt::from(mant) << (BITS + exp as usize)
    } else {
        (BigInt::from(mant) << BITS) >> (-exp) as usize
    };
    let half = xs >> 1usize;
    let h2 = (&half * &half) >> BITS;
    let mut term = half.clone();
    let mut sum = half;
    let zero = BigInt::from(0);
    let mut k: u64 = 1;
    while term != zero {
        term = -((&term * &h2) >> BITS) / BigInt::from(k * (k + 1));
        sum += &term;
        k += 1;
    }
    let top = i128::try_from(sum >> (BITS - 100)).unwrap();
    top as f64 * 2f64.powi(-100)
}

fn decompose(x: f64) -> (i64, i64) {
    if x == 0.0 {
        return (0, 0);
    }
    let bits = x.to_bits();
    let exponent = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = (bits & ((1u64 << 52) - 1)) | (1u64 << 52);
    (mantissa as i64, exponent - 1075)
}
