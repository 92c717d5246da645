//! Small numeric helpers shared by the exact-arithmetic modules.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// `v · 2^e` without intermediate overflow for moderate `e`.
pub fn ldexp(mut v: f64, mut e: i64) -> f64 {
    while e > 1000 {
        v *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        v *= 2f64.powi(-1000);
        e += 1000;
    }
    v * 2f64.powi(e as i32)
}

/// Nearest-ish `f64` to `num / den` for arbitrarily large operands.
pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    assert!(!den.is_zero(), "zero denominator");
    if num.is_zero() {
        return 0.0;
    }
    let shift = 64 + den.bits() as i64 - num.bits() as i64;
    let q = if shift >= 0 {
        (num << shift as u64) / den
    } else {
        num / (den << (-shift) as u64)
    };
    ldexp(q.to_f64().expect("quotient has about 64 bits"), -shift)
}

pub fn big_rational_to_f64(r: &BigRational) -> f64 {
    let v = ratio_to_f64(&r.numer().abs().to_biguint().expect("abs is non-negative"), &r.denom().abs().to_biguint().expect("abs is non-negative"));
    if r.is_negative() {
        -v
    } else {
        v
    }
}

pub fn big_rational(num: BigUint, den: BigUint) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `C(n, k)` as a big integer.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}
