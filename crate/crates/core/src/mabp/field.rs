//! Arithmetic modulo a prime that fits in 63 bits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The Mersenne prime `2^61 - 1`.
pub const DEFAULT_MODULUS: u64 = (1 << 61) - 1;

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    (a as u128 * b as u128 % p as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1 % p;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, p);
        }
        b = mul_mod(b, b, p);
        e >>= 1;
    }
    r
}

/// Deterministic Miller–Rabin for all 64-bit inputs.
pub fn is_prime_u64(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &b in &BASES {
        if n.is_multiple_of(b) {
            return n == b;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// The prime field `Z/pZ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FieldFields", into = "FieldFields")]
pub struct PrimeField {
    p: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldFields {
    modulus: u64,
}

impl TryFrom<FieldFields> for PrimeField {
    type Error = Error;
    fn try_from(f: FieldFields) -> Result<Self> {
        PrimeField::new(f.modulus)
    }
}

impl From<PrimeField> for FieldFields {
    fn from(f: PrimeField) -> Self {
        FieldFields { modulus: f.p }
    }
}

impl Default for PrimeField {
    fn default() -> Self {
        PrimeField { p: DEFAULT_MODULUS }
    }
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self> {
        if p >= 1 << 63 {
            return Err(Error::Domain(format!("modulus {p} does not fit in 63 bits")));
        }
        if !is_prime_u64(p) {
            return Err(Error::Domain(format!("modulus {p} is not prime")));
        }
        Ok(PrimeField { p })
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn reduce(&self, a: u64) -> u64 {
        a % self.p
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        mul_mod(a, b, self.p)
    }

    pub fn pow(&self, b: u64, e: u64) -> u64 {
        pow_mod(b, e, self.p)
    }

    /// Inverse of a nonzero element.
    pub fn inv(&self, a: u64) -> u64 {
        assert!(!a.is_multiple_of(self.p), "zero has no inverse");
        pow_mod(a, self.p - 2, self.p)
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.random_range(0..self.p)
    }

    /// Whether `p > 2^n · n · r` where `r` is the target rank, i.e. the
    /// union bound over all equipartitions of the degree-`n·r` determinants
    /// stays below one.
    pub fn schwartz_zippel_ok(&self, n: usize, rank: u64) -> bool {
        let bound = (n as f64).exp2() * n as f64 * rank as f64;
        (self.p as f64) > bound
    }

    /// The failure probability bound `2^n · n · r / p`.
    pub fn schwartz_zippel_bound(&self, n: usize, rank: u64) -> f64 {
        (n as f64).exp2() * n as f64 * rank as f64 / self.p as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primality() {
        let small: Vec<u64> = (0..50).filter(|&k| is_prime_u64(k)).collect();
        assert_eq!(small, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47]);
        assert!(is_prime_u64(DEFAULT_MODULUS));
        assert!(!is_prime_u64(DEFAULT_MODULUS - 2));
        assert!(!is_prime_u64(3_215_031_751));
        assert!(PrimeField::new(15).is_err());
    }

    #[test]
    fn arithmetic() {
        let f = PrimeField::new(101).unwrap();
        assert_eq!(f.add(100, 5), 4);
        assert_eq!(f.sub(3, 5), 99);
        assert_eq!(f.neg(0), 0);
        for a in 1..101 {
            assert_eq!(f.mul(a, f.inv(a)), 1);
        }
        let g = PrimeField::default();
        let a = DEFAULT_MODULUS - 1;
        assert_eq!(g.mul(a, a), 1);
    }

    #[test]
    fn schwartz_zippel_margin() {
        let f = PrimeField::default();
        assert!(f.schwartz_zippel_ok(8, 16));
        assert!(f.schwartz_zippel_bound(8, 16) < 1e-12);
        assert!(!PrimeField::new(101).unwrap().schwartz_zippel_ok(4, 4));
    }

    #[test]
    fn serde_roundtrip() {
        let f: PrimeField = serde_json::from_str(r#"{"modulus": 101}"#).unwrap();
        assert_eq!(f.modulus(), 101);
        assert!(serde_json::from_str::<PrimeField>(r#"{"modulus": 100}"#).is_err());
    }
}
