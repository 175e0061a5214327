//! Residue arithmetic in Z_D, divisor sets and the generalized totient.
//!
//! Residues are always kept as canonical representatives in `[0, D)`.

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

/// Largest supported qudit dimension.
pub const MAX_MODULUS: u64 = 1 << 16;

/// The qudit dimension `D`, i.e. the modulus of the ring Z_D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct Modulus(u64);

impl Modulus {
    pub fn new(d: u64) -> Result<Self> {
        if d < 2 {
            return Err(invalid(format!("modulus must be >= 2, got {d}")));
        }
        if d > MAX_MODULUS {
            return Err(invalid(format!("modulus {d} exceeds {MAX_MODULUS}")));
        }
        Ok(Modulus(d))
    }

    #[inline]
    pub fn get(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn reduce(self, a: u64) -> u64 {
        a % self.0
    }

    /// Maps any signed integer to its canonical residue.
    #[inline]
    pub fn reduce_signed(self, a: i64) -> u64 {
        a.rem_euclid(self.0 as i64) as u64
    }

    #[inline]
    pub fn add(self, a: u64, b: u64) -> u64 {
        (a + b) % self.0
    }

    #[inline]
    pub fn sub(self, a: u64, b: u64) -> u64 {
        (a + self.0 - b) % self.0
    }

    #[inline]
    pub fn mul(self, a: u64, b: u64) -> u64 {
        (a * b) % self.0
    }

    #[inline]
    pub fn neg(self, a: u64) -> u64 {
        (self.0 - a) % self.0
    }

    pub fn inverse(self, a: u64) -> Option<u64> {
        inverse(a, self.0)
    }

    pub fn is_unit(self, a: u64) -> bool {
        gcd(a, self.0) == 1
    }

    pub fn divisors(self) -> Vec<u64> {
        // D >= 2 by construction
        divisors(self.0).expect("modulus is nonzero")
    }

    /// Canonical divisor generating the same ideal as `a`, i.e. `gcd(a, D)`.
    pub fn ideal_generator(self, a: u64) -> u64 {
        gcd(a, self.0)
    }
}

impl TryFrom<u64> for Modulus {
    type Error = Error;
    fn try_from(d: u64) -> Result<Self> {
        Modulus::new(d)
    }
}

impl From<Modulus> for u64 {
    fn from(m: Modulus) -> u64 {
        m.0
    }
}

impl std::fmt::Display for Modulus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// All positive divisors of `d`, ascending.
pub fn divisors(d: u64) -> Result<Vec<u64>> {
    if d == 0 {
        return Err(invalid("divisors of 0 are undefined"));
    }
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut k = 1;
    while k * k <= d {
        if d.is_multiple_of(k) {
            small.push(k);
            if k * k != d {
                large.push(d / k);
            }
        }
        k += 1;
    }
    small.extend(large.into_iter().rev());
    Ok(small)
}

/// Distinct prime factors of `d`, ascending, by trial division.
pub fn prime_support(mut d: u64) -> Vec<u64> {
    let mut primes = Vec::new();
    let mut p = 2;
    while p * p <= d {
        if d.is_multiple_of(p) {
            primes.push(p);
            while d.is_multiple_of(p) {
                d /= p;
            }
        }
        p += 1;
    }
    if d > 1 {
        primes.push(d);
    }
    primes
}

/// Greatest divisor `d` of `D` with `(D/d)·v ≡ 0` componentwise.
///
/// The zero vector (and the empty vector) has gcd `D`.
pub fn gcd_d(v: &[u64], modulus: Modulus) -> u64 {
    let big_d = modulus.get();
    modulus
        .divisors()
        .into_iter()
        .rev()
        .find(|&d| v.iter().all(|&x| modulus.mul(big_d / d, x % big_d) == 0))
        .unwrap_or(1)
}

/// Multiplicative inverse of `a` modulo `d`, if `gcd(a, d) = 1`.
pub fn inverse(a: u64, d: u64) -> Option<u64> {
    if d == 1 {
        return Some(0);
    }
    let (mut old_r, mut r) = (a as i64 % d as i64, d as i64);
    let (mut old_s, mut s) = (1i64, 0i64);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    (old_r == 1).then(|| old_s.rem_euclid(d as i64) as u64)
}

fn checked_pow(base: u64, exp: u32, what: &'static str) -> Result<u64> {
    base.checked_pow(exp).ok_or(Error::Overflow(what))
}

/// Generalized Euler totient: the number of vectors in Z_D^n with gcd 1.
///
/// Evaluated as `D^n ∏_{p | D} (p^n - 1)/p^n` over the prime support of `D`.
pub fn totient(n: u32, d: u64) -> Result<u64> {
    if n == 0 {
        return Err(invalid("totient requires n >= 1"));
    }
    if d == 0 {
        return Err(invalid("totient requires D >= 1"));
    }
    if d == 1 {
        return Ok(1);
    }
    let mut result = checked_pow(d, n, "totient")?;
    for p in prime_support(d) {
        let pn = checked_pow(p, n, "totient")?;
        result = result / pn * (pn - 1);
    }
    Ok(result)
}

/// Size of the divisor class `{v in Z_D^n : gcd(v) = d}`.
pub fn partition_size(d: u64, big_d: u64, n: u32) -> Result<u64> {
    if d == 0 || big_d == 0 || !big_d.is_multiple_of(d) {
        return Err(invalid(format!("{d} does not divide {big_d}")));
    }
    totient(n, big_d / d)
}
