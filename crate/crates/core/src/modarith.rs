//! Modular arithmetic over odd prime powers.
//!
//! Residues are `u64` values in `[0, modulus)`; every product goes through
//! `u128`, so any modulus below 2^63 is safe. Larger moduli are rejected at
//! construction time rather than silently wrapping.

use crate::error::{Error, Result};

/// Largest modulus accepted by [`PrimePower`].
pub const MAX_MODULUS: u64 = 1 << 62;

/// An odd prime power `p^k` with `k >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimePower {
    p: u64,
    k: u32,
    modulus: u64,
}

impl PrimePower {
    pub fn new(p: u64, k: u32) -> Result<Self> {
        if p == 2 || !is_prime(p) {
            return Err(Error::InvalidParameter(format!("{p} is not an odd prime")));
        }
        if k == 0 {
            return Err(Error::InvalidParameter("exponent must be at least 1".into()));
        }
        let modulus = p
            .checked_pow(k)
            .filter(|&m| m <= MAX_MODULUS)
            .ok_or(Error::Overflow("prime power modulus"))?;
        Ok(Self { p, k, modulus })
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn exponent(&self) -> u32 {
        self.k
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// The same prime with a different exponent.
    pub fn with_exponent(&self, k: u32) -> Result<Self> {
        Self::new(self.p, k)
    }

    /// Reduce an arbitrary signed integer into `[0, modulus)`.
    pub fn reduce(&self, a: i128) -> u64 {
        a.rem_euclid(self.modulus as i128) as u64
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        ((a as u128 + b as u128) % self.modulus as u128) as u64
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        let m = self.modulus;
        ((a % m) + m - (b % m)) % m
    }

    pub fn neg(&self, a: u64) -> u64 {
        self.sub(0, a)
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        mul_mod(a, b, self.modulus)
    }

    pub fn is_unit(&self, a: u64) -> bool {
        !a.is_multiple_of(self.p)
    }

    pub fn inverse(&self, a: u64) -> Result<u64> {
        unit_inverse(a, self)
    }
}

impl std::fmt::Display for PrimePower {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.k == 1 {
            write!(f, "{}", self.p)
        } else {
            write!(f, "{}^{}", self.p, self.k)
        }
    }
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin, exact for every `n < 2^64`.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &w in &WITNESSES {
        if n.is_multiple_of(w) {
            return n == w;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &WITNESSES {
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

fn require_odd_prime(p: u64) -> Result<()> {
    if p == 2 || !is_prime(p) {
        return Err(Error::InvalidParameter(format!("{p} is not an odd prime")));
    }
    Ok(())
}

/// Legendre symbol `(a/p)` by Euler's criterion.
pub fn legendre(a: i128, p: u64) -> Result<i8> {
    require_odd_prime(p)?;
    let r = a.rem_euclid(p as i128) as u64;
    if r == 0 {
        return Ok(0);
    }
    Ok(if pow_mod(r, (p - 1) / 2, p) == 1 { 1 } else { -1 })
}

/// Square root of a quadratic residue modulo an odd prime (Tonelli-Shanks).
///
/// Of the two roots `r` and `p - r`, the smaller one is returned.
pub fn sqrt_mod_prime(a: i128, p: u64) -> Result<u64> {
    if legendre(a, p)? != 1 {
        return Err(Error::NoSquareRoot { a, p });
    }
    let n = a.rem_euclid(p as i128) as u64;
    let root = if p % 4 == 3 {
        pow_mod(n, (p + 1) / 4, p)
    } else {
        tonelli_shanks(n, p)
    };
    Ok(root.min(p - root))
}

fn tonelli_shanks(n: u64, p: u64) -> u64 {
    let s = (p - 1).trailing_zeros();
    let q = (p - 1) >> s;
    let mut z = 2;
    while pow_mod(z, (p - 1) / 2, p) != p - 1 {
        z += 1;
    }
    let mut m = s;
    let mut c = pow_mod(z, q, p);
    let mut t = pow_mod(n, q, p);
    let mut r = pow_mod(n, q.div_ceil(2), p);
    while t != 1 {
        // least i with t^(2^i) == 1
        let mut i = 1;
        let mut t2 = mul_mod(t, t, p);
        while t2 != 1 {
            t2 = mul_mod(t2, t2, p);
            i += 1;
        }
        let b = pow_mod(c, 1 << (m - i - 1), p);
        m = i;
        c = mul_mod(b, b, p);
        t = mul_mod(t, c, p);
        r = mul_mod(r, b, p);
    }
    r
}

/// Lift a square root `r` of `a` modulo `p` to a square root modulo `p^k`
/// by Newton iteration, doubling the precision at every step.
pub fn hensel_lift_sqrt(r: u64, a: i128, pp: &PrimePower) -> Result<u64> {
    let p = pp.prime();
    let fail = || Error::LiftFailure { r, a, p, modulus: pp.modulus() };
    let r0 = r % p;
    if r0 == 0 || mul_mod(r0, r0, p) != a.rem_euclid(p as i128) as u64 {
        return Err(fail());
    }
    let mut root = r0;
    let mut m = p;
    while m < pp.modulus() {
        m = m.saturating_mul(m).min(pp.modulus());
        let target = a.rem_euclid(m as i128) as u64;
        let f = (mul_mod(root, root, m) + m - target) % m;
        let two_r = mul_mod(2, root, m);
        let inv = inverse_mod(two_r, m).ok_or_else(fail)?;
        root = (root + m - mul_mod(f, inv, m)) % m;
    }
    Ok(root)
}

/// Inverse of a unit modulo `p^k`.
pub fn unit_inverse(a: u64, pp: &PrimePower) -> Result<u64> {
    inverse_mod(a % pp.modulus(), pp.modulus()).ok_or(Error::NotInvertible {
        a,
        modulus: pp.modulus(),
    })
}

fn inverse_mod(a: u64, m: u64) -> Option<u64> {
    let (mut old_r, mut r) = (a as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

/// The canonical square root of -1 modulo `p^k`: the lift of the smaller
/// root modulo `p`. Requires `p ≡ 1 (mod 4)`.
pub fn sqrt_minus_one(pp: &PrimePower) -> Result<u64> {
    let r = sqrt_mod_prime(-1, pp.prime())?;
    hensel_lift_sqrt(r, -1, pp)
}
