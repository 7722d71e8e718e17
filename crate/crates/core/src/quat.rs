//! Integer Hamilton quaternions, the norm-`q1` generator set, reduced words
//! over it, and the splitting map into 2x2 matrices modulo `q2^n`.

use std::fmt;
use std::ops::Mul;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::modarith::{self, PrimePower};
use crate::projgroup::ResidueMatrix;

/// Default bound on word length for exact quaternion evaluation.
pub const DEFAULT_WORD_CAP: usize = 12;

/// `x0 + x1 i + x2 j + x3 k` with `i² = j² = -1`, `ij = -ji = k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Quaternion {
    pub x0: i128,
    pub x1: i128,
    pub x2: i128,
    pub x3: i128,
}

impl Quaternion {
    pub const ONE: Quaternion = Quaternion::new(1, 0, 0, 0);

    pub const fn new(x0: i128, x1: i128, x2: i128, x3: i128) -> Self {
        Self { x0, x1, x2, x3 }
    }

    pub fn coefficients(&self) -> [i128; 4] {
        [self.x0, self.x1, self.x2, self.x3]
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.x0, -self.x1, -self.x2, -self.x3)
    }

    pub fn norm(&self) -> i128 {
        self.checked_norm().expect("quaternion norm overflow")
    }

    pub fn checked_norm(&self) -> Option<i128> {
        self.coefficients()
            .iter()
            .try_fold(0i128, |acc, &x| acc.checked_add(x.checked_mul(x)?))
    }

    /// Hamilton product, failing instead of wrapping on overflow.
    pub fn checked_mul(&self, rhs: &Self) -> Result<Self> {
        let (a, b) = (self, rhs);
        let dot = |terms: [(i128, i128, i128); 4]| -> Option<i128> {
            terms.iter().try_fold(0i128, |acc, &(s, x, y)| {
                acc.checked_add(x.checked_mul(y)?.checked_mul(s)?)
            })
        };
        let r = (|| {
            Some(Quaternion::new(
                dot([(1, a.x0, b.x0), (-1, a.x1, b.x1), (-1, a.x2, b.x2), (-1, a.x3, b.x3)])?,
                dot([(1, a.x0, b.x1), (1, a.x1, b.x0), (1, a.x2, b.x3), (-1, a.x3, b.x2)])?,
                dot([(1, a.x0, b.x2), (-1, a.x1, b.x3), (1, a.x2, b.x0), (1, a.x3, b.x1)])?,
                dot([(1, a.x0, b.x3), (1, a.x1, b.x2), (-1, a.x2, b.x1), (1, a.x3, b.x0)])?,
            ))
        })();
        r.ok_or(Error::Overflow("quaternion product"))
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, rhs: Quaternion) -> Quaternion {
        self.checked_mul(&rhs).expect("quaternion product overflow")
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.x0)?;
        for (c, unit) in [(self.x1, "i"), (self.x2, "j"), (self.x3, "k")] {
            if c < 0 {
                write!(f, "-{}{unit}", -c)?;
            } else {
                write!(f, "+{c}{unit}")?;
            }
        }
        Ok(())
    }
}

/// The `q1 + 1` quaternions of norm `q1` with `x0` odd positive and
/// `x1, x2, x3` even, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSet {
    q1: u64,
    gens: Vec<Quaternion>,
    inverse: Vec<usize>,
    max_word_len: usize,
}

impl GeneratorSet {
    pub fn q1(&self) -> u64 {
        self.q1
    }

    pub fn len(&self) -> usize {
        self.gens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gens.is_empty()
    }

    pub fn generators(&self) -> &[Quaternion] {
        &self.gens
    }

    pub fn get(&self, idx: usize) -> Quaternion {
        self.gens[idx]
    }

    /// Index of the conjugate (= projective inverse) of generator `idx`.
    pub fn inverse_of(&self, idx: usize) -> usize {
        self.inverse[idx]
    }

    pub fn inverse_pairing(&self) -> &[usize] {
        &self.inverse
    }

    pub fn index_of(&self, q: &Quaternion) -> Option<usize> {
        self.gens.binary_search(q).ok()
    }

    pub fn max_word_len(&self) -> usize {
        self.max_word_len
    }

    pub fn set_max_word_len(&mut self, cap: usize) {
        self.max_word_len = cap;
    }
}

pub fn enumerate_generators(q1: u64) -> Result<GeneratorSet> {
    if !modarith::is_prime(q1) || q1 % 4 != 1 {
        return Err(Error::InvalidParameter(format!(
            "q1 must be a prime ≡ 1 (mod 4), got {q1}"
        )));
    }
    let n = q1 as i128;
    let bound = (q1 as f64).sqrt() as i128 + 1;
    let mut gens = Vec::with_capacity(q1 as usize + 1);
    for x0 in (1..=bound).step_by(2) {
        for x1 in (-bound..=bound).filter(|x| x % 2 == 0) {
            for x2 in (-bound..=bound).filter(|x| x % 2 == 0) {
                for x3 in (-bound..=bound).filter(|x| x % 2 == 0) {
                    let q = Quaternion::new(x0, x1, x2, x3);
                    if q.norm() == n {
                        gens.push(q);
                    }
                }
            }
        }
    }
    gens.sort_unstable();
    if gens.len() as u64 != q1 + 1 {
        return Err(Error::InvalidParameter(format!(
            "found {} generators of norm {q1}, expected {}",
            gens.len(),
            q1 + 1
        )));
    }
    let inverse = gens
        .iter()
        .map(|g| {
            gens.binary_search(&g.conjugate())
                .map_err(|_| Error::InvalidParameter(format!("conjugate of {g} missing")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GeneratorSet {
        q1,
        gens,
        inverse,
        max_word_len: DEFAULT_WORD_CAP,
    })
}

/// A word in the generators, stored as generator indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
#[serde(transparent)]
pub struct FreeWord {
    pub letters: Vec<usize>,
}

impl FreeWord {
    pub fn new(letters: Vec<usize>) -> Self {
        Self { letters }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_reduced(&self, gens: &GeneratorSet) -> bool {
        self.letters
            .windows(2)
            .all(|w| gens.inverse_of(w[0]) != w[1])
    }

    pub fn inverse(&self, gens: &GeneratorSet) -> Self {
        Self::new(
            self.letters
                .iter()
                .rev()
                .map(|&l| gens.inverse_of(l))
                .collect(),
        )
    }
}

impl fmt::Display for FreeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e");
        }
        let parts: Vec<String> = self.letters.iter().map(|l| format!("s{l}")).collect();
        write!(f, "{}", parts.join("·"))
    }
}

/// Product of the generators of a reduced word, left to right.
pub fn evaluate_word(w: &FreeWord, gens: &GeneratorSet) -> Result<Quaternion> {
    if let Some(&bad) = w.letters.iter().find(|&&l| l >= gens.len()) {
        return Err(Error::InvalidWord(format!("letter {bad} out of range")));
    }
    if !w.is_reduced(gens) {
        return Err(Error::InvalidWord(format!("{w} is not reduced")));
    }
    if w.len() > gens.max_word_len() {
        return Err(Error::InvalidWord(format!(
            "length {} exceeds the exact-arithmetic cap {}",
            w.len(),
            gens.max_word_len()
        )));
    }
    w.letters
        .iter()
        .try_fold(Quaternion::ONE, |acc, &l| acc.checked_mul(&gens.get(l)))
}

/// The splitting map `a+bi+cj+dk ↦ [[a+bι, c+dι], [-c+dι, a-bι]]` with
/// `ι` the canonical square root of -1 modulo `q2^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Splitting {
    pp: PrimePower,
    sqrt_minus_one: u64,
}

impl Splitting {
    pub fn new(pp: PrimePower) -> Result<Self> {
        if pp.prime() % 4 != 1 {
            return Err(Error::InvalidParameter(format!(
                "splitting needs q2 ≡ 1 (mod 4), got {}",
                pp.prime()
            )));
        }
        let sqrt_minus_one = modarith::sqrt_minus_one(&pp)?;
        Ok(Self { pp, sqrt_minus_one })
    }

    pub fn ring(&self) -> PrimePower {
        self.pp
    }

    pub fn sqrt_minus_one(&self) -> u64 {
        self.sqrt_minus_one
    }

    /// Matrix image of `q`; the determinant is `norm(q)` modulo `q2^n`.
    pub fn split(&self, q: &Quaternion) -> ResidueMatrix {
        let pp = &self.pp;
        let i = self.sqrt_minus_one;
        let [a, b, c, d] = q.coefficients().map(|x| pp.reduce(x));
        let bi = pp.mul(b, i);
        let di = pp.mul(d, i);
        ResidueMatrix::from_entries_unchecked(
            [pp.add(a, bi), pp.add(c, di), pp.sub(di, c), pp.sub(a, bi)],
            *pp,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force_generators(q1: i128) -> Vec<Quaternion> {
        let b = 6;
        let mut out = Vec::new();
        for x0 in -b..=b {
            for x1 in -b..=b {
                for x2 in -b..=b {
                    for x3 in -b..=b {
                        let q = Quaternion::new(x0, x1, x2, x3);
                        if q.norm() == q1
                            && x0 > 0
                            && x0 % 2 == 1
                            && [x1, x2, x3].iter().all(|x| x % 2 == 0)
                        {
                            out.push(q);
                        }
                    }
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn product_examples() {
        let q = Quaternion::new(3, -1, 4, 7);
        assert_eq!(Quaternion::ONE * q, q);
        let i = Quaternion::new(0, 1, 0, 0);
        let j = Quaternion::new(0, 0, 1, 0);
        assert_eq!(i * j, Quaternion::new(0, 0, 0, 1));
        assert_eq!(j * i, Quaternion::new(0, 0, 0, -1));
        assert_eq!(
            Quaternion::new(1, 2, 0, 0) * Quaternion::new(1, -2, 0, 0),
            Quaternion::new(5, 0, 0, 0)
        );
    }

    #[test]
    fn product_overflow_is_reported() {
        let big = Quaternion::new(i128::MAX / 2, 1, 0, 0);
        assert!(matches!(big.checked_mul(&big), Err(Error::Overflow(_))));
    }

    #[test]
    fn conjugate_examples() {
        assert_eq!(
            Quaternion::new(1, 2, 0, 0).conjugate(),
            Quaternion::new(1, -2, 0, 0)
        );
        let real = Quaternion::new(7, 0, 0, 0);
        assert_eq!(real.conjugate(), real);
        let q = Quaternion::new(1, 2, 2, 4);
        assert_eq!(q.conjugate().norm(), 25);
        assert_eq!(q * q.conjugate(), Quaternion::new(25, 0, 0, 0));
    }

    #[test]
    fn generators_for_5_and_13() {
        let s5 = enumerate_generators(5).unwrap();
        assert_eq!(
            s5.generators(),
            &[
                Quaternion::new(1, -2, 0, 0),
                Quaternion::new(1, 0, -2, 0),
                Quaternion::new(1, 0, 0, -2),
                Quaternion::new(1, 0, 0, 2),
                Quaternion::new(1, 0, 2, 0),
                Quaternion::new(1, 2, 0, 0),
            ]
        );
        let s13 = enumerate_generators(13).unwrap();
        assert_eq!(s13.len(), 14);
        assert_eq!(s13.generators(), brute_force_generators(13).as_slice());
        assert_eq!(s13.generators().iter().filter(|g| g.x0 == 3).count(), 6);
        assert_eq!(s13.generators().iter().filter(|g| g.x0 == 1).count(), 8);
    }

    #[test]
    fn generator_counts_and_symmetry() {
        for q1 in [5u64, 13, 17, 29, 37, 41] {
            let s = enumerate_generators(q1).unwrap();
            assert_eq!(s.len() as u64, q1 + 1);
            assert_eq!(s.generators(), brute_force_generators(q1 as i128).as_slice());
            for (idx, g) in s.generators().iter().enumerate() {
                let inv = s.inverse_of(idx);
                assert_ne!(inv, idx);
                assert_eq!(s.inverse_of(inv), idx);
                assert_eq!(s.get(inv), g.conjugate());
            }
        }
    }

    #[test]
    fn generator_validation() {
        for bad in [3u64, 4, 7, 21, 25] {
            assert!(matches!(
                enumerate_generators(bad),
                Err(Error::InvalidParameter(_))
            ));
        }
    }

    #[test]
    fn word_examples() {
        let s = enumerate_generators(5).unwrap();
        assert_eq!(evaluate_word(&FreeWord::empty(), &s).unwrap(), Quaternion::ONE);
        let g = s.index_of(&Quaternion::new(1, 2, 0, 0)).unwrap();
        let h = s.index_of(&Quaternion::new(1, 0, 2, 0)).unwrap();
        assert!(matches!(
            evaluate_word(&FreeWord::new(vec![g, s.inverse_of(g)]), &s),
            Err(Error::InvalidWord(_))
        ));
        let q = evaluate_word(&FreeWord::new(vec![g, h]), &s).unwrap();
        assert_eq!(q, Quaternion::new(1, 2, 2, 4));
        assert_eq!(q.norm(), 25);
    }

    #[test]
    fn word_cap_enforced() {
        let mut s = enumerate_generators(5).unwrap();
        let w = FreeWord::new(vec![0; 13]);
        assert!(evaluate_word(&w, &s).is_err());
        s.set_max_word_len(13);
        assert_eq!(evaluate_word(&w, &s).unwrap().norm(), 5i128.pow(13));
    }

    #[test]
    fn split_examples() {
        let sp = Splitting::new(PrimePower::new(13, 1).unwrap()).unwrap();
        assert_eq!(sp.sqrt_minus_one(), 5);
        assert_eq!(sp.split(&Quaternion::ONE).entries(), [1, 0, 0, 1]);
        let m = sp.split(&Quaternion::new(1, 2, 0, 0));
        assert_eq!(m.entries(), [11, 0, 0, 4]);
        assert_eq!(m.det(), 5);
        let m = sp.split(&Quaternion::new(1, 0, 2, 0));
        assert_eq!(m.entries(), [1, 2, 11, 1]);
        assert_eq!(m.det(), 5);
    }

    #[test]
    fn split_determinant_is_norm() {
        for (q1, q2) in [(5u64, 13u64), (13, 5), (5, 29), (17, 13)] {
            let s = enumerate_generators(q1).unwrap();
            for n in 1..=3 {
                let pp = PrimePower::new(q2, n).unwrap();
                let sp = Splitting::new(pp).unwrap();
                for (idx, g) in s.generators().iter().enumerate() {
                    let m = sp.split(g);
                    assert_eq!(m.det(), pp.reduce(q1 as i128));
                    let prod = m.mul(&sp.split(&s.get(s.inverse_of(idx))));
                    assert_eq!(prod.entries(), [q1 % pp.modulus(), 0, 0, q1 % pp.modulus()]);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn norm_is_multiplicative(a in prop::array::uniform4(-1000i128..1000), b in prop::array::uniform4(-1000i128..1000)) {
            let (qa, qb) = (Quaternion::new(a[0], a[1], a[2], a[3]), Quaternion::new(b[0], b[1], b[2], b[3]));
            prop_assert_eq!((qa * qb).norm(), qa.norm() * qb.norm());
        }

        #[test]
        fn split_is_multiplicative(
            letters in prop::collection::vec(0usize..6, 0..=4),
            k in 1u32..4,
            q2 in prop::sample::select(vec![13u64, 17, 29]),
        ) {
            let s = enumerate_generators(5).unwrap();
            let w = FreeWord::new(letters);
            prop_assume!(w.is_reduced(&s));
            let sp = Splitting::new(PrimePower::new(q2, k).unwrap()).unwrap();
            let q = evaluate_word(&w, &s).unwrap();
            let by_matrices = w.letters.iter().fold(sp.split(&Quaternion::ONE), |acc, &l| acc.mul(&sp.split(&s.get(l))));
            prop_assert_eq!(sp.split(&q), by_matrices);
        }
    }
}
