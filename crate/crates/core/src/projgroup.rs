//! Projective 2x2 matrices over `Z/q^n`, the projective line with its
//! Möbius action, and pair-of-points keys for cosets of the diagonal group.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::modarith::{self, PrimePower};

/// A 2x2 matrix `[[a, b], [c, d]]` with entries in `Z/q^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ResidueMatrix {
    e: [u64; 4],
    pp: PrimePower,
}

impl ResidueMatrix {
    /// Builds a matrix, rejecting non-invertible ones.
    pub fn new(entries: [i128; 4], pp: PrimePower) -> Result<Self> {
        let m = Self::from_entries_unchecked(entries.map(|x| pp.reduce(x)), pp);
        if !pp.is_unit(m.det()) {
            return Err(Error::SingularMatrix(pp.modulus()));
        }
        Ok(m)
    }

    /// Entries must already be reduced; invertibility is not checked.
    pub fn from_entries_unchecked(e: [u64; 4], pp: PrimePower) -> Self {
        debug_assert!(e.iter().all(|&x| x < pp.modulus()));
        Self { e, pp }
    }

    pub fn identity(pp: PrimePower) -> Self {
        Self::from_entries_unchecked([1, 0, 0, 1], pp)
    }

    pub fn entries(&self) -> [u64; 4] {
        self.e
    }

    pub fn ring(&self) -> PrimePower {
        self.pp
    }

    pub fn det(&self) -> u64 {
        let [a, b, c, d] = self.e;
        self.pp.sub(self.pp.mul(a, d), self.pp.mul(b, c))
    }

    pub fn is_invertible(&self) -> bool {
        self.pp.is_unit(self.det())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        debug_assert_eq!(self.pp, rhs.pp);
        let pp = &self.pp;
        let [a, b, c, d] = self.e;
        let [w, x, y, z] = rhs.e;
        Self::from_entries_unchecked(
            [
                pp.add(pp.mul(a, w), pp.mul(b, y)),
                pp.add(pp.mul(a, x), pp.mul(b, z)),
                pp.add(pp.mul(c, w), pp.mul(d, y)),
                pp.add(pp.mul(c, x), pp.mul(d, z)),
            ],
            *pp,
        )
    }

    pub fn scale(&self, u: u64) -> Self {
        Self::from_entries_unchecked(self.e.map(|x| self.pp.mul(x, u)), self.pp)
    }

    /// Entrywise reduction to a lower power of the same prime.
    pub fn reduce_to(&self, target: PrimePower) -> Result<Self> {
        check_reduction(self.pp, target)?;
        Ok(Self::from_entries_unchecked(
            self.e.map(|x| x % target.modulus()),
            target,
        ))
    }
}

fn check_reduction(from: PrimePower, to: PrimePower) -> Result<()> {
    if from.prime() != to.prime() || to.exponent() > from.exponent() {
        return Err(Error::InvalidParameter(format!(
            "cannot reduce from mod {from} to mod {to}"
        )));
    }
    Ok(())
}

/// An element of `PGL2(Z/q^n)`: the representative whose first unit entry
/// (row-major) equals 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ProjMatrix {
    entries: [u64; 4],
    #[serde(skip)]
    pp: PrimePower,
}

impl ProjMatrix {
    pub fn identity(pp: PrimePower) -> Self {
        Self { entries: [1, 0, 0, 1], pp }
    }

    pub fn entries(&self) -> [u64; 4] {
        self.entries
    }

    pub fn ring(&self) -> PrimePower {
        self.pp
    }

    pub fn as_residue(&self) -> ResidueMatrix {
        ResidueMatrix::from_entries_unchecked(self.entries, self.pp)
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        proj_normalize_unchecked(&self.as_residue().mul(&rhs.as_residue()))
    }

    /// Projectively diagonal: both off-diagonal entries vanish.
    pub fn is_diagonal(&self) -> bool {
        self.entries[1] == 0 && self.entries[2] == 0
    }

    pub fn is_upper_triangular(&self) -> bool {
        self.entries[2] == 0
    }

    pub fn inverse(&self) -> Self {
        matrix_inverse(self)
    }

    pub fn reduce_to(&self, target: PrimePower) -> Result<Self> {
        Ok(proj_normalize_unchecked(&self.as_residue().reduce_to(target)?))
    }
}

impl fmt::Display for ProjMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.entries;
        write!(f, "[[{a},{b}],[{c},{d}]] mod {}", self.pp)
    }
}

/// Canonical projective form of an invertible matrix.
pub fn proj_normalize(m: &ResidueMatrix) -> Result<ProjMatrix> {
    if !m.is_invertible() {
        return Err(Error::SingularMatrix(m.ring().modulus()));
    }
    Ok(proj_normalize_unchecked(m))
}

fn proj_normalize_unchecked(m: &ResidueMatrix) -> ProjMatrix {
    let pp = m.ring();
    let lead = m
        .entries()
        .into_iter()
        .find(|&x| pp.is_unit(x))
        .expect("invertible matrix has a unit entry");
    let inv = pp.inverse(lead).expect("unit entry");
    ProjMatrix {
        entries: m.scale(inv).entries(),
        pp,
    }
}

/// Whether the class lies in `PSL2`, i.e. its determinant is a square.
/// For odd `q` a unit is a square mod `q^n` iff it is one mod `q`.
pub fn is_psl(m: &ProjMatrix) -> bool {
    let pp = m.ring();
    let det = m.as_residue().det() % pp.prime();
    modarith::legendre(det as i128, pp.prime()).expect("odd prime modulus") == 1
}

pub fn matrix_inverse(m: &ProjMatrix) -> ProjMatrix {
    let pp = m.ring();
    let [a, b, c, d] = m.entries;
    // the adjugate is a scalar multiple of the inverse, which is all PGL needs
    let adj = ResidueMatrix::from_entries_unchecked([d, pp.neg(b), pp.neg(c), a], pp);
    proj_normalize_unchecked(&adj)
}

/// A point `(x : y)` of `P¹(Z/q^n)` in canonical form: `(x : 1)`, or
/// `(1 : y)` with `q | y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProjPoint {
    x: u64,
    y: u64,
    pp: PrimePower,
}

impl ProjPoint {
    /// Normalizes a unimodular pair; fails if both coordinates are non-units.
    pub fn new(x: i128, y: i128, pp: PrimePower) -> Result<Self> {
        Self::from_residues(pp.reduce(x), pp.reduce(y), pp).ok_or_else(|| {
            Error::InvalidInput(format!("({x} : {y}) is not unimodular mod {pp}"))
        })
    }

    fn from_residues(x: u64, y: u64, pp: PrimePower) -> Option<Self> {
        if pp.is_unit(y) {
            let inv = pp.inverse(y).ok()?;
            Some(Self { x: pp.mul(x, inv), y: 1, pp })
        } else if pp.is_unit(x) {
            let inv = pp.inverse(x).ok()?;
            Some(Self { x: 1, y: pp.mul(y, inv), pp })
        } else {
            None
        }
    }

    /// `(0 : 1)`.
    pub fn zero(pp: PrimePower) -> Self {
        Self { x: 0, y: 1, pp }
    }

    /// `(1 : 0)`.
    pub fn infinity(pp: PrimePower) -> Self {
        Self { x: 1, y: 0, pp }
    }

    pub fn coords(&self) -> (u64, u64) {
        (self.x, self.y)
    }

    pub fn ring(&self) -> PrimePower {
        self.pp
    }

    pub fn reduce_to(&self, target: PrimePower) -> Result<Self> {
        check_reduction(self.pp, target)?;
        let m = target.modulus();
        Ok(Self::from_residues(self.x % m, self.y % m, target)
            .expect("reduction preserves unimodularity"))
    }
}

impl fmt::Display for ProjPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}:{})", self.x, self.y)
    }
}

impl Serialize for ProjPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.x, self.y].serialize(s)
    }
}

/// Möbius action `(x : y) ↦ (ax + by : cx + dy)`.
pub fn mobius(m: &ProjMatrix, pt: &ProjPoint) -> ProjPoint {
    let pp = pt.pp;
    debug_assert_eq!(m.pp, pp);
    let [a, b, c, d] = m.entries;
    let x = pp.add(pp.mul(a, pt.x), pp.mul(b, pt.y));
    let y = pp.add(pp.mul(c, pt.x), pp.mul(d, pt.y));
    ProjPoint::from_residues(x, y, pp).expect("invertible matrices preserve unimodularity")
}

/// All points of `P¹(Z/q^n)`; there are `q^(n-1)(q+1)` of them.
pub fn enumerate_p1(pp: PrimePower) -> Vec<ProjPoint> {
    let m = pp.modulus();
    let affine = (0..m).map(|x| ProjPoint { x, y: 1, pp });
    let at_infinity = (0..m / pp.prime()).map(|t| ProjPoint { x: 1, y: t * pp.prime(), pp });
    affine.chain(at_infinity).collect()
}

/// Key of the right coset `A·m` of the diagonal group `A`: the ordered pair
/// `(m⁻¹·(0:1), m⁻¹·(1:0))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PairCoset {
    pub zero: ProjPoint,
    pub infinity: ProjPoint,
}

impl PairCoset {
    /// The key of the diagonal group itself.
    pub fn base(pp: PrimePower) -> Self {
        Self {
            zero: ProjPoint::zero(pp),
            infinity: ProjPoint::infinity(pp),
        }
    }

    /// Builds a key from two points, which must be in general position.
    pub fn new(zero: ProjPoint, infinity: ProjPoint) -> Result<Self> {
        let pp = zero.pp;
        let det = pp.sub(pp.mul(zero.x, infinity.y), pp.mul(infinity.x, zero.y));
        if zero.pp != infinity.pp || !pp.is_unit(det) {
            return Err(Error::InvalidInput(format!(
                "{zero} and {infinity} are not in general position"
            )));
        }
        Ok(Self { zero, infinity })
    }

    /// Componentwise Möbius action.
    pub fn act(&self, m: &ProjMatrix) -> Self {
        Self {
            zero: mobius(m, &self.zero),
            infinity: mobius(m, &self.infinity),
        }
    }

    pub fn reduce_to(&self, target: PrimePower) -> Result<Self> {
        Ok(Self {
            zero: self.zero.reduce_to(target)?,
            infinity: self.infinity.reduce_to(target)?,
        })
    }
}

impl fmt::Display for PairCoset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.zero, self.infinity)
    }
}

pub fn coset_key(m: &ProjMatrix) -> PairCoset {
    PairCoset::base(m.ring()).act(&m.inverse())
}

/// Reduce from `q^(n+1)` (or any higher power) to `q^n`.
pub fn reduce_level(m: &ProjMatrix, target: PrimePower) -> Result<ProjMatrix> {
    m.reduce_to(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::{enumerate_generators, Quaternion, Splitting};
    use proptest::prelude::*;

    fn pp(p: u64, k: u32) -> PrimePower {
        PrimePower::new(p, k).unwrap()
    }

    fn pm(e: [i128; 4], ring: PrimePower) -> ProjMatrix {
        proj_normalize(&ResidueMatrix::new(e, ring).unwrap()).unwrap()
    }

    fn random_matrix(ring: PrimePower, seed: [u64; 4]) -> Option<ProjMatrix> {
        let m = ResidueMatrix::from_entries_unchecked(seed.map(|x| x % ring.modulus()), ring);
        proj_normalize(&m).ok()
    }

    #[test]
    fn normalize_examples() {
        let r = pp(13, 1);
        assert_eq!(unit_check(11, r), 6);
        let m = pm([11, 0, 0, 4], r);
        assert_eq!(m.entries(), [1, 0, 0, 11]);
        assert_eq!(pm([1, 0, 0, 1], r), ProjMatrix::identity(r));
        let a = ResidueMatrix::new([3, 5, 7, 2], r).unwrap();
        assert_eq!(proj_normalize(&a).unwrap(), proj_normalize(&a.scale(2)).unwrap());
        assert!(matches!(
            proj_normalize(&ResidueMatrix::from_entries_unchecked([1, 2, 2, 4], r)),
            Err(Error::SingularMatrix(13))
        ));
        // leading non-unit entry is skipped mod 169
        let m = pm([13, 1, 1, 0], pp(13, 2));
        assert_eq!(m.entries(), [13, 1, 1, 0]);
    }

    fn unit_check(a: u64, r: PrimePower) -> u64 {
        modarith::unit_inverse(a, &r).unwrap()
    }

    #[test]
    fn psl_membership() {
        let r = pp(29, 1);
        assert!(is_psl(&ProjMatrix::identity(r)));
        let s = enumerate_generators(5).unwrap();
        let sp29 = Splitting::new(r).unwrap();
        let sp13 = Splitting::new(pp(13, 1)).unwrap();
        for g in s.generators() {
            assert!(is_psl(&proj_normalize(&sp29.split(g)).unwrap()));
            assert!(!is_psl(&proj_normalize(&sp13.split(g)).unwrap()));
        }
    }

    #[test]
    fn mobius_examples() {
        let r = pp(13, 1);
        let id = ProjMatrix::identity(r);
        for pt in enumerate_p1(r) {
            assert_eq!(mobius(&id, &pt), pt);
        }
        let d = pm([11, 0, 0, 4], r);
        assert_eq!(mobius(&d, &ProjPoint::zero(r)), ProjPoint::zero(r));
        assert_eq!(mobius(&d, &ProjPoint::infinity(r)), ProjPoint::infinity(r));
        let t = pm([1, 1, 0, 1], r);
        for a in 0..13 {
            assert_eq!(
                mobius(&t, &ProjPoint::new(a, 1, r).unwrap()),
                ProjPoint::new(a + 1, 1, r).unwrap()
            );
        }
    }

    #[test]
    fn p1_counts() {
        assert_eq!(enumerate_p1(pp(13, 1)).len(), 14);
        assert_eq!(enumerate_p1(pp(13, 2)).len(), 182);
        assert_eq!(enumerate_p1(pp(5, 1)).len(), 6);
        for (q, k) in [(5u64, 1u32), (5, 2), (5, 3), (13, 1), (13, 2), (29, 1)] {
            let pts = enumerate_p1(pp(q, k));
            assert_eq!(pts.len() as u64, q.pow(k - 1) * (q + 1));
            // brute force: canonical forms of all unimodular pairs
            let m = q.pow(k);
            let mut seen = std::collections::BTreeSet::new();
            for x in 0..m {
                for y in 0..m {
                    if let Ok(pt) = ProjPoint::new(x as i128, y as i128, pp(q, k)) {
                        seen.insert(pt);
                    }
                }
            }
            let mut sorted = pts.clone();
            sorted.sort();
            assert_eq!(sorted, seen.into_iter().collect::<Vec<_>>());
        }
    }

    #[test]
    fn coset_key_examples() {
        let r = pp(13, 1);
        assert_eq!(coset_key(&ProjMatrix::identity(r)), PairCoset::base(r));
        assert_eq!(coset_key(&pm([3, 0, 0, 7], r)), PairCoset::base(r));
        let key = coset_key(&pm([1, 1, 0, 1], r));
        assert_eq!(key.zero, ProjPoint::new(-1, 1, r).unwrap());
        assert_eq!(key.infinity, ProjPoint::infinity(r));
    }

    #[test]
    fn inverse_examples() {
        let r = pp(13, 1);
        assert_eq!(matrix_inverse(&ProjMatrix::identity(r)), ProjMatrix::identity(r));
        assert_eq!(matrix_inverse(&pm([1, 0, 0, 11], r)).entries(), [1, 0, 0, 6]);
        assert_eq!(matrix_inverse(&pm([1, 1, 0, 1], r)), pm([1, -1, 0, 1], r));
    }

    #[test]
    fn reduce_examples() {
        let (r13, r169) = (pp(13, 1), pp(13, 2));
        assert_eq!(
            reduce_level(&ProjMatrix::identity(r169), r13).unwrap(),
            ProjMatrix::identity(r13)
        );
        assert_eq!(reduce_level(&pm([1, 0, 0, 70], r169), r13).unwrap().entries(), [1, 0, 0, 5]);
        let (sp1, sp2) = (Splitting::new(r13).unwrap(), Splitting::new(r169).unwrap());
        for g in enumerate_generators(5).unwrap().generators() {
            let hi = proj_normalize(&sp2.split(g)).unwrap();
            let lo = proj_normalize(&sp1.split(g)).unwrap();
            assert_eq!(reduce_level(&hi, r13).unwrap(), lo);
        }
        assert!(reduce_level(&ProjMatrix::identity(r13), r169).is_err());
        assert!(reduce_level(&ProjMatrix::identity(r13), pp(5, 1)).is_err());
    }

    #[test]
    fn pair_coset_validation() {
        let r = pp(13, 2);
        let a = ProjPoint::new(1, 1, r).unwrap();
        let b = ProjPoint::new(14, 1, r).unwrap();
        assert!(PairCoset::new(a, b).is_err());
        assert!(PairCoset::new(a, ProjPoint::new(2, 1, r).unwrap()).is_ok());
        assert!(ProjPoint::new(13, 26, r).is_err());
    }

    #[test]
    fn split_of_gamma_is_diagonal() {
        let sp = Splitting::new(pp(13, 3)).unwrap();
        let m = proj_normalize(&sp.split(&Quaternion::new(1, 2, 0, 0))).unwrap();
        assert!(m.is_diagonal());
    }

    fn ring_strategy() -> impl Strategy<Value = PrimePower> {
        prop::sample::select(vec![(5u64, 1u32), (5, 2), (5, 3), (13, 1), (13, 2), (29, 1)])
            .prop_map(|(p, k)| pp(p, k))
    }

    proptest! {
        #[test]
        fn mobius_is_a_group_action(ring in ring_strategy(), a in any::<[u64; 4]>(), b in any::<[u64; 4]>(), x in any::<u64>(), y in any::<u64>()) {
            let (Some(m1), Some(m2)) = (random_matrix(ring, a), random_matrix(ring, b)) else { return Ok(()); };
            let Some(pt) = ProjPoint::from_residues(x % ring.modulus(), y % ring.modulus(), ring) else { return Ok(()); };
            prop_assert_eq!(mobius(&m1.mul(&m2), &pt), mobius(&m1, &mobius(&m2, &pt)));
        }

        #[test]
        fn inverse_is_inverse(ring in ring_strategy(), a in any::<[u64; 4]>()) {
            let Some(m) = random_matrix(ring, a) else { return Ok(()); };
            prop_assert_eq!(m.mul(&matrix_inverse(&m)), ProjMatrix::identity(ring));
        }

        #[test]
        fn reduction_is_a_homomorphism(a in any::<[u64; 4]>(), b in any::<[u64; 4]>()) {
            let (hi, lo) = (pp(5, 3), pp(5, 1));
            let (Some(m1), Some(m2)) = (random_matrix(hi, a), random_matrix(hi, b)) else { return Ok(()); };
            prop_assert_eq!(
                reduce_level(&m1.mul(&m2), lo).unwrap(),
                reduce_level(&m1, lo).unwrap().mul(&reduce_level(&m2, lo).unwrap())
            );
            let mid = pp(5, 2);
            prop_assert_eq!(
                reduce_level(&reduce_level(&m1, mid).unwrap(), lo).unwrap(),
                reduce_level(&m1, lo).unwrap()
            );
        }
    }

    #[test]
    fn coset_key_is_constant_on_cosets_and_separates_them() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for ring in [pp(13, 1), pp(13, 2), pp(5, 3)] {
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| loop {
                let e: [u64; 4] = rng.random();
                if let Some(m) = random_matrix(ring, e) {
                    return m;
                }
            };
            let mats: Vec<ProjMatrix> = (0..100).map(|_| draw(&mut rng)).collect();
            for m in &mats {
                for _ in 0..100 {
                    let (u, v) = (rng.random_range(1..ring.modulus()), rng.random_range(1..ring.modulus()));
                    if !ring.is_unit(u) || !ring.is_unit(v) {
                        continue;
                    }
                    let d = pm([u as i128, 0, 0, v as i128], ring);
                    assert_eq!(coset_key(&d.mul(m)), coset_key(m));
                }
            }
            // separation: keys agree exactly when m'·m⁻¹ is diagonal
            let mut distinct_pairs = 0;
            for (i, a) in mats.iter().enumerate() {
                for b in &mats[i + 1..] {
                    let same_coset = b.mul(&a.inverse()).is_diagonal();
                    assert_eq!(coset_key(a) == coset_key(b), same_coset);
                    if !same_coset {
                        distinct_pairs += 1;
                    }
                }
            }
            assert!(distinct_pairs >= 100);
        }
    }
}
