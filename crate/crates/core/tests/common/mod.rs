//! Independent oracles and the property suite, shared by the integration
//! tests here and by the acceptance harness in the cli crate.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use expander_forge::modarith::{self, PrimePower};
use expander_forge::multigraph::{Girth, SerreGraph};
use expander_forge::projgroup::{coset_key, mobius, proj_normalize, ProjMatrix, ProjPoint, ResidueMatrix};
use expander_forge::quat::{Quaternion, Splitting};
use expander_forge::spectra::{ramanujan_check, EigenMethod};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

/// Shortest closed non-backtracking walk, by exhaustive search up to `max_len`.
pub fn brute_force_girth(g: &SerreGraph, max_len: usize) -> Girth {
    fn walk(g: &SerreGraph, start: usize, at: usize, prev: Option<usize>, len: usize, limit: usize) -> bool {
        if len == limit {
            return at == start;
        }
        g.link(at).iter().any(|&e| {
            prev.is_none_or(|p| g.edge(p).inverse != e) && walk(g, start, g.edge(e).terminus, Some(e), len + 1, limit)
        })
    }
    (1..=max_len)
        .find(|&l| (0..g.vertex_count()).any(|v| walk(g, v, v, None, 0, l)))
        .map_or(Girth::Infinite, Girth::Finite)
}

// Arithmetic mod a small prime, written out longhand for the oracle.
type M2 = [u64; 4];

fn mat_mul(a: &M2, b: &M2, p: u64) -> M2 {
    [
        (a[0] * b[0] + a[1] * b[2]) % p,
        (a[0] * b[1] + a[1] * b[3]) % p,
        (a[2] * b[0] + a[3] * b[2]) % p,
        (a[2] * b[1] + a[3] * b[3]) % p,
    ]
}

fn normalize(m: &M2, p: u64) -> M2 {
    let lead = *m.iter().find(|&&x| x != 0).expect("nonzero matrix");
    let inv = (1..p).find(|&u| lead * u % p == 1).unwrap();
    m.map(|x| x * inv % p)
}

/// All elements of `PGL2(F_p)`, normalized so the first nonzero entry is 1.
pub fn pgl2_elements(p: u64) -> Vec<M2> {
    let mut out = BTreeSet::new();
    for a in 0..p {
        for b in 0..p {
            for c in 0..p {
                for d in 0..p {
                    if !(a * d + p * p - b * c).is_multiple_of(p) {
                        out.insert(normalize(&[a, b, c, d], p));
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Norm-`q1` quaternions with `x0 > 0` odd and the rest even, in
/// lexicographic order, found by exhaustive search.
pub fn brute_generators(q1: i64) -> Vec<[i64; 4]> {
    let r = (q1 as f64).sqrt() as i64 + 1;
    let mut out = Vec::new();
    for x0 in -r..=r {
        for x1 in -r..=r {
            for x2 in -r..=r {
                for x3 in -r..=r {
                    let ok = x0 > 0 && x0 % 2 == 1 && [x1, x2, x3].iter().all(|x| x % 2 == 0);
                    if ok && x0 * x0 + x1 * x1 + x2 * x2 + x3 * x3 == q1 {
                        out.push([x0, x1, x2, x3]);
                    }
                }
            }
        }
    }
    out
}

fn split_mod_p(x: &[i64; 4], iota: i64, p: i64) -> M2 {
    let m = |v: i64| v.rem_euclid(p) as u64;
    [
        m(x[0] + x[1] * iota),
        m(x[2] + x[3] * iota),
        m(-x[2] + x[3] * iota),
        m(x[0] - x[1] * iota),
    ]
}

/// The Cartan Schreier graph of `PGL2(F_p)` built from the definition:
/// vertices are the right cosets `A·m` of the projective diagonal group,
/// and generator `s` joins `A·m` to `A·m·S(s)`. Returns the cosets and,
/// per coset, the target coset index for each generator.
pub fn cartan_coset_oracle(q1: u64, p: u64) -> (Vec<BTreeSet<M2>>, Vec<Vec<usize>>) {
    let iota = (1..p).find(|&i| (i * i + 1) % p == 0).unwrap() as i64;
    let gens: Vec<M2> = brute_generators(q1 as i64)
        .iter()
        .map(|x| normalize(&split_mod_p(x, iota, p as i64), p))
        .collect();
    let diag: Vec<M2> = pgl2_elements(p).into_iter().filter(|m| m[1] == 0 && m[2] == 0).collect();
    let mut coset_of: BTreeMap<M2, usize> = BTreeMap::new();
    let mut cosets: Vec<BTreeSet<M2>> = Vec::new();
    for m in pgl2_elements(p) {
        if coset_of.contains_key(&m) {
            continue;
        }
        let c: BTreeSet<M2> = diag.iter().map(|a| normalize(&mat_mul(a, &m, p), p)).collect();
        for x in &c {
            coset_of.insert(*x, cosets.len());
        }
        cosets.push(c);
    }
    let next = cosets
        .iter()
        .map(|c| {
            let rep = c.iter().next().unwrap();
            gens.iter().map(|s| coset_of[&normalize(&mat_mul(rep, s, p), p)]).collect()
        })
        .collect();
    (cosets, next)
}

/// Finds the vertex bijection `oracle → g` sending `oracle_root` to `g_root`
/// that respects generator labels, or explains why none exists.
pub fn label_isomorphism(next: &[Vec<usize>], oracle_root: usize, g: &SerreGraph, g_root: usize) -> Result<Vec<usize>, String> {
    if next.len() != g.vertex_count() {
        return Err(format!("{} oracle vertices vs {}", next.len(), g.vertex_count()));
    }
    let step = |v: usize, s: usize| -> Option<usize> {
        g.link(v).iter().map(|&e| g.edge(e)).find(|e| e.label == s).map(|e| e.terminus)
    };
    let mut map = vec![usize::MAX; next.len()];
    let mut used = vec![false; next.len()];
    map[oracle_root] = g_root;
    used[g_root] = true;
    let mut queue = VecDeque::from([oracle_root]);
    while let Some(u) = queue.pop_front() {
        for (s, &ou) in next[u].iter().enumerate() {
            let gu = step(map[u], s).ok_or(format!("no label {s} at {}", map[u]))?;
            if map[ou] == usize::MAX {
                if used[gu] {
                    return Err(format!("vertex {gu} hit twice"));
                }
                map[ou] = gu;
                used[gu] = true;
                queue.push_back(ou);
            } else if map[ou] != gu {
                return Err(format!("label {s} from oracle vertex {u} disagrees"));
            }
        }
    }
    if map.contains(&usize::MAX) {
        return Err("oracle graph is disconnected".into());
    }
    Ok(map)
}

/// A named property, runnable under any proptest runner.
pub type Property = fn(&mut TestRunner) -> Result<(), String>;

fn run<S: Strategy>(
    runner: &mut TestRunner,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

const SMALL_PRIMES: [u64; 10] = [3, 5, 7, 11, 13, 17, 29, 101, 1009, 65_537];
const SPLIT_PRIMES: [u64; 4] = [5, 13, 17, 29];

fn prime() -> impl Strategy<Value = u64> {
    prop::sample::select(&SMALL_PRIMES[..])
}

fn ring() -> impl Strategy<Value = PrimePower> {
    (prop::sample::select(&SPLIT_PRIMES[..]), 1u32..=3).prop_map(|(p, k)| PrimePower::new(p, k).unwrap())
}

fn quaternion() -> impl Strategy<Value = Quaternion> {
    prop::array::uniform4(-50i128..=50).prop_map(|[a, b, c, d]| Quaternion::new(a, b, c, d))
}

fn matrix_in(pp: PrimePower) -> impl Strategy<Value = ProjMatrix> {
    let m = pp.modulus() as i128;
    prop::array::uniform4(0..m).prop_filter_map("singular", move |e| {
        ResidueMatrix::new(e, pp).ok().and_then(|r| proj_normalize(&r).ok())
    })
}

fn point_in(pp: PrimePower) -> impl Strategy<Value = ProjPoint> {
    let m = pp.modulus() as i128;
    (0..m, 0..m).prop_filter_map("not primitive", move |(x, y)| ProjPoint::new(x, y, pp).ok())
}

pub fn legendre_multiplicative(r: &mut TestRunner) -> Result<(), String> {
    run(r, (prime(), any::<i64>(), any::<i64>()), |(p, a, b)| {
        let (a, b) = (a as i128, b as i128);
        let lhs = modarith::legendre(a * b, p).unwrap();
        let rhs = modarith::legendre(a, p).unwrap() * modarith::legendre(b, p).unwrap();
        prop_assert_eq!(lhs, rhs);
        Ok(())
    })
}

pub fn sqrt_and_lift(r: &mut TestRunner) -> Result<(), String> {
    run(r, (prime(), 1u64..1_000_000, 1u32..=4), |(p, x, k)| {
        let x = x % p;
        prop_assume!(x != 0);
        let a = (x * x % p) as i128;
        let root = modarith::sqrt_mod_prime(a, p).unwrap();
        prop_assert_eq!(root * root % p, a as u64);
        prop_assert!(root <= p - root);
        let Ok(pp) = PrimePower::new(p, k) else { return Ok(()) };
        let lifted = modarith::hensel_lift_sqrt(root, a, &pp).unwrap();
        prop_assert_eq!(pp.mul(lifted, lifted), pp.reduce(a));
        prop_assert_eq!(lifted % p, root);
        Ok(())
    })
}

pub fn split_multiplicative(r: &mut TestRunner) -> Result<(), String> {
    run(r, (ring(), quaternion(), quaternion()), |(pp, x, y)| {
        let sp = Splitting::new(pp).unwrap();
        prop_assert_eq!(sp.split(&(x * y)), sp.split(&x).mul(&sp.split(&y)));
        prop_assert_eq!(sp.split(&x).det(), pp.reduce(x.norm()));
        Ok(())
    })
}

pub fn mobius_action(r: &mut TestRunner) -> Result<(), String> {
    let s = ring().prop_flat_map(|pp| (matrix_in(pp), matrix_in(pp), point_in(pp)));
    run(r, s, |(a, b, x)| {
        prop_assert_eq!(mobius(&a.mul(&b), &x), mobius(&a, &mobius(&b, &x)));
        prop_assert_eq!(mobius(&ProjMatrix::identity(x.ring()), &x), x);
        Ok(())
    })
}

pub fn coset_key_sound_and_complete(r: &mut TestRunner) -> Result<(), String> {
    let s = ring().prop_flat_map(|pp| {
        let m = pp.modulus();
        (matrix_in(pp), matrix_in(pp), 1..m, 1..m)
    });
    run(r, s, |(a, b, x, y)| {
        let pp = a.ring();
        prop_assume!(pp.is_unit(x) && pp.is_unit(y));
        let d = proj_normalize(&ResidueMatrix::new([x as i128, 0, 0, y as i128], pp).unwrap()).unwrap();
        prop_assert_eq!(coset_key(&d.mul(&a)), coset_key(&a));
        let same = coset_key(&a) == coset_key(&b);
        prop_assert_eq!(same, a.mul(&b.inverse()).is_diagonal());
        Ok(())
    })
}

fn multigraph() -> impl Strategy<Value = SerreGraph> {
    (1usize..=12).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n), 0..=16)
            .prop_map(move |es| {
                let geo: Vec<_> = es.into_iter().enumerate().map(|(i, (u, v))| (u, v, i)).collect();
                SerreGraph::from_geometric_edges(n, &geo).unwrap()
            })
    })
}

pub fn involution_axioms(r: &mut TestRunner) -> Result<(), String> {
    run(r, multigraph(), |g| {
        for (id, e) in g.edges().iter().enumerate() {
            let inv = g.edge(e.inverse);
            prop_assert_ne!(e.inverse, id);
            prop_assert_eq!(inv.inverse, id);
            prop_assert_eq!(inv.origin, e.terminus);
            prop_assert_eq!(inv.terminus, e.origin);
        }
        Ok(())
    })
}

pub fn girth_matches_brute_force(r: &mut TestRunner) -> Result<(), String> {
    run(r, multigraph(), |g| {
        prop_assert_eq!(g.girth(), brute_force_girth(&g, g.vertex_count()));
        Ok(())
    })
}

// 2k-regular Schreier graph of k random permutations.
fn permutation_graph() -> impl Strategy<Value = SerreGraph> {
    (20usize..=120, 1usize..=3).prop_flat_map(|(n, k)| {
        prop::collection::vec(Just((0..n).collect::<Vec<_>>()).prop_shuffle(), k).prop_map(move |perms| {
            let geo: Vec<_> = perms
                .iter()
                .enumerate()
                .flat_map(|(j, p)| p.iter().enumerate().map(move |(v, &w)| (v, w, j)))
                .collect();
            SerreGraph::from_geometric_edges(n, &geo).unwrap()
        })
    })
}

pub fn dense_matches_iterative(r: &mut TestRunner) -> Result<(), String> {
    run(r, permutation_graph(), |g| {
        prop_assume!(g.connected());
        let q = g.regular_degree().unwrap() as u64 - 1;
        let d = ramanujan_check(&g, q, EigenMethod::Dense).unwrap();
        let i = ramanujan_check(&g, q, EigenMethod::Iterative).unwrap();
        prop_assert!((d.max_abs_nontrivial - i.max_abs_nontrivial).abs() <= 1e-8);
        prop_assert!((d.lambda_top - i.lambda_top).abs() <= 1e-8);
        prop_assert!((d.lambda_bottom - i.lambda_bottom).abs() <= 1e-8);
        prop_assert_eq!(d.bipartite, i.bipartite);
        Ok(())
    })
}

pub const SUITE: &[(&str, Property)] = &[
    ("legendre multiplicativity", legendre_multiplicative),
    ("sqrt and Hensel lift", sqrt_and_lift),
    ("split multiplicativity", split_multiplicative),
    ("Möbius action axiom", mobius_action),
    ("coset key soundness and completeness", coset_key_sound_and_complete),
    ("Serre involution axioms", involution_axioms),
    ("girth against brute force", girth_matches_brute_force),
    ("dense against iterative spectra", dense_matches_iterative),
];

pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}
