//! Towers of Schreier graphs `X(L(n), A(n), S(n))` over `PGL2(Z/q2^n)` or
//! `PSL2(Z/q2^n)`, with the generators `S(n)` coming from norm-`q1`
//! quaternions.
//!
//! Three vertex models are supported:
//!
//! * `cartan`: right cosets of the diagonal group, keyed by ordered point
//!   pairs; a generator `s` moves a key `k` to `s⁻¹·k`.
//! * `borel`: right cosets of the upper-triangular group, i.e. points of
//!   `P¹(Z/q2^n)`; base point `(1:0)`.
//! * `cayley`: group elements, right multiplication by `s`.
//!
//! Vertices are numbered in BFS discovery order from the base vertex and
//! the directed edge `(v, s)` has id `v·(q1+1) + s`, so every build is
//! reproducible. Its inverse is `(v·s, s̄)`.

use std::collections::HashMap;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modarith::{self, PrimePower};
use crate::multigraph::{is_covering, CoveringVerdict, Edge, Girth, GraphMorphism, SerreGraph};
use crate::projgroup::{is_psl, proj_normalize, PairCoset, ProjMatrix, ProjPoint, ResidueMatrix};
use crate::quat::{enumerate_generators, evaluate_word, FreeWord, GeneratorSet, Quaternion, Splitting};
use crate::spectra::{ramanujan_check_with, EigenMethod, LanczosOptions, SpectralReport};

/// Longest words the intersection probe will enumerate by default.
pub const DEFAULT_PROBE_CAP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Cartan,
    Borel,
    Cayley,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Cartan => "cartan",
            Variant::Borel => "borel",
            Variant::Cayley => "cayley",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cartan" => Ok(Variant::Cartan),
            "borel" => Ok(Variant::Borel),
            "cayley" => Ok(Variant::Cayley),
            other => Err(Error::InvalidParameter(format!("unknown variant {other:?}"))),
        }
    }
}

/// Which group `L(n)` the generators land in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Psl,
    Pgl,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Psl => "psl",
            Mode::Pgl => "pgl",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psl" => Ok(Mode::Psl),
            "pgl" => Ok(Mode::Pgl),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TowerConfig {
    pub q1: u64,
    pub q2: u64,
    pub levels: u32,
    pub variant: Variant,
    pub twist_seed: Option<u64>,
}

impl TowerConfig {
    pub fn new(q1: u64, q2: u64, levels: u32, variant: Variant, twist_seed: Option<u64>) -> Result<Self> {
        let cfg = Self { q1, q2, levels, variant, twist_seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, q) in [("q1", self.q1), ("q2", self.q2)] {
            if !modarith::is_prime(q) || q % 4 != 1 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be a prime ≡ 1 (mod 4), got {q}"
                )));
            }
        }
        if self.q1 == self.q2 {
            return Err(Error::InvalidParameter("q1 and q2 must be distinct".into()));
        }
        if self.levels == 0 {
            return Err(Error::InvalidParameter("a tower needs at least one level".into()));
        }
        if self.twist_seed.is_some() && self.variant != Variant::Cartan {
            return Err(Error::InvalidParameter("twisting is only defined for the cartan variant".into()));
        }
        Ok(())
    }

    /// `PSL` exactly when `q1` is a square modulo `q2`.
    pub fn mode(&self) -> Mode {
        match modarith::legendre(self.q1 as i128, self.q2) {
            Ok(1) => Mode::Psl,
            _ => Mode::Pgl,
        }
    }

    pub fn ring(&self, n: u32) -> Result<PrimePower> {
        PrimePower::new(self.q2, n)
    }

    /// Expected vertex count of level `n`, from the group orders.
    pub fn expected_vertices(&self, n: u32) -> u64 {
        let q = self.q2;
        let pgl_order = q.pow(3 * n - 2) * (q * q - 1);
        match self.variant {
            Variant::Cartan => q.pow(2 * n - 1) * (q + 1),
            Variant::Borel => q.pow(n - 1) * (q + 1),
            Variant::Cayley => match self.mode() {
                Mode::Pgl => pgl_order,
                Mode::Psl => pgl_order / 2,
            },
        }
    }
}

/// Images of the generators at one level.
#[derive(Debug, Clone)]
pub struct LevelGenerators {
    pub ring: PrimePower,
    pub quaternions: GeneratorSet,
    /// `S(n)`, indexed like the quaternion generators.
    pub matrices: Vec<ProjMatrix>,
    /// `s⁻¹` for each generator: the action on coset keys.
    pub inverses: Vec<ProjMatrix>,
}

impl LevelGenerators {
    pub fn new(q1: u64, ring: PrimePower) -> Result<Self> {
        let quaternions = enumerate_generators(q1)?;
        let splitting = Splitting::new(ring)?;
        let matrices = quaternions
            .generators()
            .iter()
            .map(|g| proj_normalize(&splitting.split(g)))
            .collect::<Result<Vec<_>>>()?;
        let inverses = matrices.iter().map(ProjMatrix::inverse).collect();
        if let Some(i) = (0..quaternions.len()).find(|&i| quaternions.inverse_of(i) == i) {
            return Err(Error::InvolutionFixedPoint(i));
        }
        Ok(Self { ring, quaternions, matrices, inverses })
    }

    pub fn degree(&self) -> usize {
        self.matrices.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VertexKeys {
    Pairs(Vec<PairCoset>),
    Points(Vec<ProjPoint>),
    Elements(Vec<ProjMatrix>),
}

impl VertexKeys {
    pub fn len(&self) -> usize {
        match self {
            VertexKeys::Pairs(v) => v.len(),
            VertexKeys::Points(v) => v.len(),
            VertexKeys::Elements(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct TowerLevel {
    pub n: u32,
    pub variant: Variant,
    pub mode: Mode,
    pub generators: LevelGenerators,
    pub keys: VertexKeys,
    pub graph: SerreGraph,
    /// Twisting matrix `g(n)` when the level was built relative to `g(n)·base`.
    pub twist: Option<ProjMatrix>,
}

impl TowerLevel {
    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn ring(&self) -> PrimePower {
        self.generators.ring
    }

    /// Vertex whose key is the untwisted base (`((0:1),(1:0))`, `(1:0)` or
    /// the identity).
    pub fn standard_base_vertex(&self) -> Option<usize> {
        let ring = self.ring();
        match &self.keys {
            VertexKeys::Pairs(k) => k.iter().position(|&p| p == PairCoset::base(ring)),
            VertexKeys::Points(k) => k.iter().position(|&p| p == ProjPoint::infinity(ring)),
            VertexKeys::Elements(k) => k.iter().position(|&m| m == ProjMatrix::identity(ring)),
        }
    }

    pub fn all_generators_psl(&self) -> bool {
        self.generators.matrices.iter().all(is_psl)
    }
}

// BFS closure of `base` under `step`; returns keys in discovery order and
// the Serre graph with edge (v, i) at id v·d + i.
fn schreier_closure<K, F>(base: K, gens: &LevelGenerators, step: F) -> Result<(Vec<K>, SerreGraph)>
where
    K: Copy + Eq + Hash,
    F: Fn(&K, usize) -> K,
{
    let d = gens.degree();
    let mut keys = vec![base];
    let mut index: HashMap<K, usize> = HashMap::from([(base, 0)]);
    let mut termini = Vec::new();
    let mut head = 0;
    while head < keys.len() {
        let here = keys[head];
        for i in 0..d {
            let next = step(&here, i);
            let id = *index.entry(next).or_insert_with(|| {
                keys.push(next);
                keys.len() - 1
            });
            termini.push(id);
        }
        head += 1;
    }
    let inv = gens.quaternions.inverse_pairing();
    let edges = termini
        .iter()
        .enumerate()
        .map(|(id, &t)| Edge {
            origin: id / d,
            terminus: t,
            label: id % d,
            inverse: t * d + inv[id % d],
        })
        .collect();
    let graph = SerreGraph::new(keys.len(), edges)?;
    Ok((keys, graph))
}

pub fn build_level(cfg: &TowerConfig, n: u32) -> Result<TowerLevel> {
    let twist = match cfg.twist_seed {
        Some(seed) => Some(select_twist(cfg, seed)?.sequence),
        None => None,
    };
    build_level_with(cfg, n, twist.as_ref())
}

/// Builds level `n`, relative to the twisted base pair when `twist` is given.
pub fn build_level_with(cfg: &TowerConfig, n: u32, twist: Option<&TwistSequence>) -> Result<TowerLevel> {
    cfg.validate()?;
    if n == 0 || n > cfg.levels {
        return Err(Error::InvalidParameter(format!("level {n} outside 1..={}", cfg.levels)));
    }
    let ring = cfg.ring(n)?;
    let gens = LevelGenerators::new(cfg.q1, ring)?;
    let twist_matrix = match twist {
        Some(t) if cfg.variant == Variant::Cartan => Some(t.at(n)?),
        Some(_) => return Err(Error::InvalidParameter("twisting is only defined for the cartan variant".into())),
        None => None,
    };
    let (keys, graph) = match cfg.variant {
        Variant::Cartan => {
            let base = PairCoset::base(ring);
            let base = twist_matrix.map_or(base, |g| base.act(&g));
            let (k, g) = schreier_closure(base, &gens, |key, i| key.act(&gens.inverses[i]))?;
            (VertexKeys::Pairs(k), g)
        }
        Variant::Borel => {
            let (k, g) = schreier_closure(ProjPoint::infinity(ring), &gens, |pt, i| {
                crate::projgroup::mobius(&gens.inverses[i], pt)
            })?;
            (VertexKeys::Points(k), g)
        }
        Variant::Cayley => {
            let (k, g) = schreier_closure(ProjMatrix::identity(ring), &gens, |m, i| m.mul(&gens.matrices[i]))?;
            (VertexKeys::Elements(k), g)
        }
    };
    Ok(TowerLevel {
        n,
        variant: cfg.variant,
        mode: cfg.mode(),
        generators: gens,
        keys,
        graph,
        twist: twist_matrix,
    })
}

/// `γ = a₁ + b₁i` and `δ = a₂ + b₂i` with `aᵢ² + bᵢ² = qᵢ`, `aᵢ` odd
/// positive and `bᵢ` even positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TorusPair {
    pub gamma: Quaternion,
    pub delta: Quaternion,
}

/// Decomposes a prime `q ≡ 1 (mod 4)` as `a² + b²`, `a` odd, `b` even, both positive.
pub fn two_squares(q: u64) -> Result<(u64, u64)> {
    if !modarith::is_prime(q) || q % 4 != 1 {
        return Err(Error::InvalidParameter(format!("{q} is not a prime ≡ 1 (mod 4)")));
    }
    (1..)
        .step_by(2)
        .take_while(|a| a * a < q)
        .find_map(|a| {
            let rest = q - a * a;
            let b = (rest as f64).sqrt().round() as u64;
            (b * b == rest).then_some((a, b))
        })
        .ok_or_else(|| Error::InvalidParameter(format!("{q} is not a sum of two squares")))
}

pub fn find_torus_pair(q1: u64, q2: u64) -> Result<TorusPair> {
    let (a1, b1) = two_squares(q1)?;
    let (a2, b2) = two_squares(q2)?;
    Ok(TorusPair {
        gamma: Quaternion::new(a1 as i128, b1 as i128, 0, 0),
        delta: Quaternion::new(a2 as i128, b2 as i128, 0, 0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LoopWitness {
    pub vertex: usize,
    pub generator: usize,
    pub edge: usize,
}

/// The loop at the base vertex carried by `γ`, whose image is diagonal and
/// so fixes the base pair (and the base point).
pub fn loop_witness(level: &TowerLevel, torus: &TorusPair) -> Result<LoopWitness> {
    if level.variant == Variant::Cayley {
        return Err(Error::InvalidInput("the cayley variant has no base loop".into()));
    }
    let gens = &level.generators;
    let generator = gens
        .quaternions
        .index_of(&torus.gamma)
        .ok_or_else(|| Error::InvalidInput(format!("{} is not a generator", torus.gamma)))?;
    if !gens.matrices[generator].is_diagonal() {
        return Err(Error::InvalidInput(format!("image of {} is not diagonal", torus.gamma)));
    }
    let vertex = level
        .standard_base_vertex()
        .ok_or_else(|| Error::InvalidInput("base vertex missing from level".into()))?;
    let edge = vertex * gens.degree() + generator;
    let e = level.graph.edge(edge);
    if e.origin != vertex || e.terminus != vertex || e.label != generator {
        return Err(Error::InvalidInput(format!("edge {edge} is not a loop at {vertex}")));
    }
    Ok(LoopWitness { vertex, generator, edge })
}

/// Compatible twisting matrices `g(1), …, g(N)`: `g(n+1)` reduces to `g(n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwistSequence {
    pub seed: u64,
    pub matrices: Vec<ProjMatrix>,
}

impl TwistSequence {
    pub fn at(&self, n: u32) -> Result<ProjMatrix> {
        self.matrices
            .get((n as usize).wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("twist sequence has no level {n}")))
    }

    /// Identity at every level; reproduces the untwisted tower.
    pub fn identity(cfg: &TowerConfig) -> Result<Self> {
        let matrices = (1..=cfg.levels)
            .map(|n| Ok(ProjMatrix::identity(cfg.ring(n)?)))
            .collect::<Result<_>>()?;
        Ok(Self { seed: 0, matrices })
    }
}

/// `g(1)` uniform in `L(1)`, then each `g(n+1)` uniform among the `q2³`
/// lifts of `g(n)`.
pub fn twist_sequence(cfg: &TowerConfig, seed: u64) -> Result<TwistSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r1 = cfg.ring(1)?;
    let q = cfg.q2;
    let first = loop {
        let e: [i128; 4] = std::array::from_fn(|_| rng.random_range(0..q) as i128);
        let Ok(m) = ResidueMatrix::new(e, r1) else { continue };
        let m = proj_normalize(&m)?;
        if cfg.mode() == Mode::Pgl || is_psl(&m) {
            break m;
        }
    };
    let mut matrices = vec![first];
    for n in 2..=cfg.levels {
        let prev = *matrices.last().unwrap();
        let lower = prev.ring().modulus() as i128;
        let lifted: [i128; 4] = std::array::from_fn(|i| {
            prev.entries()[i] as i128 + lower * rng.random_range(0..q) as i128
        });
        matrices.push(proj_normalize(&ResidueMatrix::new(lifted, cfg.ring(n)?)?)?);
    }
    Ok(TwistSequence { seed, matrices })
}

/// A twist sequence whose `g(1)` does not keep `γ` in the twisted Cartan
/// group, together with the seeds rejected on the way.
#[derive(Debug, Clone)]
pub struct SelectedTwist {
    pub requested_seed: u64,
    pub rejected_seeds: Vec<u64>,
    pub sequence: TwistSequence,
}

pub fn select_twist(cfg: &TowerConfig, seed: u64) -> Result<SelectedTwist> {
    let torus = find_torus_pair(cfg.q1, cfg.q2)?;
    let sp = Splitting::new(cfg.ring(1)?)?;
    let gamma = proj_normalize(&sp.split(&torus.gamma))?;
    let mut rejected = Vec::new();
    for candidate in seed..seed.saturating_add(1000) {
        let seq = twist_sequence(cfg, candidate)?;
        let g = seq.matrices[0];
        if !g.inverse().mul(&gamma).mul(&g).is_diagonal() {
            return Ok(SelectedTwist { requested_seed: seed, rejected_seeds: rejected, sequence: seq });
        }
        rejected.push(candidate);
    }
    Err(Error::InvalidParameter(format!("no non-degenerate twist found from seed {seed}")))
}

/// A verified covering between two levels of the same tower.
#[derive(Debug, Clone)]
pub struct CoveringMap {
    pub source_level: u32,
    pub target_level: u32,
    pub morphism: GraphMorphism,
    pub verdict: CoveringVerdict,
}

fn reduce_keys(upper: &TowerLevel, lower: &TowerLevel) -> Result<Vec<usize>> {
    fn lookup<K>(from: &[K], to: &[K], reduce: impl Fn(&K) -> Result<K> + Sync) -> Result<Vec<usize>>
    where
        K: Copy + Eq + Hash + Send + Sync,
    {
        let index: HashMap<K, usize> = to.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        from.par_iter()
            .enumerate()
            .map(|(v, k)| {
                let r = reduce(k)?;
                index.get(&r).copied().ok_or_else(|| Error::CoveringFailed {
                    vertex: v,
                    reason: "reduced key is not a vertex of the lower level".into(),
                })
            })
            .collect()
    }
    let target = lower.ring();
    match (&upper.keys, &lower.keys) {
        (VertexKeys::Pairs(a), VertexKeys::Pairs(b)) => lookup(a, b, |k| k.reduce_to(target)),
        (VertexKeys::Points(a), VertexKeys::Points(b)) => lookup(a, b, |k| k.reduce_to(target)),
        (VertexKeys::Elements(a), VertexKeys::Elements(b)) => lookup(a, b, |k| k.reduce_to(target)),
        _ => Err(Error::InvalidInput("levels use different vertex models".into())),
    }
}

/// Reduction of vertex keys from a higher level to a lower one, with the
/// label-preserving edge map. Fails hard if the result is not a covering.
pub fn natural_covering(upper: &TowerLevel, lower: &TowerLevel) -> Result<CoveringMap> {
    if upper.n <= lower.n || upper.variant != lower.variant {
        return Err(Error::InvalidInput(format!(
            "no natural covering from level {} to level {}",
            upper.n, lower.n
        )));
    }
    let vertex_map = reduce_keys(upper, lower)?;
    let d = upper.generators.degree();
    let edge_map = (0..upper.graph.edge_count())
        .map(|id| vertex_map[id / d] * d + id % d)
        .collect();
    let morphism = GraphMorphism { vertex_map, edge_map };
    let verdict = is_covering(&upper.graph, &lower.graph, &morphism)?;
    if let Some(w) = verdict.witnesses.first() {
        return Err(Error::CoveringFailed {
            vertex: w.vertex,
            reason: format!("{:?}", w.defect),
        });
    }
    Ok(CoveringMap {
        source_level: upper.n,
        target_level: lower.n,
        morphism,
        verdict,
    })
}

/// Vertex bijection `untwisted → twisted` matching coset keys, checked to
/// carry every labeled edge to the same-labeled edge.
///
/// Both levels act on the same set of point pairs by the same rule and
/// differ only in the base vertex, so keys match one to one.
pub fn twisted_isomorphism(untwisted: &TowerLevel, twisted: &TowerLevel) -> Result<Vec<usize>> {
    let (VertexKeys::Pairs(a), VertexKeys::Pairs(b)) = (&untwisted.keys, &twisted.keys) else {
        return Err(Error::InvalidInput("twisting needs cartan levels".into()));
    };
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!("vertex counts differ: {} vs {}", a.len(), b.len())));
    }
    let index: HashMap<PairCoset, usize> = b.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let map = a
        .iter()
        .map(|k| index.get(k).copied().ok_or_else(|| Error::InvalidInput(format!("key {k} missing"))))
        .collect::<Result<Vec<_>>>()?;
    let d = untwisted.generators.degree();
    for (id, e) in untwisted.graph.edges().iter().enumerate() {
        let img = twisted.graph.edge(map[e.origin] * d + id % d);
        if img.terminus != map[e.terminus] || img.label != e.label {
            return Err(Error::InvalidInput(format!("edge {id} is not preserved")));
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, Serialize)]
pub struct SurvivingWord {
    pub word: FreeWord,
    pub quaternion: Quaternion,
    /// Image in `L(n)` for each probed level, lowest first.
    pub matrices: Vec<ProjMatrix>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub max_word_len: usize,
    pub up_to_level: u32,
    pub twist_seed: Option<u64>,
    pub words_examined: u64,
    /// Words in the level-`n` stabilizer, for `n = 1..=up_to_level`.
    pub survivors_per_level: Vec<usize>,
    /// Words in every probed stabilizer.
    pub survivors: Vec<SurvivingWord>,
    pub gamma_word: FreeWord,
    pub gamma_survives: bool,
}

/// Number of nonempty reduced words of length at most `len` over `d` letters.
pub fn reduced_word_count(d: u64, len: usize) -> u128 {
    (1..=len as u32).map(|l| d as u128 * (d as u128 - 1).pow(l - 1)).sum()
}

/// Enumerates every nonempty reduced word of length at most `max_word_len`
/// and keeps those whose image lies in the (possibly twisted) diagonal
/// stabilizer at every level up to `up_to_level`.
pub fn intersection_probe(
    cfg: &TowerConfig,
    max_word_len: usize,
    up_to_level: u32,
    twist: Option<&TwistSequence>,
) -> Result<ProbeReport> {
    intersection_probe_capped(cfg, max_word_len, up_to_level, twist, DEFAULT_PROBE_CAP)
}

pub fn intersection_probe_capped(
    cfg: &TowerConfig,
    max_word_len: usize,
    up_to_level: u32,
    twist: Option<&TwistSequence>,
    cap: usize,
) -> Result<ProbeReport> {
    cfg.validate()?;
    let d = cfg.q1 + 1;
    if max_word_len > cap {
        return Err(Error::WordCapExceeded {
            requested: max_word_len,
            cap,
            words: reduced_word_count(d, max_word_len),
        });
    }
    if up_to_level == 0 {
        return Err(Error::InvalidParameter("probe needs at least one level".into()));
    }
    let levels: Vec<LevelGenerators> = (1..=up_to_level)
        .map(|n| LevelGenerators::new(cfg.q1, cfg.ring(n)?))
        .collect::<Result<_>>()?;
    let twists: Vec<ProjMatrix> = match twist {
        Some(t) => (1..=up_to_level).map(|n| t.at(n)).collect::<Result<_>>()?,
        None => levels.iter().map(|l| ProjMatrix::identity(l.ring)).collect(),
    };
    let twist_inverses: Vec<ProjMatrix> = twists.iter().map(ProjMatrix::inverse).collect();
    let top = levels.last().unwrap();
    let quats = &top.quaternions;
    let rings: Vec<PrimePower> = levels.iter().map(|l| l.ring).collect();

    // per word: stabilizer membership at each level
    let membership = |m: &ProjMatrix| -> Result<Vec<bool>> {
        rings
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let reduced = m.reduce_to(r)?;
                Ok(twist_inverses[i].mul(&reduced).mul(&twists[i]).is_diagonal())
            })
            .collect()
    };

    type Hit = (FreeWord, Vec<bool>);
    fn descend(
        word: &mut Vec<usize>,
        m: ProjMatrix,
        max_len: usize,
        top: &LevelGenerators,
        test: &dyn Fn(&ProjMatrix) -> Result<Vec<bool>>,
        out: &mut Vec<Hit>,
    ) -> Result<()> {
        out.push((FreeWord::new(word.clone()), test(&m)?));
        if word.len() == max_len {
            return Ok(());
        }
        let last = *word.last().unwrap();
        for s in 0..top.degree() {
            if s == top.quaternions.inverse_of(last) {
                continue;
            }
            word.push(s);
            descend(word, m.mul(&top.matrices[s]), max_len, top, test, out)?;
            word.pop();
        }
        Ok(())
    }

    let per_letter: Vec<Vec<Hit>> = if max_word_len == 0 {
        Vec::new()
    } else {
        (0..top.degree())
            .into_par_iter()
            .map(|s| {
                let mut out = Vec::new();
                descend(&mut vec![s], top.matrices[s], max_word_len, top, &membership, &mut out)?;
                Ok(out)
            })
            .collect::<Result<_>>()?
    };

    let mut survivors_per_level = vec![0; up_to_level as usize];
    let mut survivors = Vec::new();
    let mut words_examined = 0;
    for (word, member) in per_letter.into_iter().flatten() {
        words_examined += 1;
        for (count, &m) in survivors_per_level.iter_mut().zip(&member) {
            *count += usize::from(m);
        }
        if member.iter().all(|&m| m) {
            let quaternion = evaluate_word(&word, quats)?;
            let matrices = levels
                .iter()
                .map(|l| word.letters.iter().fold(ProjMatrix::identity(l.ring), |acc, &s| acc.mul(&l.matrices[s])))
                .collect();
            survivors.push(SurvivingWord { word, quaternion, matrices });
        }
    }
    let torus = find_torus_pair(cfg.q1, cfg.q2)?;
    let gamma_word = FreeWord::new(vec![quats
        .index_of(&torus.gamma)
        .ok_or_else(|| Error::InvalidInput("γ is not a generator".into()))?]);
    let gamma_survives = survivors.iter().any(|s| s.word == gamma_word);
    Ok(ProbeReport {
        max_word_len,
        up_to_level,
        twist_seed: twist.map(|t| t.seed),
        words_examined,
        survivors_per_level,
        survivors,
        gamma_word,
        gamma_survives,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TowerOptions {
    pub eig_method: EigenMethod,
    pub probe_word_len: usize,
    pub lanczos: LanczosOptions,
}

impl Default for TowerOptions {
    fn default() -> Self {
        Self {
            eig_method: EigenMethod::Auto,
            probe_word_len: 4,
            lanczos: LanczosOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelReport {
    pub n: u32,
    pub vertices: usize,
    pub expected_vertices: u64,
    pub directed_edges: usize,
    pub regular_degree: Option<usize>,
    pub connected: bool,
    pub girth: Girth,
    /// `⌈(4/3)·log_{q1} V⌉`, reported for the cayley variant.
    pub girth_lower_bound: Option<usize>,
    pub loop_count: usize,
    pub bipartite: bool,
    pub generators_in_psl: bool,
    pub spectral: SpectralReport,
    pub loop_witness: Option<LoopWitness>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoveringSummary {
    pub source_level: u32,
    pub target_level: u32,
    pub verified: bool,
    pub witnesses: usize,
    pub loop_preserved: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TwistSummary {
    pub requested_seed: u64,
    pub seed: u64,
    pub rejected_seeds: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct Tower {
    pub config: TowerConfig,
    pub mode: Mode,
    pub torus: TorusPair,
    pub twist: Option<SelectedTwist>,
    pub levels: Vec<TowerLevel>,
    pub coverings: Vec<CoveringMap>,
    pub level_reports: Vec<LevelReport>,
    pub covering_summaries: Vec<CoveringSummary>,
    pub probe: ProbeReport,
}

/// `⌈(4/3)·log_q(v)⌉`.
pub fn lps_girth_bound(q: u64, vertices: usize) -> usize {
    ((4.0 / 3.0) * (vertices as f64).ln() / (q as f64).ln() - 1e-12).ceil() as usize
}

pub fn analyze_level(level: &TowerLevel, cfg: &TowerConfig, torus: &TorusPair, opts: &TowerOptions) -> Result<LevelReport> {
    let g = &level.graph;
    let spectral = ramanujan_check_with(g, cfg.q1, opts.eig_method, &opts.lanczos)?;
    let loop_witness = match level.variant {
        Variant::Cayley => None,
        _ => Some(loop_witness(level, torus)?),
    };
    Ok(LevelReport {
        n: level.n,
        vertices: g.vertex_count(),
        expected_vertices: cfg.expected_vertices(level.n),
        directed_edges: g.edge_count(),
        regular_degree: g.regular_degree(),
        connected: g.connected(),
        girth: g.girth(),
        girth_lower_bound: (level.variant == Variant::Cayley).then(|| lps_girth_bound(cfg.q1, g.vertex_count())),
        loop_count: g.loop_count(),
        bipartite: spectral.bipartite,
        generators_in_psl: level.all_generators_psl(),
        spectral,
        loop_witness,
    })
}

/// Builds every level, the coverings between consecutive levels, and the
/// intersection probe over all levels.
pub fn build_tower(cfg: &TowerConfig, opts: &TowerOptions) -> Result<Tower> {
    cfg.validate()?;
    let torus = find_torus_pair(cfg.q1, cfg.q2)?;
    let twist = cfg.twist_seed.map(|s| select_twist(cfg, s)).transpose()?;
    let seq = twist.as_ref().map(|t| &t.sequence);
    let levels = (1..=cfg.levels)
        .map(|n| build_level_with(cfg, n, seq))
        .collect::<Result<Vec<_>>>()?;
    let level_reports = levels
        .iter()
        .map(|l| analyze_level(l, cfg, &torus, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut coverings = Vec::new();
    let mut covering_summaries = Vec::new();
    for pair in levels.windows(2) {
        let map = natural_covering(&pair[1], &pair[0])?;
        let loop_preserved = match (pair[1].variant, &level_reports[pair[1].n as usize - 1].loop_witness) {
            (Variant::Cayley, _) | (_, None) => None,
            (_, Some(up)) => {
                let down = level_reports[pair[0].n as usize - 1].loop_witness.unwrap();
                Some(map.morphism.vertex_map[up.vertex] == down.vertex && map.morphism.edge_map[up.edge] == down.edge)
            }
        };
        covering_summaries.push(CoveringSummary {
            source_level: map.source_level,
            target_level: map.target_level,
            verified: map.verdict.is_covering,
            witnesses: map.verdict.witnesses.len(),
            loop_preserved,
        });
        coverings.push(map);
    }
    let probe = intersection_probe(cfg, opts.probe_word_len, cfg.levels, seq)?;
    Ok(Tower {
        config: cfg.clone(),
        mode: cfg.mode(),
        torus,
        twist,
        levels,
        coverings,
        level_reports,
        covering_summaries,
        probe,
    })
}

impl Tower {
    pub fn twist_summary(&self) -> Option<TwistSummary> {
        self.twist.as_ref().map(|t| TwistSummary {
            requested_seed: t.requested_seed,
            seed: t.sequence.seed,
            rejected_seeds: t.rejected_seeds.clone(),
        })
    }
}
