//! Adjacency spectra and the Ramanujan test.
//!
//! Small graphs (at most [`DENSE_THRESHOLD`] vertices) are diagonalized
//! densely. Larger ones go through Lanczos with full reorthogonalization on
//! the complement of the exactly known trivial eigenvectors: the constant
//! vector, plus the ±1 bipartition vector when the graph is bipartite.
//!
//! All reductions are evaluated in a fixed order, so results do not depend
//! on the size of the rayon pool.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::multigraph::SerreGraph;

pub const DENSE_THRESHOLD: usize = 4096;

/// Slack allowed on `max |λ| ≤ 2√q`.
pub const RAMANUJAN_TOLERANCE: f64 = 1e-8;

/// Residual `‖Av − λv‖` required of unit Ritz pairs.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

const CHUNK: usize = 4096;

/// Sparse symmetric adjacency matrix in CSR form. `A[u][v]` counts the
/// directed edges `u → v`, so a geometric loop contributes 2 on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    dim: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

pub fn adjacency(g: &SerreGraph) -> AdjacencyMatrix {
    let dim = g.vertex_count();
    let mut row_start = Vec::with_capacity(dim + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_start.push(0);
    let mut termini = Vec::new();
    for v in 0..dim {
        termini.clear();
        termini.extend(g.link(v).iter().map(|&e| g.edge(e).terminus));
        termini.sort_unstable();
        for chunk in termini.chunk_by(|a, b| a == b) {
            cols.push(chunk[0]);
            vals.push(chunk.len() as f64);
        }
        row_start.push(cols.len());
    }
    AdjacencyMatrix { dim, row_start, cols, vals }
}

impl AdjacencyMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_start[u]..self.row_start[u + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.row(u).find(|&(c, _)| c == v).map_or(0.0, |(_, x)| x)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|u| self.row(u).map(|(_, x)| x).sum()).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|u| self.row(u).all(|(v, x)| self.get(v, u) == x))
    }

    /// Upper bound on the spectral norm (max absolute row sum).
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|u| self.row(u).map(|(_, x)| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for u in 0..self.dim {
            for (v, x) in self.row(u) {
                m[(u, v)] = x;
            }
        }
        m
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(c, out)| {
            let base = c * CHUNK;
            for (i, yi) in out.iter_mut().enumerate() {
                *yi = self.row(base + i).map(|(v, a)| a * x[v]).sum();
            }
        });
    }
}

/// All eigenvalues in ascending order.
pub fn dense_eigenvalues(a: &AdjacencyMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = a.to_dense().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    Auto,
    Dense,
    Iterative,
}

impl EigenMethod {
    fn resolve(self, dim: usize) -> EigenMethod {
        match self {
            EigenMethod::Auto if dim <= DENSE_THRESHOLD => EigenMethod::Dense,
            EigenMethod::Auto => EigenMethod::Iterative,
            m => m,
        }
    }
}

impl std::str::FromStr for EigenMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(EigenMethod::Auto),
            "dense" => Ok(EigenMethod::Dense),
            "iterative" => Ok(EigenMethod::Iterative),
            other => Err(Error::InvalidParameter(format!("unknown eigen method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RitzValue {
    pub value: f64,
    /// `‖Av − λv‖` for the normalized Ritz vector.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremeEigenvalues {
    /// Largest first.
    pub largest: Vec<RitzValue>,
    /// Smallest first.
    pub smallest: Vec<RitzValue>,
    pub method: EigenMethod,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    pub max_iterations: usize,
    pub check_every: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_iterations: 3000,
            check_every: 10,
            tolerance: RESIDUAL_TOLERANCE,
            seed: 0x5eed,
        }
    }
}

/// The `how_many` largest and smallest eigenvalues of `a`.
///
/// The iterative path works on the orthogonal complement of `deflate`,
/// which must be an orthonormal set of exact eigenvectors of `a`.
pub fn extreme_eigenvalues(
    a: &AdjacencyMatrix,
    how_many: usize,
    method: EigenMethod,
    deflate: &[Vec<f64>],
    opts: &LanczosOptions,
) -> Result<ExtremeEigenvalues> {
    if how_many == 0 {
        return Err(Error::InvalidParameter("how_many must be positive".into()));
    }
    match method.resolve(a.dim()) {
        EigenMethod::Dense => {
            let ev = dense_eigenvalues(a);
            let pick = |it: &mut dyn Iterator<Item = &f64>| {
                it.take(how_many).map(|&value| RitzValue { value, residual: 0.0 }).collect()
            };
            Ok(ExtremeEigenvalues {
                largest: pick(&mut ev.iter().rev()),
                smallest: pick(&mut ev.iter()),
                method: EigenMethod::Dense,
                iterations: 0,
            })
        }
        _ => lanczos_extremes(a, how_many, deflate, opts),
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

// w -= Σ h_j v_j, twice (classical Gram-Schmidt with reorthogonalization).
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        let h: Vec<f64> = basis.par_iter().map(|v| dot(v, w)).collect();
        w.par_chunks_mut(CHUNK).enumerate().for_each(|(c, out)| {
            let base = c * CHUNK;
            for (v, &hj) in basis.iter().zip(&h) {
                for (i, wi) in out.iter_mut().enumerate() {
                    *wi -= hj * v[base + i];
                }
            }
        });
    }
}

fn lanczos_extremes(
    a: &AdjacencyMatrix,
    how_many: usize,
    deflate: &[Vec<f64>],
    opts: &LanczosOptions,
) -> Result<ExtremeEigenvalues> {
    let n = a.dim();
    let available = n.saturating_sub(deflate.len());
    if available < how_many {
        return Err(Error::InvalidInput(format!(
            "deflated space of dimension {available} has fewer than {how_many} eigenvalues"
        )));
    }
    let scale = a.norm_bound().max(f64::MIN_POSITIVE);
    let tol = opts.tolerance;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    orthogonalize(&mut v, deflate);
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let max_iter = opts.max_iterations.min(available);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_iter.min(1024));
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut last_estimate = f64::INFINITY;

    loop {
        a.matvec(&v, &mut w);
        let j = alpha.len();
        if j > 0 {
            let b = beta[j - 1];
            let prev = &basis[j - 1];
            w.iter_mut().zip(prev).for_each(|(wi, pi)| *wi -= b * pi);
        }
        let aj = dot(&w, &v);
        w.iter_mut().zip(&v).for_each(|(wi, vi)| *wi -= aj * vi);
        alpha.push(aj);
        basis.push(std::mem::take(&mut v));
        orthogonalize(&mut w, deflate);
        orthogonalize(&mut w, &basis);
        let bj = norm(&w);
        let k = alpha.len();
        let exhausted = bj <= 1e-12 * scale || k >= max_iter;
        if k >= 2 * how_many && (k.is_multiple_of(opts.check_every) || exhausted) {
            let pairs = tridiagonal_extremes(&alpha, &beta, how_many);
            last_estimate = pairs
                .iter()
                .map(|(_, s)| bj * s.last().unwrap().abs())
                .fold(0.0, f64::max);
            if last_estimate <= tol || exhausted {
                let (largest, smallest) = ritz_values(a, &basis, &pairs, how_many);
                let worst = largest.iter().chain(&smallest).map(|r| r.residual).fold(0.0, f64::max);
                if worst <= tol || (exhausted && bj <= 1e-12 * scale) {
                    return Ok(ExtremeEigenvalues {
                        largest,
                        smallest,
                        method: EigenMethod::Iterative,
                        iterations: k,
                    });
                }
                if exhausted {
                    return Err(Error::NotConverged { iterations: k, residual: worst });
                }
            }
        }
        if exhausted {
            return Err(Error::NotConverged { iterations: k, residual: last_estimate });
        }
        beta.push(bj);
        v = w.iter().map(|x| x / bj).collect();
    }
}

// Ritz vectors y = V s and their true residuals.
fn ritz_values(
    a: &AdjacencyMatrix,
    basis: &[Vec<f64>],
    pairs: &[(f64, Vec<f64>)],
    how_many: usize,
) -> (Vec<RitzValue>, Vec<RitzValue>) {
    let n = a.dim();
    let mut out: Vec<RitzValue> = pairs
        .iter()
        .map(|(theta, s)| {
            let mut y = vec![0.0; n];
            y.par_chunks_mut(CHUNK).enumerate().for_each(|(c, out)| {
                let base = c * CHUNK;
                for (v, &sj) in basis.iter().zip(s) {
                    for (i, yi) in out.iter_mut().enumerate() {
                        *yi += sj * v[base + i];
                    }
                }
            });
            let ny = norm(&y);
            y.iter_mut().for_each(|x| *x /= ny);
            let mut ay = vec![0.0; n];
            a.matvec(&y, &mut ay);
            let r: Vec<f64> = ay.iter().zip(&y).map(|(p, q)| p - theta * q).collect();
            RitzValue { value: *theta, residual: norm(&r) }
        })
        .collect();
    let smallest = out.split_off(how_many);
    (out, smallest)
}

// Number of eigenvalues of the tridiagonal (alpha, beta) below x (Sturm count).
fn sturm_count(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for (i, &a) in alpha.iter().enumerate() {
        let b2 = if i == 0 { 0.0 } else { beta[i - 1] * beta[i - 1] };
        d = a - x - if i == 0 { 0.0 } else { b2 / d };
        if d == 0.0 {
            d = -f64::EPSILON * (a.abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `index`-th smallest eigenvalue (0-based) of a symmetric tridiagonal
/// matrix, by bisection.
pub fn tridiagonal_eigenvalue(alpha: &[f64], beta: &[f64], index: usize) -> f64 {
    let k = alpha.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..k {
        let r = if i > 0 { beta[i - 1].abs() } else { 0.0 } + if i + 1 < k { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    let pad = 1e-12 * (hi - lo).abs().max(1.0);
    lo -= pad;
    hi += pad;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(alpha, beta, mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

// Solve (T - shift I) x = rhs by Gaussian elimination with partial pivoting.
fn tridiagonal_solve(alpha: &[f64], beta: &[f64], shift: f64, rhs: &[f64]) -> Vec<f64> {
    let k = alpha.len();
    // rows hold up to three nonzeros after pivoting: (diag, super1, super2)
    let mut d: Vec<f64> = alpha.iter().map(|a| a - shift).collect();
    let mut du: Vec<f64> = beta[..k.saturating_sub(1)].to_vec();
    let mut dl: Vec<f64> = du.clone();
    let mut du2 = vec![0.0; k.saturating_sub(2)];
    let mut b = rhs.to_vec();
    let tiny = f64::EPSILON * alpha.iter().chain(beta).map(|x| x.abs()).fold(1.0, f64::max);
    for i in 0..k.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            if d[i].abs() < tiny {
                d[i] = tiny;
            }
            let m = dl[i] / d[i];
            d[i + 1] -= m * du[i];
            b[i + 1] -= m * b[i];
            dl[i] = 0.0;
        } else {
            let m = d[i] / dl[i];
            d[i] = dl[i];
            let tmp = d[i + 1];
            d[i + 1] = du[i] - m * tmp;
            if i + 2 < k {
                du2[i] = du[i + 1];
                du[i + 1] *= -m;
            }
            du[i] = tmp;
            b.swap(i, i + 1);
            b[i + 1] -= m * b[i];
        }
    }
    if d[k - 1].abs() < tiny {
        d[k - 1] = tiny;
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = b[i];
        if i + 1 < k {
            s -= du[i] * x[i + 1];
        }
        if i + 2 < k {
            s -= du2[i] * x[i + 2];
        }
        x[i] = s / d[i];
    }
    x
}

/// Extreme eigenpairs of a symmetric tridiagonal matrix: the `how_many`
/// largest (descending) followed by the `how_many` smallest (ascending).
/// Eigenvectors come from inverse iteration and are normalized.
pub fn tridiagonal_extremes(alpha: &[f64], beta: &[f64], how_many: usize) -> Vec<(f64, Vec<f64>)> {
    let k = alpha.len();
    let indices: Vec<usize> = (0..how_many)
        .map(|i| k - 1 - i)
        .chain(0..how_many)
        .collect();
    indices
        .into_iter()
        .map(|idx| {
            let theta = tridiagonal_eigenvalue(alpha, beta, idx);
            let mut x: Vec<f64> = (0..k).map(|i| 1.0 + 0.1 * ((i * 7 + idx) % 13) as f64).collect();
            for _ in 0..3 {
                x = tridiagonal_solve(alpha, beta, theta, &x);
                let nx = norm(&x);
                x.iter_mut().for_each(|v| *v /= nx);
            }
            (theta, x)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub q: u64,
    pub vertices: usize,
    pub lambda_top: f64,
    pub top_multiplicity: usize,
    pub lambda_bottom: f64,
    pub bottom_multiplicity: usize,
    pub max_abs_nontrivial: f64,
    pub bipartite: bool,
    pub ramanujan_bound: f64,
    pub tolerance: f64,
    pub ramanujan: bool,
    pub method: EigenMethod,
    /// Largest Ritz residual (zero for dense solves).
    pub max_residual: f64,
    pub iterations: usize,
}

/// Checks `|λ| ≤ 2√q` for every eigenvalue other than `q+1` and, on
/// bipartite graphs, `-(q+1)`.
pub fn ramanujan_check(g: &SerreGraph, q: u64, method: EigenMethod) -> Result<SpectralReport> {
    ramanujan_check_with(g, q, method, &LanczosOptions::default())
}

pub fn ramanujan_check_with(
    g: &SerreGraph,
    q: u64,
    method: EigenMethod,
    opts: &LanczosOptions,
) -> Result<SpectralReport> {
    let degree = q as usize + 1;
    match g.regular_degree() {
        Some(d) if d == degree => {}
        Some(d) => {
            return Err(Error::InvalidInput(format!("graph is {d}-regular, expected {degree}")));
        }
        None => return Err(Error::InvalidInput("graph is not regular".into())),
    }
    let n = g.vertex_count();
    let a = adjacency(g);
    let coloring = g.bipartition();
    let bipartite = coloring.is_some();
    let top = degree as f64;
    let bound = 2.0 * (q as f64).sqrt();
    let near = |x: f64, y: f64| (x - y).abs() <= RAMANUJAN_TOLERANCE * top.max(1.0);

    let resolved = method.resolve(n);
    let (lambda_top, top_mult, lambda_bottom, bottom_mult, max_abs, residual, iterations) = match resolved {
        EigenMethod::Dense => {
            let ev = dense_eigenvalues(&a);
            let lambda_top = ev[n - 1];
            let lambda_bottom = ev[0];
            let top_mult = ev.iter().filter(|&&x| near(x, lambda_top)).count();
            let bottom_mult = ev.iter().filter(|&&x| near(x, lambda_bottom)).count();
            let lo = usize::from(bipartite);
            let nontrivial = &ev[lo..n - 1];
            let max_abs = nontrivial.iter().map(|x| x.abs()).fold(0.0, f64::max);
            (lambda_top, top_mult, lambda_bottom, bottom_mult, max_abs, 0.0, 0)
        }
        _ => {
            let scale = 1.0 / (n as f64).sqrt();
            let mut deflate = vec![vec![scale; n]];
            if let Some(colors) = &coloring {
                deflate.push(colors.iter().map(|&c| if c == 0 { scale } else { -scale }).collect());
            }
            let rayleigh = |v: &[f64]| {
                let mut av = vec![0.0; n];
                a.matvec(v, &mut av);
                dot(&av, v)
            };
            let ext = lanczos_extremes(&a, 1, &deflate, opts)?;
            let (hi, lo) = (ext.largest[0], ext.smallest[0]);
            let lambda_top = rayleigh(&deflate[0]);
            let top_mult = if near(hi.value, lambda_top) { 2 } else { 1 };
            let (lambda_bottom, bottom_mult) = match deflate.get(1) {
                Some(sign) => {
                    let b = rayleigh(sign);
                    (b, if near(lo.value, b) { 2 } else { 1 })
                }
                None => (lo.value, 1),
            };
            let max_abs = hi.value.abs().max(lo.value.abs());
            (lambda_top, top_mult, lambda_bottom, bottom_mult, max_abs, hi.residual.max(lo.residual), ext.iterations)
        }
    };
    Ok(SpectralReport {
        q,
        vertices: n,
        lambda_top,
        top_multiplicity: top_mult,
        lambda_bottom,
        bottom_multiplicity: bottom_mult,
        max_abs_nontrivial: max_abs,
        bipartite,
        ramanujan_bound: bound,
        tolerance: RAMANUJAN_TOLERANCE,
        ramanujan: max_abs <= bound + RAMANUJAN_TOLERANCE,
        method: resolved,
        max_residual: residual,
        iterations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub interval: (f64, f64),
    pub inside: usize,
    pub inside_fraction: f64,
}

/// Bins the full spectrum over `[-‖A‖, ‖A‖]` and counts eigenvalues in the
/// closed interval `[-2√q, 2√q]`.
pub fn full_spectrum_histogram(a: &AdjacencyMatrix, bins: usize, q: u64) -> Result<SpectrumHistogram> {
    if a.dim() > DENSE_THRESHOLD {
        return Err(Error::InvalidInput(format!(
            "{} vertices exceeds the dense limit {DENSE_THRESHOLD}",
            a.dim()
        )));
    }
    if bins == 0 || a.dim() == 0 {
        return Err(Error::InvalidParameter("need at least one bin and one vertex".into()));
    }
    let ev = dense_eigenvalues(a);
    let r = a.norm_bound().max(1.0);
    let width = 2.0 * r / bins as f64;
    let bin_edges = (0..=bins).map(|i| -r + i as f64 * width).collect();
    let mut counts = vec![0; bins];
    for &x in &ev {
        let i = (((x + r) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let edge = 2.0 * (q as f64).sqrt();
    let inside = ev.iter().filter(|x| x.abs() <= edge + RAMANUJAN_TOLERANCE).count();
    Ok(SpectrumHistogram {
        bin_edges,
        counts,
        interval: (-edge, edge),
        inside,
        inside_fraction: inside as f64 / ev.len() as f64,
    })
}
