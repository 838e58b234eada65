//! Random regular graphs, isoperimetric constants, Laplacian spectra and the
//! Poincaré ratio of vector-valued maps on graphs.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric::{squared_distance, Graph};

/// Eigenvalues at or below this are treated as zero.
pub const EIGEN_TOL: f64 = 1e-9;

/// Default largest vertex count for exhaustive subset enumeration.
pub const DEFAULT_MAX_EXACT_N: usize = 24;

/// Uniform-ish random `d`-regular simple connected graph from the
/// configuration model, rejecting loops, multi-edges and disconnected
/// outcomes. Gives up after `10 n` attempts.
pub fn random_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
    if (n * d) % 2 == 1 {
        return Err(Error::Parity { n, d });
    }
    if d < 3 || n <= d {
        return Err(Error::RegularParams { n, d });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat(v).take(d)).collect();
    let cap = 10 * n;
    'attempt: for _ in 0..cap {
        stubs.shuffle(&mut rng);
        let mut seen = std::collections::HashSet::with_capacity(n * d / 2);
        let mut edges = Vec::with_capacity(n * d / 2);
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if a == b || !seen.insert((a, b)) {
                continue 'attempt;
            }
            edges.push([a, b]);
        }
        edges.sort_unstable();
        let g = Graph::new(n, edges, d)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::RetryCapExceeded(cap))
}

/// Vertices outside `a` adjacent to some vertex of `a`.
pub fn vertex_boundary(g: &Graph, a: &[usize]) -> Vec<usize> {
    let mut inside = vec![false; g.n()];
    a.iter().for_each(|&v| inside[v] = true);
    let mut hit = vec![false; g.n()];
    for &v in a {
        for &w in g.neighbors(v) {
            if !inside[w] {
                hit[w] = true;
            }
        }
    }
    (0..g.n()).filter(|&v| hit[v]).collect()
}

/// The isoperimetric constant `min |∂A| / |A|` over `0 < |A| <= n/2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Cheeger {
    /// Exhaustive enumeration, with a minimizing set.
    Exact { value: f64, set: Vec<usize> },
    /// Bounds from the spectral gap: `λ₁/(2d) <= h <= sqrt(2 d λ₁)`.
    Spectral { lower: f64, upper: f64 },
}

impl Cheeger {
    pub fn lower(&self) -> f64 {
        match self {
            Cheeger::Exact { value, .. } => *value,
            Cheeger::Spectral { lower, .. } => *lower,
        }
    }

    pub fn upper(&self) -> f64 {
        match self {
            Cheeger::Exact { value, .. } => *value,
            Cheeger::Spectral { upper, .. } => *upper,
        }
    }

    pub fn method(&self) -> &'static str {
        match self {
            Cheeger::Exact { .. } => "exact",
            Cheeger::Spectral { .. } => "spectral",
        }
    }
}

/// Exact constant when `n <= max_exact_n` (at most 30), otherwise the
/// spectral interval.
pub fn cheeger_constant(g: &Graph, max_exact_n: usize) -> Result<Cheeger> {
    if !g.is_connected() {
        return Err(Error::InvalidGraph("Cheeger constant needs a connected graph".into()));
    }
    if g.n() <= max_exact_n.min(30) && g.n() >= 2 {
        let (value, set) = exact_cheeger(g);
        return Ok(Cheeger::Exact { value, set });
    }
    let (l1, _) = lambda1(g)?;
    let d = g.degree() as f64;
    Ok(Cheeger::Spectral { lower: l1 / (2.0 * d), upper: (2.0 * d * l1).sqrt() })
}

/// Enumerates every vertex set as a bitmask. Neighbourhoods of the low and
/// high halves are tabulated separately and combined with one OR.
fn exact_cheeger(g: &Graph) -> (f64, Vec<usize>) {
    let n = g.n();
    let nbr: Vec<u32> = (0..n).map(|v| g.neighbors(v).iter().fold(0u32, |m, &w| m | (1 << w))).collect();
    let lo_bits = n / 2;
    let hi_bits = n - lo_bits;
    let table = |bits: usize, offset: usize| -> Vec<u32> {
        let mut t = vec![0u32; 1 << bits];
        for a in 1usize..(1 << bits) {
            let low = a.trailing_zeros() as usize;
            t[a] = t[a & (a - 1)] | nbr[offset + low];
        }
        t
    };
    let nlo = table(lo_bits, 0);
    let nhi = table(hi_bits, lo_bits);
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    // Best as (boundary, size, mask); compared as fractions, ties by mask.
    let better = |a: (u64, u64, u32), b: (u64, u64, u32)| -> (u64, u64, u32) {
        let (l, r) = (a.0 * b.1, b.0 * a.1);
        if l < r || (l == r && a.2 < b.2) {
            a
        } else {
            b
        }
    };
    let best = (0u32..(1u32 << hi_bits))
        .into_par_iter()
        .map(|hi| {
            let mut best = (u64::from(u32::MAX), 1u64, u32::MAX);
            let hmask = hi << lo_bits;
            let hn = nhi[hi as usize];
            for lo in 0u32..(1u32 << lo_bits) {
                let a = hmask | lo;
                let k = a.count_ones() as usize;
                if k == 0 || 2 * k > n {
                    continue;
                }
                let b = ((nlo[lo as usize] | hn) & !a & full).count_ones() as u64;
                best = better((b, k as u64, a), best);
            }
            best
        })
        .reduce(|| (u64::from(u32::MAX), 1u64, u32::MAX), better);
    let set = (0..n).filter(|&v| best.2 & (1 << v) != 0).collect();
    (best.0 as f64 / best.1 as f64, set)
}

/// Combinatorial Laplacian `D − A`.
pub fn laplacian(g: &Graph) -> DMatrix<f64> {
    let n = g.n();
    let mut l = DMatrix::zeros(n, n);
    for &[a, b] in g.edges() {
        l[(a, b)] -= 1.0;
        l[(b, a)] -= 1.0;
        l[(a, a)] += 1.0;
        l[(b, b)] += 1.0;
    }
    l
}

/// Eigenvalues in increasing order with matching unit eigenvectors (columns).
pub fn spectrum(g: &Graph) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(laplacian(g));
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(g.n(), g.n(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Smallest positive Laplacian eigenvalue and a centered unit eigenvector.
pub fn lambda1(g: &Graph) -> Result<(f64, Vec<f64>)> {
    if g.n() < 2 || !g.is_connected() {
        return Err(Error::InvalidGraph("spectral gap needs a connected graph with at least 2 vertices".into()));
    }
    let (values, vectors) = spectrum(g);
    let i = values.iter().position(|&v| v > EIGEN_TOL).expect("connected graph has a positive eigenvalue");
    let mut v: Vec<f64> = vectors.column(i).iter().copied().collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    // Fix the sign so the output does not depend on solver internals.
    if let Some(&first) = v.iter().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok((values[i], v))
}

/// Sharp Poincaré constant of the variational bound: `2|E| / ((n − 1) λ₁)`,
/// which is `d n / ((n − 1) λ₁)` for `d`-regular graphs.
pub fn poincare_constant(g: &Graph, lambda1: f64) -> f64 {
    2.0 * g.edges().len() as f64 / ((g.n() - 1) as f64 * lambda1)
}

/// Average `‖f(x) − f(y)‖^p` over all pairs divided by the average over edges.
pub fn poincare_ratio(g: &Graph, f: &[Vec<f64>], p: f64) -> Result<f64> {
    let n = g.n();
    assert_eq!(f.len(), n, "one vector per vertex");
    let pow = |a: &[f64], b: &[f64]| {
        let d2 = squared_distance(a, b);
        if p == 2.0 {
            d2
        } else {
            d2.sqrt().powf(p)
        }
    };
    let edge_sum: f64 = g.edges().iter().map(|&[a, b]| pow(&f[a], &f[b])).sum();
    if edge_sum <= 0.0 {
        return Err(Error::ConstantMap);
    }
    let pair_sum: f64 = (0..n).map(|x| (x + 1..n).map(|y| pow(&f[x], &f[y])).sum::<f64>()).sum();
    let pairs = (n * (n - 1) / 2) as f64;
    let edges = g.edges().len() as f64;
    Ok((pair_sum / pairs) / (edge_sum / edges))
}

/// Random map with coordinates uniform in `[-1, 1]`.
pub fn random_map(n: usize, dim: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareReport {
    pub n: usize,
    pub lambda1: f64,
    pub c0: f64,
    pub trials: usize,
    pub max_random_ratio: f64,
    pub eigenvector_ratio: f64,
    /// Relative tolerance used for both checks.
    pub tolerance: f64,
}

/// Evaluates the Poincaré ratio for `trials` random maps (dimensions cycling
/// through 1, 2, 8) and for the spectral eigenvector, asserting that none
/// exceeds `c₀` and that the eigenvector attains it.
pub fn poincare_bound_check(g: &Graph, trials: usize, rng: &mut impl Rng) -> Result<PoincareReport> {
    const TOL: f64 = 1e-9;
    let (l1, v) = lambda1(g)?;
    let c0 = poincare_constant(g, l1);
    let mut max_random = 0.0f64;
    for t in 0..trials {
        let dim = [1, 2, 8][t % 3];
        let f = random_map(g.n(), dim, rng);
        let r = match poincare_ratio(g, &f, 2.0) {
            Ok(r) => r,
            Err(Error::ConstantMap) => continue,
            Err(e) => return Err(e),
        };
        if r > c0 * (1.0 + TOL) {
            return Err(Error::Assertion(format!("Poincaré ratio {r} exceeds c0 = {c0} (trial {t})")));
        }
        max_random = max_random.max(r);
    }
    let ev: Vec<Vec<f64>> = v.iter().map(|&x| vec![x]).collect();
    let eig_ratio = poincare_ratio(g, &ev, 2.0)?;
    if (eig_ratio - c0).abs() > c0 * TOL {
        return Err(Error::Assertion(format!("eigenvector ratio {eig_ratio} differs from c0 = {c0}")));
    }
    Ok(PoincareReport {
        n: g.n(),
        lambda1: l1,
        c0,
        trials,
        max_random_ratio: max_random,
        eigenvector_ratio: eig_ratio,
        tolerance: TOL,
    })
}

/// Average of `‖f(x) − f(y)‖²` over unordered pairs.
pub fn pair_mean_sq(f: &[Vec<f64>]) -> f64 {
    let n = f.len();
    let pair_sum: f64 = (0..n).map(|x| (x + 1..n).map(|y| squared_distance(&f[x], &f[y])).sum::<f64>()).sum();
    pair_sum / (n * (n - 1) / 2) as f64
}

/// Checks that `f` is 1-Lipschitz for the graph metric (edges suffice) and
/// returns the average squared displacement over all pairs, asserting it is
/// at most `c₀`.
pub fn lipschitz_compression_bound(g: &Graph, f: &[Vec<f64>]) -> Result<f64> {
    let (l1, _) = lambda1(g)?;
    lipschitz_bound_with(g, f, poincare_constant(g, l1))
}

fn lipschitz_bound_with(g: &Graph, f: &[Vec<f64>], c0: f64) -> Result<f64> {
    for &[a, b] in g.edges() {
        let s = squared_distance(&f[a], &f[b]).sqrt();
        if s > 1.0 + 1e-12 {
            return Err(Error::NotLipschitz(a, b, s));
        }
    }
    let mean = pair_mean_sq(f);
    if mean > c0 * (1.0 + 1e-9) {
        return Err(Error::Assertion(format!("pair average {mean} exceeds c0 = {c0}")));
    }
    Ok(mean)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressionReport {
    pub n: usize,
    pub c0: f64,
    pub trials: usize,
    /// Largest pair average over the sampled 1-Lipschitz maps.
    pub max_pair_mean: f64,
}

/// Draws `trials` random maps (dimensions cycling through 1, 3, 8), scales
/// each to Lipschitz constant 1 and asserts that its pair average of squared
/// displacements is at most `c₀`.
pub fn compression_check(g: &Graph, trials: usize, rng: &mut impl Rng) -> Result<CompressionReport> {
    let (l1, _) = lambda1(g)?;
    let c0 = poincare_constant(g, l1);
    let mut max_pair_mean = 0.0f64;
    for t in 0..trials {
        let mut f = random_map(g.n(), [1, 3, 8][t % 3], rng);
        let l = g.edges().iter().map(|&[a, b]| squared_distance(&f[a], &f[b]).sqrt()).fold(0.0, f64::max);
        if l > 0.0 {
            f.iter_mut().for_each(|v| v.iter_mut().for_each(|x| *x /= l));
        }
        max_pair_mean = max_pair_mean.max(lipschitz_bound_with(g, &f, c0)?);
    }
    Ok(CompressionReport { n: g.n(), c0, trials, max_pair_mean })
}

/// Spectral data of one graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub n: usize,
    pub degree: usize,
    pub lambda1: f64,
    pub cheeger: Cheeger,
    pub c0: f64,
}

impl SpectralReport {
    pub fn new(g: &Graph, max_exact_n: usize) -> Result<Self> {
        let (l1, _) = lambda1(g)?;
        Ok(Self {
            n: g.n(),
            degree: g.degree(),
            lambda1: l1,
            cheeger: cheeger_constant(g, max_exact_n)?,
            c0: poincare_constant(g, l1),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap()
    }
}

/// Members whose spectral gap falls below this are flagged.
pub const LAMBDA1_FLOOR: f64 = 0.1;

/// An increasing list of `d`-regular graphs with their spectral data.
#[derive(Debug, Clone)]
pub struct ExpanderFamily {
    pub graphs: Vec<Graph>,
    pub degree: usize,
    pub reports: Vec<SpectralReport>,
}

impl ExpanderFamily {
    pub fn new(graphs: Vec<Graph>, max_exact_n: usize) -> Result<Self> {
        let degree = graphs.first().map_or(0, Graph::degree);
        for g in &graphs {
            if g.degree() != degree || !g.is_regular() {
                return Err(Error::InvalidGraph(format!("family member with n={} is not {degree}-regular", g.n())));
            }
        }
        let reports = graphs.par_iter().map(|g| SpectralReport::new(g, max_exact_n)).collect::<Result<Vec<_>>>()?;
        Ok(Self { graphs, degree, reports })
    }

    /// Certified lower bound on the conductance over all members.
    pub fn conductance(&self) -> f64 {
        self.reports.iter().map(|r| r.cheeger.lower()).fold(f64::INFINITY, f64::min)
    }

    /// Family Poincaré constant: the largest member constant.
    pub fn c0(&self) -> f64 {
        self.reports.iter().map(|r| r.c0).fold(0.0, f64::max)
    }

    /// Members whose spectral gap is below [`LAMBDA1_FLOOR`].
    pub fn drifting(&self) -> Vec<usize> {
        self.reports.iter().filter(|r| r.lambda1 < LAMBDA1_FLOOR).map(|r| r.n).collect()
    }

    /// CSV with columns `n,lambda1,h,h_method,c0`; for spectral rows `h` is
    /// the certified lower bound.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,lambda1,h,h_method,c0\n");
        for r in &self.reports {
            writeln!(out, "{},{},{},{},{}", r.n, r.lambda1, r.cheeger.lower(), r.cheeger.method(), r.c0).unwrap();
        }
        out
    }
}
