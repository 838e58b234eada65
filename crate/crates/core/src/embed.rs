//! Embeddings into finite-dimensional Euclidean space (a stand-in for `l₂`):
//! the scale-weighted barycentric embedding of class-C₀ complexes,
//! compression profiles, and the far-pair audit of graph families.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::complex::{ComplexMetric, ComplexPoint, GeodesicGraph, MetricComplex};
use crate::cover::{cover_stats, greedy_cover, nerve_projection};
use crate::error::{Error, Result};
use crate::metric::{euclidean_distance, graph_metric, squared_distance, Graph};
use crate::spectral::{spectrum, SpectralReport};

/// `l(x)`: the shortest edge over the simplices containing `x`.
pub fn l_value(k: &MetricComplex, p: &ComplexPoint) -> f64 {
    k.facets_containing(p.carrier()).map(|f| k.min_edge(f)).fold(f64::INFINITY, f64::min)
}

/// `l` and its 1-Lipschitz regularization `ρ` at a list of points.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeScale {
    pub l: Vec<f64>,
    pub rho: Vec<f64>,
    /// Within-simplex pairs on which `|ρ(x) − ρ(y)| <= d(x, y)` was checked.
    pub pairs_checked: usize,
}

/// Pairs of points sharing a facet, with their chord length.
fn simplex_pairs(k: &MetricComplex, points: &[ComplexPoint]) -> Vec<(usize, usize, f64)> {
    let n = points.len();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            (i + 1..n).filter_map(move |j| k.chord(&points[i], &points[j]).map(|d| (i, j, d)))
        })
        .collect()
}

/// Computes `l` and `ρ(x) = min_y (l(y) + d(x, y))` at `points`.
///
/// The infimum runs over the nodes of a [`GeodesicGraph`] that contains the
/// points themselves, so `ρ` is exactly 1-Lipschitz for the graph distance,
/// which never exceeds the within-simplex chord. Asserts `l/2 <= ρ <= l` at
/// every point and the Lipschitz bound on every within-simplex pair.
pub fn edge_scale_function(k: &MetricComplex, points: &[ComplexPoint], depth: u32) -> Result<EdgeScale> {
    if k.levels().is_none() {
        return Err(Error::InvalidComplex("edge scale needs a c0 complex".into()));
    }
    let g = GeodesicGraph::new(k, depth, points)?;
    let init: Vec<f64> = (0..g.len()).map(|i| l_value(k, g.node(i))).collect();
    let smooth = g.multi_source(&init);
    let l: Vec<f64> = (0..points.len()).map(|q| init[g.query_node(q)]).collect();
    let rho: Vec<f64> = (0..points.len()).map(|q| smooth[g.query_node(q)]).collect();
    for (i, (&li, &ri)) in l.iter().zip(&rho).enumerate() {
        if ri < li / 2.0 * (1.0 - 1e-12) || ri > li * (1.0 + 1e-12) {
            return Err(Error::NotClassC0(format!(
                "scale sandwich fails at point {i} on {:?}: l = {li}, rho = {ri}",
                points[i].carrier()
            )));
        }
    }
    let pairs = simplex_pairs(k, points);
    for &(i, j, d) in &pairs {
        if (rho[i] - rho[j]).abs() > d + 1e-9 {
            return Err(Error::Assertion(format!("rho is not 1-Lipschitz on points {i}, {j}")));
        }
    }
    Ok(EdgeScale { l, rho, pairs_checked: pairs.len() })
}

/// A finite point cloud in Euclidean space.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedCloud {
    pub provenance: String,
    pub labels: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
}

impl EmbeddedCloud {
    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn to_json(&self) -> String {
        let vectors: serde_json::Map<String, Value> =
            self.labels.iter().cloned().zip(self.vectors.iter().map(|v| json!(v))).collect();
        serde_json::to_string(&json!({"dim": self.dim(), "vectors": vectors, "provenance": self.provenance})).unwrap()
    }

    /// Parses a cloud whose labels are vertex ids `0..n`.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct File {
            dim: usize,
            vectors: BTreeMap<String, Vec<f64>>,
            #[serde(default)]
            provenance: String,
        }
        let file: File =
            serde_json::from_str(text).map_err(|e| Error::Parse { path: "<cloud>".into(), msg: e.to_string() })?;
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(file.vectors.len());
        for (label, v) in file.vectors {
            let id: usize = label
                .parse()
                .map_err(|_| Error::Parse { path: "<cloud>".into(), msg: format!("label {label:?} is not a vertex id") })?;
            if v.len() != file.dim {
                return Err(Error::Parse { path: "<cloud>".into(), msg: format!("vector {label} has wrong dimension") });
            }
            rows.push((id, v));
        }
        rows.sort_by_key(|r| r.0);
        if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
            return Err(Error::Parse { path: "<cloud>".into(), msg: "vertex ids must be 0..n".into() });
        }
        Ok(Self {
            provenance: file.provenance,
            labels: rows.iter().map(|r| r.0.to_string()).collect(),
            vectors: rows.into_iter().map(|r| r.1).collect(),
        })
    }
}

/// Result of [`hilbert_embed`].
#[derive(Debug, Clone)]
pub struct HilbertEmbedding {
    pub cloud: EmbeddedCloud,
    pub scale: EdgeScale,
    /// Largest `‖q(x) − q(y)‖ / d(x, y)` over within-simplex pairs.
    pub max_ratio: f64,
    pub pairs_checked: usize,
}

/// Embeds points of a class-C₀ complex by `q(x) = ρ(x) · u(x)`, where `u(x)`
/// is the barycentric vector of `x` over all vertices. Asserts
/// `‖q(x) − q(y)‖ <= 3 d(x, y) + 1e-9` for every pair sharing a simplex.
pub fn hilbert_embed(k: &MetricComplex, points: &[ComplexPoint], depth: u32) -> Result<HilbertEmbedding> {
    let scale = edge_scale_function(k, points, depth)?;
    let n = k.n_vertices();
    let vectors: Vec<Vec<f64>> = points
        .iter()
        .zip(&scale.rho)
        .map(|(p, &r)| p.dense(n).into_iter().map(|w| r * w).collect())
        .collect();
    let pairs = simplex_pairs(k, points);
    let mut max_ratio = 0.0f64;
    for &(i, j, d) in &pairs {
        let e = euclidean_distance(&vectors[i], &vectors[j]);
        if e > 3.0 * d + 1e-9 {
            return Err(Error::Assertion(format!("embedding stretches points {i}, {j} by {} > 3", e / d)));
        }
        if d > 0.0 {
            max_ratio = max_ratio.max(e / d);
        }
    }
    let labels = (0..points.len()).map(|i| i.to_string()).collect();
    Ok(HilbertEmbedding {
        cloud: EmbeddedCloud { provenance: "c0-barycentric".into(), labels, vectors },
        scale,
        max_ratio,
        pairs_checked: pairs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bucket {
    /// Source distances in `[index, index + 1)`.
    pub index: i64,
    pub count: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub rho1: f64,
    pub rho2: f64,
}

/// Embedded distance as a function of source distance, bucketed by unit
/// intervals, with monotone lower and upper envelopes.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionProfile {
    pub buckets: Vec<Bucket>,
}

impl CompressionProfile {
    fn bucket_at(&self, t: f64) -> Option<&Bucket> {
        let idx = t.floor() as i64;
        self.buckets.iter().find(|b| b.index >= idx)
    }

    /// Lower envelope at source distance `t`: the smallest embedded distance
    /// over pairs at source distance at least `floor(t)`.
    pub fn rho1_at(&self, t: f64) -> Option<f64> {
        self.bucket_at(t).map(|b| b.rho1)
    }

    /// Upper envelope at `t`.
    pub fn rho2_at(&self, t: f64) -> Option<f64> {
        let idx = t.floor() as i64;
        self.buckets.iter().rev().find(|b| b.index <= idx).map(|b| b.rho2)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bucket,min,mean,max,rho1,rho2\n");
        for b in &self.buckets {
            writeln!(out, "{},{},{},{},{},{}", b.index, b.min, b.mean, b.max, b.rho1, b.rho2).unwrap();
        }
        out
    }
}

/// Buckets every pair by `floor(source distance)`. `ρ₂` is the running
/// maximum of bucket maxima from the left, `ρ₁` the running minimum of bucket
/// minima from the right.
pub fn compression_profile(vectors: &[Vec<f64>], dist: impl Fn(usize, usize) -> f64) -> CompressionProfile {
    let n = vectors.len();
    let mut acc: BTreeMap<i64, (usize, f64, f64, f64)> = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            let e = euclidean_distance(&vectors[i], &vectors[j]);
            let entry = acc.entry(dist(i, j).floor() as i64).or_insert((0, f64::INFINITY, 0.0, 0.0));
            entry.0 += 1;
            entry.1 = entry.1.min(e);
            entry.2 += e;
            entry.3 = entry.3.max(e);
        }
    }
    let mut buckets: Vec<Bucket> = acc
        .into_iter()
        .map(|(index, (count, min, sum, max))| Bucket {
            index,
            count,
            min,
            mean: sum / count as f64,
            max,
            rho1: 0.0,
            rho2: 0.0,
        })
        .collect();
    let mut running = 0.0f64;
    for b in buckets.iter_mut() {
        running = running.max(b.max);
        b.rho2 = running;
    }
    let mut running = f64::INFINITY;
    for b in buckets.iter_mut().rev() {
        running = running.min(b.min);
        b.rho1 = running;
    }
    CompressionProfile { buckets }
}

/// Logarithm base `d`.
fn log_base(x: f64, d: usize) -> f64 {
    x.ln() / (d as f64).ln()
}

/// A chain of graphs joined at vertex 0 of each member by paths long enough
/// that members sit far apart relative to their diameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleSchedule {
    pub degree: usize,
    pub sizes: Vec<usize>,
    pub diameters: Vec<usize>,
    /// Length of the link from member `k` to member `k + 1`:
    /// `diam_k + diam_{k+1} + 2^{k+1}`.
    pub links: Vec<f64>,
    /// Norm of vertex 0 of each member (the base point is vertex 0 of the
    /// first member).
    pub offsets: Vec<f64>,
    /// `log_d(n / 4)` per member.
    pub far_thresholds: Vec<f64>,
    /// Scale budget of every vertex, per member.
    pub budgets: Vec<Vec<f64>>,
}

impl ScaleSchedule {
    /// Distance between vertex `x` of member `a` and vertex `y` of member `b`.
    pub fn distance(&self, members: &[Graph], a: usize, x: usize, b: usize, y: usize) -> f64 {
        if a == b {
            return members[a].bfs(x)[y] as f64;
        }
        let (a, x, b, y) = if a < b { (a, x, b, y) } else { (b, y, a, x) };
        members[a].bfs(0)[x] as f64 + self.links[a..b].iter().sum::<f64>() + members[b].bfs(0)[y] as f64
    }

    /// `n(t)`: the smallest member size among members reaching norm `t`.
    pub fn n_at(&self, members: &[Graph], t: f64) -> Option<usize> {
        (0..self.sizes.len())
            .filter(|&k| {
                let ecc = members[k].bfs(0).into_iter().max().unwrap_or(0) as f64;
                self.offsets[k] + ecc >= t
            })
            .map(|k| self.sizes[k])
            .min()
    }
}

/// Places the members of a family in a chain and assigns every vertex the
/// budget `log_d(n(‖x‖)) / 4 − 1e-9`. Asserts that `n(t)` is non-decreasing
/// and that the budget grows along the chain.
pub fn scale_schedule(members: &[Graph]) -> Result<ScaleSchedule> {
    let degree = members.first().map_or(0, Graph::degree);
    if degree < 2 {
        return Err(Error::InvalidGraph("scale schedule needs degree >= 2".into()));
    }
    let sizes: Vec<usize> = members.iter().map(Graph::n).collect();
    let diameters: Vec<usize> = members
        .iter()
        .map(|g| {
            (0..g.n()).map(|v| g.bfs(v).into_iter().max().unwrap_or(0)).max().unwrap_or(0)
        })
        .collect();
    if diameters.iter().any(|&d| d == usize::MAX) {
        return Err(Error::InvalidGraph("family member is disconnected".into()));
    }
    let links: Vec<f64> = (0..members.len().saturating_sub(1))
        .map(|k| (diameters[k] + diameters[k + 1]) as f64 + 2f64.powi(k as i32 + 1))
        .collect();
    let mut offsets = vec![0.0; members.len()];
    for k in 1..members.len() {
        offsets[k] = offsets[k - 1] + links[k - 1];
    }
    let schedule = ScaleSchedule {
        degree,
        far_thresholds: sizes.iter().map(|&n| log_base(n as f64 / 4.0, degree)).collect(),
        budgets: Vec::new(),
        sizes,
        diameters,
        links,
        offsets,
    };
    let mut budgets = Vec::with_capacity(members.len());
    let mut last_n = 0usize;
    for (k, g) in members.iter().enumerate() {
        let norms = g.bfs(0);
        let mut row = Vec::with_capacity(g.n());
        let mut by_norm: Vec<(usize, usize)> = norms.iter().copied().enumerate().map(|(v, h)| (h, v)).collect();
        by_norm.sort_unstable();
        row.resize(g.n(), 0.0);
        for (h, v) in by_norm {
            let t = schedule.offsets[k] + h as f64;
            let n = schedule.n_at(members, t).expect("member reaches its own norms");
            if n < last_n {
                return Err(Error::Assertion(format!("n(t) decreases at t = {t}")));
            }
            last_n = n;
            row[v] = log_base(n as f64, degree) / 4.0 - 1e-9;
        }
        budgets.push(row);
    }
    for k in 1..budgets.len() {
        let prev = budgets[k - 1].iter().copied().fold(f64::INFINITY, f64::min);
        let cur = budgets[k].iter().copied().fold(f64::INFINITY, f64::min);
        if cur < prev {
            return Err(Error::Assertion(format!("scale budget drops from member {} to {k}", k - 1)));
        }
    }
    Ok(ScaleSchedule { budgets, ..schedule })
}

/// Exact count of pairs at distance at least `log_d(n/4)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FarPairCensus {
    pub n: usize,
    pub degree: usize,
    pub threshold: f64,
    pub far_pairs: usize,
    pub near_pairs: usize,
    /// `far_pairs / (n(n−1)/2)`.
    pub fraction: f64,
    /// Whether `far_pairs >= n²/8`.
    pub meets_n2_over_8: bool,
    /// Most vertices at distance below the threshold from one vertex.
    pub max_near_per_vertex: usize,
    /// `2 d^⌈threshold⌉`.
    pub ball_bound: f64,
}

pub fn far_pair_census(g: &Graph) -> Result<FarPairCensus> {
    let (n, d) = (g.n(), g.degree());
    if !g.is_connected() {
        return Err(Error::InvalidGraph("census needs a connected graph".into()));
    }
    let threshold = log_base(n as f64 / 4.0, d);
    let per_vertex: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .map(|x| {
            let h = g.bfs(x);
            let far = h.iter().enumerate().filter(|&(y, &hy)| y > x && hy as f64 >= threshold).count();
            let near = h.iter().enumerate().filter(|&(y, &hy)| y != x && (hy as f64) < threshold).count();
            (far, near)
        })
        .collect();
    let far_pairs: usize = per_vertex.iter().map(|p| p.0).sum();
    let total = n * (n - 1) / 2;
    Ok(FarPairCensus {
        n,
        degree: d,
        threshold,
        far_pairs,
        near_pairs: total - far_pairs,
        fraction: far_pairs as f64 / total as f64,
        meets_n2_over_8: 8 * far_pairs >= n * n,
        max_near_per_vertex: per_vertex.iter().map(|p| p.1).max().unwrap_or(0),
        ball_bound: 2.0 * (d as f64).powi(threshold.max(0.0).ceil() as i32),
    })
}

/// Smallest member size from which every later member has at least
/// `n²/8` far pairs.
pub fn census_onset(censuses: &[FarPairCensus]) -> Option<usize> {
    let tail = censuses.iter().rev().take_while(|c| c.meets_n2_over_8).count();
    (tail > 0).then(|| censuses[censuses.len() - tail].n)
}

/// Largest stretch of a vector map over the edges of `g`, which is its
/// Lipschitz constant for the graph metric.
pub fn graph_lipschitz(g: &Graph, vectors: &[Vec<f64>]) -> f64 {
    g.edges().iter().map(|&[a, b]| euclidean_distance(&vectors[a], &vectors[b])).fold(0.0, f64::max)
}

/// Scales `vectors` to Lipschitz constant 1 (constant maps are left alone);
/// returns the factor applied.
pub fn normalize_lipschitz(g: &Graph, vectors: &mut [Vec<f64>]) -> f64 {
    let l = graph_lipschitz(g, vectors);
    if l <= 0.0 {
        return 1.0;
    }
    let s = 1.0 / l;
    vectors.iter_mut().for_each(|v| v.iter_mut().for_each(|x| *x *= s));
    s
}

/// Coordinates from the eigenvectors of the `k` smallest positive Laplacian
/// eigenvalues, scaled to be 1-Lipschitz.
pub fn spectral_embedding(g: &Graph, k: usize) -> Vec<Vec<f64>> {
    let (values, vectors) = spectrum(g);
    let first = values.iter().position(|&v| v > crate::spectral::EIGEN_TOL).unwrap_or(values.len());
    let cols: Vec<usize> = (first..values.len()).take(k).collect();
    let mut out: Vec<Vec<f64>> = (0..g.n()).map(|r| cols.iter().map(|&c| vectors[(r, c)]).collect()).collect();
    normalize_lipschitz(g, &mut out);
    out
}

/// Data of the cover → nerve → barycentric embedding of a graph.
#[derive(Debug, Clone, Serialize)]
pub struct NerveEmbeddingInfo {
    pub cover_scale: f64,
    pub sets: usize,
    pub lebesgue: f64,
    pub projection_lambda: f64,
    pub nerve_dim: usize,
    pub c_n: f64,
    pub level: i32,
    /// Largest stretch of the barycentric embedding on nerve simplices.
    pub simplex_stretch: f64,
    pub lipschitz_factor: f64,
}

/// Greedy cover at `cover_scale`, projection onto its nerve with
/// `λ = lebesgue / 2`, and the barycentric embedding of the nerve as a
/// single-level C₀ complex with level `floor(log2(c_n λ))`. The result is
/// scaled to be 1-Lipschitz.
pub fn nerve_embedding(g: &Graph, cover_scale: f64) -> Result<(Vec<Vec<f64>>, NerveEmbeddingInfo)> {
    let x = graph_metric(g)?;
    let cover = greedy_cover(&x, cover_scale, 8)?;
    let stats = cover_stats(&x, &cover);
    let lambda = stats.lebesgue / 2.0;
    let proj = nerve_projection(&x, &cover, lambda)?;
    let level = (proj.c_n * lambda).log2().floor() as i32;
    let k = MetricComplex::new(
        cover.len(),
        proj.nerve.facets.clone(),
        ComplexMetric::C0 { levels: vec![level; cover.len()] },
    )?;
    let emb = hilbert_embed(&k, &proj.points, 0)?;
    let simplex_stretch = emb.max_ratio;
    let mut vectors = emb.cloud.vectors;
    let factor = normalize_lipschitz(g, &mut vectors);
    let info = NerveEmbeddingInfo {
        cover_scale,
        sets: cover.len(),
        lebesgue: stats.lebesgue,
        projection_lambda: lambda,
        nerve_dim: proj.nerve.dim(),
        c_n: proj.c_n,
        level,
        simplex_stretch,
        lipschitz_factor: factor,
    };
    Ok((vectors, info))
}

/// One row of the obstruction audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictRow {
    pub source: String,
    pub n: usize,
    pub lambda1: f64,
    pub c0: f64,
    pub threshold: f64,
    pub far_pairs: usize,
    pub far_fraction: f64,
    /// Whether the member has at least `n²/8` far pairs.
    pub gated: bool,
    pub min_far_sq: f64,
    pub witness: Option<(usize, usize)>,
    pub bound_4c0: f64,
    pub rho1_at_threshold: f64,
    pub rho1_ceiling: f64,
    /// Factor applied to make the map 1-Lipschitz.
    pub rescale: f64,
    pub pass: bool,
}

/// Relative tolerance of the audit inequalities.
pub const AUDIT_TOL: f64 = 1e-6;

/// Audits one graph: rescales `vectors` to be 1-Lipschitz, finds the far pair
/// (distance at least `log_d(n/4)`) with the smallest squared image distance
/// and compares it with `4 c₀`; also compares the fitted lower envelope at
/// the threshold with `2 sqrt(c₀)`.
pub fn audit_member(g: &Graph, report: &SpectralReport, source: &str, vectors: &[Vec<f64>]) -> VerdictRow {
    let mut f = vectors.to_vec();
    let rescale = normalize_lipschitz(g, &mut f);
    let n = g.n();
    let census = far_pair_census(g).expect("family members are connected");
    let dist: Vec<Vec<usize>> = (0..n).into_par_iter().map(|x| g.bfs(x)).collect();
    let (min_far_sq, witness) = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut best = (f64::INFINITY, None);
            for y in x + 1..n {
                if dist[x][y] as f64 >= census.threshold {
                    let s = squared_distance(&f[x], &f[y]);
                    if s < best.0 {
                        best = (s, Some((x, y)));
                    }
                }
            }
            best
        })
        .reduce(|| (f64::INFINITY, None), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    let profile = compression_profile(&f, |i, j| dist[i][j] as f64);
    let rho1 = profile.rho1_at(census.threshold.ceil()).unwrap_or(f64::INFINITY);
    let c0 = report.c0;
    let bound = 4.0 * c0;
    let ceiling = 2.0 * c0.sqrt();
    let pass = min_far_sq <= bound * (1.0 + AUDIT_TOL) && rho1 <= ceiling * (1.0 + AUDIT_TOL);
    VerdictRow {
        source: source.to_string(),
        n,
        lambda1: report.lambda1,
        c0,
        threshold: census.threshold,
        far_pairs: census.far_pairs,
        far_fraction: census.fraction,
        gated: census.meets_n2_over_8,
        min_far_sq,
        witness,
        bound_4c0: bound,
        rho1_at_threshold: rho1,
        rho1_ceiling: ceiling,
        rescale,
        pass,
    }
}

/// Verdict table CSV.
pub fn verdict_csv(rows: &[VerdictRow]) -> String {
    let mut out = String::from(
        "source,n,lambda1,c0,threshold,min_far_sq,bound_4c0,pass,far_pairs,far_fraction,gated,rho1,rho1_ceiling,rescale\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.source,
            r.n,
            r.lambda1,
            r.c0,
            r.threshold,
            r.min_far_sq,
            r.bound_4c0,
            r.pass,
            r.far_pairs,
            r.far_fraction,
            r.gated,
            r.rho1_at_threshold,
            r.rho1_ceiling,
            r.rescale
        )
        .unwrap();
    }
    out
}

/// Options for [`generate_c0_complex`].
#[derive(Debug, Clone)]
pub struct C0GenOptions {
    pub dim: usize,
    pub max_vertices: usize,
    pub min_level: i32,
    pub max_level: i32,
}

impl Default for C0GenOptions {
    fn default() -> Self {
        Self { dim: 2, max_vertices: 200, min_level: 0, max_level: 8 }
    }
}

/// Random class-C₀ complex: a chain of strips of `dim`-simplices, one strip
/// per block, whose levels follow a ±1 random walk inside
/// `[min_level, max_level]`. Consecutive strips are glued by one mixed
/// simplex built from the last vertices of one strip and the first vertices
/// of the next, so no vertex meets both a lower and a higher level.
pub fn generate_c0_complex(rng: &mut impl Rng, opts: &C0GenOptions) -> Result<MetricComplex> {
    let m = opts.dim.max(1);
    let mut levels: Vec<i32> = Vec::new();
    let mut facets: Vec<Vec<usize>> = Vec::new();
    let mut level = rng.gen_range(opts.min_level..=opts.max_level);
    let mut prev_exit: Option<Vec<usize>> = None;
    loop {
        let width = rng.gen_range(2 * (m + 1)..=2 * (m + 1) + 4);
        if levels.len() + width > opts.max_vertices {
            break;
        }
        let start = levels.len();
        levels.extend(std::iter::repeat(level).take(width));
        let block: Vec<usize> = (start..start + width).collect();
        for w in block.windows(m + 1) {
            facets.push(w.to_vec());
        }
        if let Some(exit) = prev_exit.take() {
            let mut mixed = exit;
            mixed.extend(&block[..m + 1 - mixed.len()]);
            facets.push(mixed);
        }
        let k = rng.gen_range(1..=m);
        prev_exit = Some(block[width - k..].to_vec());
        let up = if level == opts.max_level {
            false
        } else if level == opts.min_level {
            true
        } else {
            rng.gen_bool(0.5)
        };
        if opts.max_level > opts.min_level {
            level += if up { 1 } else { -1 };
        }
    }
    MetricComplex::new(levels.len(), facets, ComplexMetric::C0 { levels })
}

/// A random point of facet `f`: uniform barycentric weights, sometimes
/// restricted to a proper face.
pub fn random_point_in(k: &MetricComplex, f: usize, rng: &mut impl Rng) -> ComplexPoint {
    let facet = &k.facets()[f];
    let mut w: Vec<f64> = facet.iter().map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    if rng.gen_bool(0.05) {
        let keep = rng.gen_range(0..w.len());
        w.iter_mut().enumerate().for_each(|(i, x)| if i != keep { *x = 0.0 });
    } else if w.len() > 1 && rng.gen_bool(0.15) {
        let drop = rng.gen_range(0..w.len());
        w[drop] = 0.0;
    }
    ComplexPoint::new(facet.iter().copied().zip(w)).expect("positive weights")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c0(n: usize, simplices: Vec<Vec<usize>>, levels: Vec<i32>) -> MetricComplex {
        MetricComplex::new(n, simplices, ComplexMetric::C0 { levels }).unwrap()
    }

    #[test]
    fn single_simplex_scale_is_constant() {
        let k = c0(3, vec![vec![0, 1, 2]], vec![2, 2, 2]);
        let pts = vec![ComplexPoint::vertex(0), ComplexPoint::barycenter(&[0, 1, 2]), ComplexPoint::barycenter(&[1, 2])];
        let s = edge_scale_function(&k, &pts, 1).unwrap();
        assert_eq!(s.l, vec![4.0; 3]);
        assert_eq!(s.rho, vec![4.0; 3]);
    }

    #[test]
    fn shared_vertex_takes_smaller_edge() {
        // Δ_2 on {0,1,2} and Δ̃_2 on {2,3} with vertex 3 on level 2.
        let k = c0(4, vec![vec![0, 1, 2], vec![2, 3]], vec![1, 1, 1, 2]);
        assert_eq!(l_value(&k, &ComplexPoint::vertex(2)), 2.0);
        assert_eq!(l_value(&k, &ComplexPoint::vertex(3)), 4.0);
    }

    #[test]
    fn vertex_image_and_edge_pairs() {
        let k = c0(3, vec![vec![0, 1, 2]], vec![0, 0, 0]);
        let pts = vec![ComplexPoint::vertex(0), ComplexPoint::vertex(1), ComplexPoint::barycenter(&[0, 1])];
        let e = hilbert_embed(&k, &pts, 1).unwrap();
        assert_eq!(e.cloud.vectors[0], vec![1.0, 0.0, 0.0]);
        let d01 = euclidean_distance(&e.cloud.vectors[0], &e.cloud.vectors[1]);
        assert!((d01 - 2f64.sqrt()).abs() < 1e-12 && d01 <= 3.0);
        assert_eq!(e.pairs_checked, 3);
    }

    #[test]
    fn isometric_and_constant_profiles() {
        let line: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let p = compression_profile(&line, |i, j| (i as f64 - j as f64).abs());
        for b in &p.buckets {
            assert_eq!((b.rho1, b.rho2), (b.index as f64, b.index as f64));
        }
        let flat = vec![vec![0.0]; 5];
        let p = compression_profile(&flat, |i, j| (i as f64 - j as f64).abs());
        assert!(p.buckets.iter().all(|b| b.rho1 == 0.0 && b.rho2 == 0.0));
    }

    #[test]
    fn census_partitions_pairs() {
        let g = crate::spectral::random_regular(64, 4, 9).unwrap();
        let c = far_pair_census(&g).unwrap();
        assert!((c.threshold - 2.0).abs() < 1e-12);
        assert_eq!(c.far_pairs + c.near_pairs, 64 * 63 / 2);
        assert!(c.max_near_per_vertex as f64 <= c.ball_bound);
    }

    #[test]
    fn generated_complexes_are_class_c0() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dim in 1..=3 {
            let k = generate_c0_complex(&mut rng, &C0GenOptions { dim, ..Default::default() }).unwrap();
            assert!(k.n_vertices() <= 200 && k.is_connected());
            assert_eq!(k.dim(), dim);
        }
    }

    #[test]
    fn cloud_json_round_trip() {
        let cloud = EmbeddedCloud {
            provenance: "test".into(),
            labels: (0..3).map(|i| i.to_string()).collect(),
            vectors: vec![vec![0.0, 1.5], vec![2.0, -1.0], vec![0.1, 0.2]],
        };
        assert_eq!(EmbeddedCloud::from_json(&cloud.to_json()).unwrap(), cloud);
    }
}
