//! Finite simplicial complexes carrying a metric.
//!
//! A [`MetricComplex`] is stored by its facets (maximal simplices). Three
//! metric structures are supported:
//!
//! * `Uniform { size }`: every simplex is a regular simplex with edge `size`.
//! * `C0 { levels }`: every vertex carries an integer level and the edge
//!   `{u, v}` has length `2^max(level u, level v)`. A simplex whose vertices
//!   all sit on level `i` is the regular `Δ_{2^i}`; one spanning levels
//!   `i, i+1` is the mixed `Δ̃_{2^i}` with edges `2^i` and `2^{i+1}`.
//! * `Euclidean { lengths }`: explicit edge lengths (barycentric subdivisions
//!   inherit these from the realization of the parent).
//!
//! Points are [`ComplexPoint`]s: barycentric coordinates on their minimal
//! carrier simplex.

mod approx;
mod geodesic;
pub mod geometry;
mod subdivide;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use approx::{random_pl_map, simplicial_approximation, ApproxOptions, Approximation, PLMap, StarCheck};
pub use geodesic::{complex_distance, GeodesicGraph};
pub use geometry::{inradius, RealizedSimplex};
pub use subdivide::{barycentric_subdivide, Subdivision};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ComplexMetric {
    Uniform { size: f64 },
    C0 { levels: Vec<i32> },
    Euclidean { lengths: BTreeMap<(usize, usize), f64> },
}

/// Shape of a facet in a class-C₀ complex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum C0Type {
    /// `Δ_{2^i}`: all edges `2^i`.
    Regular(i32),
    /// `Δ̃_{2^i}`: edges `2^i` and `2^{i+1}`.
    Mixed(i32),
}

#[derive(Debug, Clone)]
pub struct MetricComplex {
    n_vertices: usize,
    facets: Vec<Vec<usize>>,
    metric: ComplexMetric,
    vertex_facets: Vec<Vec<usize>>,
    realized: Vec<OnceLock<RealizedSimplex>>,
}

impl PartialEq for MetricComplex {
    fn eq(&self, other: &Self) -> bool {
        self.n_vertices == other.n_vertices && self.facets == other.facets && self.metric == other.metric
    }
}

impl MetricComplex {
    /// Builds the downward closure of `simplices`. Vertices `0..n_vertices`
    /// that appear in no simplex become isolated 0-simplices.
    pub fn new(n_vertices: usize, simplices: Vec<Vec<usize>>, metric: ComplexMetric) -> Result<Self> {
        let mut sorted: Vec<Vec<usize>> = Vec::with_capacity(simplices.len());
        let mut used = vec![false; n_vertices];
        for mut s in simplices {
            if s.is_empty() {
                return Err(Error::InvalidComplex("empty simplex".into()));
            }
            s.sort_unstable();
            if s.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidComplex(format!("repeated vertex in simplex {s:?}")));
            }
            if let Some(&v) = s.iter().find(|&&v| v >= n_vertices) {
                return Err(Error::InvalidComplex(format!("vertex {v} out of range")));
            }
            s.iter().for_each(|&v| used[v] = true);
            sorted.push(s);
        }
        for (v, u) in used.iter().enumerate() {
            if !u {
                sorted.push(vec![v]);
            }
        }
        // Keep only maximal simplices: larger ones first, drop contained ones.
        sorted.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        sorted.dedup();
        let mut vertex_facets: Vec<Vec<usize>> = vec![Vec::new(); n_vertices];
        let mut facets: Vec<Vec<usize>> = Vec::new();
        for s in sorted {
            let contained = vertex_facets[s[0]].iter().any(|&f| is_subset(&s, &facets[f]));
            if !contained {
                let idx = facets.len();
                s.iter().for_each(|&v| vertex_facets[v].push(idx));
                facets.push(s);
            }
        }
        let realized = (0..facets.len()).map(|_| OnceLock::new()).collect();
        let complex = Self { n_vertices, facets, metric, vertex_facets, realized };
        complex.validate()?;
        Ok(complex)
    }

    fn validate(&self) -> Result<()> {
        match &self.metric {
            ComplexMetric::Uniform { size } => {
                if !(*size > 0.0 && size.is_finite()) {
                    return Err(Error::InvalidComplex(format!("uniform size {size} must be positive")));
                }
            }
            ComplexMetric::C0 { levels } => {
                if levels.len() != self.n_vertices {
                    return Err(Error::InvalidComplex(format!(
                        "{} levels for {} vertices",
                        levels.len(),
                        self.n_vertices
                    )));
                }
                self.check_c0_adjacency()?;
            }
            ComplexMetric::Euclidean { lengths } => {
                for f in &self.facets {
                    for (a, &u) in f.iter().enumerate() {
                        for &v in &f[a + 1..] {
                            match lengths.get(&(u, v)) {
                                Some(&l) if l > 0.0 && l.is_finite() => {}
                                _ => {
                                    return Err(Error::InvalidComplex(format!("missing or invalid length for edge ({u},{v})")))
                                }
                            }
                        }
                    }
                }
            }
        }
        for (i, f) in self.facets.iter().enumerate() {
            if f.len() > 1 && self.try_realize(i).is_none() {
                return Err(Error::InvalidComplex(format!("facet {f:?} is not a Euclidean simplex")));
            }
        }
        Ok(())
    }

    /// Class-C₀ rules: a simplex spans at most two consecutive levels, and two
    /// intersecting simplices are of the same type, or of types `Δ_{2^i}` and
    /// `Δ̃_{2^i}`, or `Δ_{2^i}` and `Δ̃_{2^{i-1}}`. With per-vertex levels the
    /// second rule says no vertex has neighbours both below and above it.
    fn check_c0_adjacency(&self) -> Result<()> {
        let levels = self.levels().expect("C0 metric");
        for f in &self.facets {
            let lo = f.iter().map(|&v| levels[v]).min().unwrap();
            let hi = f.iter().map(|&v| levels[v]).max().unwrap();
            if hi - lo > 1 {
                return Err(Error::NotClassC0(format!("simplex {f:?} spans levels {lo}..{hi}")));
            }
        }
        for v in 0..self.n_vertices {
            let lv = levels[v];
            let mut below = None;
            let mut above = None;
            for &f in &self.vertex_facets[v] {
                for &w in &self.facets[f] {
                    if levels[w] < lv {
                        below = Some(w);
                    }
                    if levels[w] > lv {
                        above = Some(w);
                    }
                }
            }
            if let (Some(b), Some(a)) = (below, above) {
                return Err(Error::NotClassC0(format!(
                    "vertex {v} (level {lv}) meets level {} at {b} and level {} at {a}",
                    levels[b], levels[a]
                )));
            }
        }
        Ok(())
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn facets(&self) -> &[Vec<usize>] {
        &self.facets
    }

    pub fn metric(&self) -> &ComplexMetric {
        &self.metric
    }

    pub fn dim(&self) -> usize {
        self.facets.iter().map(|f| f.len() - 1).max().unwrap_or(0)
    }

    pub fn levels(&self) -> Option<&[i32]> {
        match &self.metric {
            ComplexMetric::C0 { levels } => Some(levels),
            _ => None,
        }
    }

    pub fn facets_of_vertex(&self, v: usize) -> &[usize] {
        &self.vertex_facets[v]
    }

    pub fn edge_length(&self, u: usize, v: usize) -> f64 {
        if u == v {
            return 0.0;
        }
        match &self.metric {
            ComplexMetric::Uniform { size } => *size,
            ComplexMetric::C0 { levels } => 2f64.powi(levels[u].max(levels[v])),
            ComplexMetric::Euclidean { lengths } => lengths[&(u.min(v), u.max(v))],
        }
    }

    /// Facets containing every vertex of `s` (sorted).
    pub fn facets_containing<'a>(&'a self, s: &'a [usize]) -> impl Iterator<Item = usize> + 'a {
        let first = s.first().copied();
        first
            .into_iter()
            .flat_map(move |v| self.vertex_facets[v].iter().copied())
            .filter(move |&f| is_subset(s, &self.facets[f]))
    }

    pub fn is_simplex(&self, s: &[usize]) -> bool {
        self.facets_containing(s).next().is_some()
    }

    /// Lowest-index facet containing the carrier of `p`.
    pub fn carrier_facet(&self, p: &ComplexPoint) -> Option<usize> {
        self.facets_containing(p.carrier()).next()
    }

    fn try_realize(&self, facet: usize) -> Option<&RealizedSimplex> {
        if let Some(r) = self.realized[facet].get() {
            return Some(r);
        }
        let f = &self.facets[facet];
        let lengths: Vec<Vec<f64>> = f.iter().map(|&u| f.iter().map(|&v| self.edge_length(u, v)).collect()).collect();
        let r = RealizedSimplex::from_lengths(f.clone(), &lengths)?;
        Some(self.realized[facet].get_or_init(|| r))
    }

    /// Euclidean realization of a facet.
    pub fn realize(&self, facet: usize) -> &RealizedSimplex {
        self.try_realize(facet).expect("facets are validated on construction")
    }

    /// Straight-line distance between two points lying in a common simplex;
    /// `None` otherwise.
    pub fn chord(&self, p: &ComplexPoint, q: &ComplexPoint) -> Option<f64> {
        let union = union_sorted(p.carrier(), q.carrier());
        let f = self.facets_containing(&union).next()?;
        Some(self.realize(f).distance(&p.weights(), &q.weights()))
    }

    /// `l(Δ)`: the shortest edge of facet `f`. For an isolated vertex this is
    /// its own scale (`size`, or `2^level`).
    pub fn min_edge(&self, f: usize) -> f64 {
        let facet = &self.facets[f];
        if facet.len() == 1 {
            return match &self.metric {
                ComplexMetric::Uniform { size } => *size,
                ComplexMetric::C0 { levels } => 2f64.powi(levels[facet[0]]),
                ComplexMetric::Euclidean { .. } => f64::INFINITY,
            };
        }
        let mut best = f64::INFINITY;
        for (a, &u) in facet.iter().enumerate() {
            for &v in &facet[a + 1..] {
                best = best.min(self.edge_length(u, v));
            }
        }
        best
    }

    pub fn c0_type(&self, f: usize) -> Option<C0Type> {
        let levels = self.levels()?;
        let facet = &self.facets[f];
        let lo = facet.iter().map(|&v| levels[v]).min()?;
        let hi = facet.iter().map(|&v| levels[v]).max()?;
        Some(if lo == hi { C0Type::Regular(lo) } else { C0Type::Mixed(lo) })
    }

    /// Longest edge over all facets.
    pub fn mesh(&self) -> f64 {
        let mut best = 0.0f64;
        for f in &self.facets {
            for (a, &u) in f.iter().enumerate() {
                for &v in &f[a + 1..] {
                    best = best.max(self.edge_length(u, v));
                }
            }
        }
        best
    }

    /// Smallest inradius over facets of positive dimension.
    pub fn min_inradius(&self) -> f64 {
        (0..self.facets.len())
            .filter(|&f| self.facets[f].len() > 1)
            .map(|f| self.realize(f).inradius())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_connected(&self) -> bool {
        if self.n_vertices == 0 {
            return true;
        }
        let mut seen = vec![false; self.n_vertices];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &f in &self.vertex_facets[v] {
                for &w in &self.facets[f] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Every simplex (all faces of all facets). Exponential in the dimension.
    pub fn simplices(&self) -> BTreeSet<Vec<usize>> {
        let mut out = BTreeSet::new();
        for f in &self.facets {
            let k = f.len();
            for mask in 1u64..(1u64 << k) {
                out.insert((0..k).filter(|i| mask & (1 << i) != 0).map(|i| f[i]).collect());
            }
        }
        out
    }

    /// Undirected edges of the 1-skeleton, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut set = BTreeSet::new();
        for f in &self.facets {
            for (a, &u) in f.iter().enumerate() {
                for &v in &f[a + 1..] {
                    set.insert((u, v));
                }
            }
        }
        set.into_iter().collect()
    }

    pub fn to_json(&self) -> String {
        let mut obj = serde_json::Map::new();
        match &self.metric {
            ComplexMetric::Uniform { size } => {
                obj.insert("metric".into(), "uniform".into());
                obj.insert("lambda".into(), (*size).into());
            }
            ComplexMetric::C0 { levels } => {
                obj.insert("metric".into(), "c0".into());
                let map: serde_json::Map<String, Value> =
                    levels.iter().enumerate().map(|(v, &l)| (v.to_string(), l.into())).collect();
                obj.insert("levels".into(), Value::Object(map));
            }
            ComplexMetric::Euclidean { lengths } => {
                obj.insert("metric".into(), "euclidean".into());
                let list: Vec<Value> =
                    lengths.iter().map(|(&(u, v), &l)| serde_json::json!([u, v, l])).collect();
                obj.insert("lengths".into(), Value::Array(list));
            }
        }
        obj.insert("n_vertices".into(), self.n_vertices.into());
        obj.insert("simplices".into(), serde_json::to_value(&self.facets).unwrap());
        serde_json::to_string(&Value::Object(obj)).unwrap()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ComplexFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<complex>".into(),
            msg: e.to_string(),
        })?;
        file.into_complex()
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct ComplexFile {
    metric: String,
    #[serde(default)]
    lambda: Option<f64>,
    #[serde(default)]
    levels: Option<BTreeMap<String, i32>>,
    #[serde(default)]
    lengths: Option<Vec<(usize, usize, f64)>>,
    #[serde(default)]
    n_vertices: Option<usize>,
    simplices: Vec<Vec<usize>>,
}

impl ComplexFile {
    pub(crate) fn into_complex(self) -> Result<MetricComplex> {
        let max_v = self.simplices.iter().flatten().copied().max().map_or(0, |m| m + 1);
        let n = self.n_vertices.unwrap_or(max_v).max(max_v);
        let metric = match self.metric.as_str() {
            "uniform" => ComplexMetric::Uniform { size: self.lambda.unwrap_or(1.0) },
            "c0" => {
                let map = self.levels.ok_or_else(|| Error::InvalidComplex("c0 complex needs levels".into()))?;
                let mut levels = vec![None; n];
                for (k, l) in map {
                    let v: usize = k
                        .trim()
                        .parse()
                        .map_err(|_| Error::InvalidComplex(format!("level key {k:?} is not a vertex id")))?;
                    if v >= n {
                        return Err(Error::InvalidComplex(format!("level for unknown vertex {v}")));
                    }
                    levels[v] = Some(l);
                }
                let levels = levels
                    .into_iter()
                    .enumerate()
                    .map(|(v, l)| l.ok_or_else(|| Error::InvalidComplex(format!("vertex {v} has no level"))))
                    .collect::<Result<Vec<_>>>()?;
                ComplexMetric::C0 { levels }
            }
            "euclidean" => {
                let list = self.lengths.ok_or_else(|| Error::InvalidComplex("euclidean complex needs lengths".into()))?;
                ComplexMetric::Euclidean { lengths: list.into_iter().map(|(u, v, l)| ((u.min(v), u.max(v)), l)).collect() }
            }
            other => return Err(Error::InvalidComplex(format!("unknown metric kind {other:?}"))),
        };
        MetricComplex::new(n, self.simplices, metric)
    }
}

/// Identity map onto the uniform complex of size 1 with the same
/// combinatorics. Returns that complex and the scale factor `2^i` of every
/// facet (`Δ_{2^i}` and `Δ̃_{2^i}` both have factor `2^i`).
pub fn uniformize(k: &MetricComplex) -> Result<(MetricComplex, Vec<f64>)> {
    if k.levels().is_none() {
        return Err(Error::InvalidComplex("uniformize expects a c0 complex".into()));
    }
    let uniform = MetricComplex::new(k.n_vertices(), k.facets().to_vec(), ComplexMetric::Uniform { size: 1.0 })?;
    let factors = (0..k.facets().len())
        .map(|f| match k.c0_type(f).unwrap() {
            C0Type::Regular(i) | C0Type::Mixed(i) => 2f64.powi(i),
        })
        .collect();
    Ok((uniform, factors))
}

/// A point of a complex: barycentric coordinates on its minimal carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoint {
    vertices: Vec<usize>,
    coords: Vec<f64>,
}

/// Coordinates at or below this are treated as zero when canonicalizing.
const COORD_EPS: f64 = 1e-15;

impl ComplexPoint {
    /// Merges repeated vertices, drops zero weights and normalizes to sum 1.
    pub fn new(pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut map: BTreeMap<usize, f64> = BTreeMap::new();
        for (v, w) in pairs {
            if !w.is_finite() || w < -1e-12 {
                return Err(Error::InvalidComplex(format!("invalid barycentric weight {w} at vertex {v}")));
            }
            *map.entry(v).or_insert(0.0) += w;
        }
        let total: f64 = map.values().filter(|w| **w > COORD_EPS).sum();
        if total <= 0.0 {
            return Err(Error::InvalidComplex("barycentric weights sum to zero".into()));
        }
        // Leave already-normalized input untouched so serialized points round-trip exactly.
        let scale = if (total - 1.0).abs() <= 4.0 * f64::EPSILON { 1.0 } else { total };
        let (vertices, coords) = map.into_iter().filter(|&(_, w)| w > COORD_EPS).map(|(v, w)| (v, w / scale)).unzip();
        Ok(Self { vertices, coords })
    }

    pub fn vertex(v: usize) -> Self {
        Self { vertices: vec![v], coords: vec![1.0] }
    }

    pub fn barycenter(simplex: &[usize]) -> Self {
        let w = 1.0 / simplex.len() as f64;
        Self::new(simplex.iter().map(|&v| (v, w))).expect("non-empty simplex")
    }

    /// Minimal carrier simplex (sorted vertex ids).
    pub fn carrier(&self) -> &[usize] {
        &self.vertices
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> Vec<(usize, f64)> {
        self.vertices.iter().copied().zip(self.coords.iter().copied()).collect()
    }

    pub fn coord(&self, v: usize) -> f64 {
        self.vertices.binary_search(&v).map_or(0.0, |i| self.coords[i])
    }

    /// `(1 - t)·self + t·other` in barycentric coordinates.
    pub fn lerp(&self, other: &Self, t: f64) -> Self {
        let pairs = self
            .weights()
            .into_iter()
            .map(|(v, w)| (v, (1.0 - t) * w))
            .chain(other.weights().into_iter().map(|(v, w)| (v, t * w)));
        Self::new(pairs).expect("convex combination")
    }

    /// Dense barycentric vector over `n` vertices.
    pub fn dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (&v, &w) in self.vertices.iter().zip(&self.coords) {
            out[v] = w;
        }
        out
    }
}

pub(crate) fn is_subset(small: &[usize], big: &[usize]) -> bool {
    let mut j = 0;
    for &x in small {
        while j < big.len() && big[j] < x {
            j += 1;
        }
        if j == big.len() || big[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

pub(crate) fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|x| b.binary_search(x).is_ok()).collect()
}

pub(crate) fn union_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}
