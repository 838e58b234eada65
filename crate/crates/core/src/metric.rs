//! Finite metric spaces, unit-length graphs and Lipschitz constants.
//!
//! A [`FiniteMetricSpace`] is a labelled point set with a validated distance
//! matrix and a declared base point, so that `‖x‖ = d(x, x₀)` is always
//! well defined. Graphs become metric spaces through [`graph_metric`], where
//! every edge has length one.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack allowed when checking triangle inequalities.
pub const TRIANGLE_TOL: f64 = 1e-9;

/// Points with a symmetric, zero-diagonal distance matrix satisfying the
/// triangle inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    dist: Vec<f64>,
    base: usize,
}

impl FiniteMetricSpace {
    /// Validates `dist` and builds the space. The base point is the first
    /// point unless set with [`FiniteMetricSpace::with_base`].
    pub fn new(labels: Vec<String>, dist: Vec<Vec<f64>>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidMetric("empty point set".into()));
        }
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidMetric(format!("distance matrix is not {n}x{n}")));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidMetric(format!("duplicate point label {l:?}")));
            }
        }
        let flat: Vec<f64> = dist.into_iter().flatten().collect();
        let space = Self { labels, dist: flat, base: 0 };
        space.validate()?;
        Ok(space)
    }

    /// Builds a space from a matrix known to be a metric (e.g. BFS distances).
    pub(crate) fn from_trusted(labels: Vec<String>, dist: Vec<f64>) -> Self {
        debug_assert_eq!(dist.len(), labels.len() * labels.len());
        Self { labels, dist, base: 0 }
    }

    fn validate(&self) -> Result<()> {
        let n = self.len();
        for i in 0..n {
            if self.d(i, i) != 0.0 {
                return Err(Error::InvalidMetric(format!("d({0},{0}) = {1} is not zero", self.labels[i], self.d(i, i))));
            }
            for j in 0..n {
                let dij = self.d(i, j);
                if !dij.is_finite() {
                    return Err(Error::InvalidMetric(format!("d({},{}) is not finite", self.labels[i], self.labels[j])));
                }
                if dij != self.d(j, i) {
                    return Err(Error::InvalidMetric(format!("d({},{}) is not symmetric", self.labels[i], self.labels[j])));
                }
                if i != j && dij <= 0.0 {
                    return Err(Error::InvalidMetric(format!(
                        "d({},{}) = {dij} must be positive",
                        self.labels[i], self.labels[j]
                    )));
                }
            }
        }
        if let Some((i, j, k)) = self.triangle_violation() {
            return Err(Error::InvalidMetric(format!(
                "triangle inequality fails: d({a},{c}) > d({a},{b}) + d({b},{c})",
                a = self.labels[i],
                b = self.labels[j],
                c = self.labels[k]
            )));
        }
        Ok(())
    }

    /// First triple `(i, j, k)` with `d(i,k) > d(i,j) + d(j,k) + TRIANGLE_TOL`.
    pub fn triangle_violation(&self) -> Option<(usize, usize, usize)> {
        let n = self.len();
        for i in 0..n {
            for j in 0..n {
                let dij = self.d(i, j);
                for k in 0..n {
                    if self.d(i, k) > dij + self.d(j, k) + TRIANGLE_TOL {
                        return Some((i, j, k));
                    }
                }
            }
        }
        None
    }

    pub fn with_base(mut self, base: usize) -> Result<Self> {
        if base >= self.len() {
            return Err(Error::UnknownPoint(base.to_string()));
        }
        self.base = base;
        Ok(self)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.labels.len() + j]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownPoint(label.to_string()))
    }

    pub fn base(&self) -> usize {
        self.base
    }

    /// `‖x‖ = d(x, x₀)` relative to the declared base point.
    pub fn norm(&self, i: usize) -> f64 {
        self.d(i, self.base)
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Diameter of a subset of points.
    pub fn subset_diameter(&self, points: &[usize]) -> f64 {
        let mut best = 0.0f64;
        for (a, &i) in points.iter().enumerate() {
            for &j in &points[a + 1..] {
                best = best.max(self.d(i, j));
            }
        }
        best
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.dist[i * n..(i + 1) * n]
    }

    pub fn to_json(&self) -> String {
        let file = MetricFile {
            points: self.labels.clone(),
            dist: (0..self.len()).map(|i| self.row(i).to_vec()).collect(),
            base: self.labels[self.base].clone(),
        };
        serde_json::to_string(&file).expect("metric serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MetricFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<metric>".into(),
            msg: e.to_string(),
        })?;
        let space = Self::new(file.points, file.dist)?;
        let base = space.index_of(&file.base)?;
        space.with_base(base)
    }
}

#[derive(Serialize, Deserialize)]
struct MetricFile {
    points: Vec<String>,
    dist: Vec<Vec<f64>>,
    base: String,
}

/// Simple undirected graph with a declared degree bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    degree: usize,
    edges: Vec<[usize; 2]>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(n: usize, edges: Vec<[usize; 2]>, degree: usize) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        let mut seen = HashSet::new();
        for &[a, b] in &edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!("edge ({a},{b}) out of range for n={n}")));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({a},{b})")));
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        for (v, nb) in adj.iter_mut().enumerate() {
            if nb.len() > degree {
                return Err(Error::InvalidGraph(format!(
                    "vertex {v} has degree {} above the bound {degree}",
                    nb.len()
                )));
            }
            nb.sort_unstable();
        }
        Ok(Self { n, degree, edges, adj })
    }

    /// Graph whose degree bound is its maximum degree.
    pub fn from_edges(n: usize, edges: Vec<[usize; 2]>) -> Result<Self> {
        let mut deg = vec![0usize; n];
        for &[a, b] in &edges {
            if a < n && b < n {
                deg[a] += 1;
                deg[b] += 1;
            }
        }
        let d = deg.into_iter().max().unwrap_or(0);
        Self::new(n, edges, d)
    }

    pub fn path(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|i| [i - 1, i]).collect()).expect("path graph")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycle needs at least 3 vertices");
        Self::new(n, (0..n).map(|i| [i, (i + 1) % n]).collect(), 2).expect("cycle graph")
    }

    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push([i, j]);
            }
        }
        Self::new(n, edges, n.saturating_sub(1)).expect("complete graph")
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Declared degree bound `d`.
    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn is_regular(&self) -> bool {
        self.adj.iter().all(|nb| nb.len() == self.degree)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }

    /// Hop distances from `src`; `usize::MAX` marks unreachable vertices.
    pub fn bfs(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n];
        let mut queue = VecDeque::new();
        dist[src] = 0;
        queue.push_back(src);
        while let Some(v) = queue.pop_front() {
            for &w in &self.adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.n == 0 || self.bfs(0).iter().all(|&d| d != usize::MAX)
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile { n: self.n, edges: self.edges.clone(), degree: self.degree };
        serde_json::to_string(&file).expect("graph serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<graph>".into(),
            msg: e.to_string(),
        })?;
        Self::new(file.n, file.edges, file.degree)
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    edges: Vec<[usize; 2]>,
    degree: usize,
}

/// Shortest-path metric with unit edge lengths. Vertices are labelled by
/// their index and vertex 0 is the base point.
pub fn graph_metric(g: &Graph) -> Result<FiniteMetricSpace> {
    let n = g.n();
    if n == 0 {
        return Err(Error::InvalidGraph("graph has no vertices".into()));
    }
    let mut dist = Vec::with_capacity(n * n);
    for v in 0..n {
        let row = g.bfs(v);
        if let Some(w) = row.iter().position(|&d| d == usize::MAX) {
            return Err(Error::Disconnected(v, w));
        }
        dist.extend(row.into_iter().map(|d| d as f64));
    }
    let labels = (0..n).map(|i| i.to_string()).collect();
    Ok(FiniteMetricSpace::from_trusted(labels, dist))
}

/// A map between two finite metric spaces, given by the index of each image.
#[derive(Debug, Clone)]
pub struct PointMap<'a> {
    pub domain: &'a FiniteMetricSpace,
    pub codomain: &'a FiniteMetricSpace,
    pub images: Vec<usize>,
}

impl<'a> PointMap<'a> {
    pub fn new(domain: &'a FiniteMetricSpace, codomain: &'a FiniteMetricSpace, images: Vec<usize>) -> Result<Self> {
        if images.len() != domain.len() {
            return Err(Error::InvalidMetric(format!(
                "map has {} images for {} domain points",
                images.len(),
                domain.len()
            )));
        }
        if let Some(&bad) = images.iter().find(|&&y| y >= codomain.len()) {
            return Err(Error::UnknownPoint(bad.to_string()));
        }
        Ok(Self { domain, codomain, images })
    }

    /// `L(f)`: the largest ratio `d(fx, fx') / d(x, x')` over distinct pairs.
    pub fn lipschitz_constant(&self) -> f64 {
        max_stretch(self.domain, |i, j| self.codomain.d(self.images[i], self.images[j])).ratio
    }

    pub fn compose(&self, outer: &PointMap<'a>) -> Result<PointMap<'a>> {
        if !std::ptr::eq(self.codomain, outer.domain) {
            return Err(Error::InvalidMetric("maps are not composable".into()));
        }
        let images = self.images.iter().map(|&y| outer.images[y]).collect();
        PointMap::new(self.domain, outer.codomain, images)
    }
}

/// Largest distance ratio together with a witnessing pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stretch {
    pub ratio: f64,
    pub pair: Option<(usize, usize)>,
}

/// `sup d'(i,j) / d(i,j)` over distinct pairs of `domain`, where `image_dist`
/// measures the images.
pub fn max_stretch(domain: &FiniteMetricSpace, image_dist: impl Fn(usize, usize) -> f64) -> Stretch {
    let mut best = Stretch { ratio: 0.0, pair: None };
    let n = domain.len();
    for i in 0..n {
        for j in i + 1..n {
            let r = image_dist(i, j) / domain.d(i, j);
            if r > best.ratio {
                best = Stretch { ratio: r, pair: Some((i, j)) };
            }
        }
    }
    best
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lipschitz constant of a vector-valued map on a metric space.
pub fn euclidean_stretch(domain: &FiniteMetricSpace, vectors: &[Vec<f64>]) -> Stretch {
    max_stretch(domain, |i, j| euclidean_distance(&vectors[i], &vectors[j]))
}

/// Closed ball `{x : d(x, center) <= r}`.
pub fn ball(space: &FiniteMetricSpace, center: usize, r: f64) -> Result<Vec<usize>> {
    if center >= space.len() {
        return Err(Error::UnknownPoint(center.to_string()));
    }
    if r < 0.0 || r.is_nan() {
        return Err(Error::InvalidMetric(format!("ball radius {r} must be non-negative")));
    }
    Ok((0..space.len()).filter(|&x| space.d(center, x) <= r).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallGrowth {
    pub k: usize,
    /// `2 d^k`.
    pub bound: f64,
    pub largest: usize,
    pub violator: Option<usize>,
}

impl BallGrowth {
    pub fn holds(&self) -> bool {
        self.violator.is_none()
    }
}

/// Checks `|B_k(v)| <= 1 + d + … + d^k <= 2 d^k` for every vertex.
pub fn ball_growth_check(g: &Graph, k: usize) -> Result<BallGrowth> {
    let d = g.degree();
    if d < 2 {
        return Err(Error::InvalidGraph(format!("ball growth needs degree bound >= 2, got {d}")));
    }
    let bound = 2.0 * (d as f64).powi(k as i32);
    let mut largest = 0;
    let mut violator = None;
    for v in 0..g.n() {
        let size = g.bfs(v).iter().filter(|&&h| h <= k).count();
        if size > largest {
            largest = size;
        }
        if size as f64 > bound && violator.is_none() {
            violator = Some(v);
        }
    }
    Ok(BallGrowth { k, bound, largest, violator })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn path_and_cycle_distances() {
        let m = graph_metric(&Graph::path(3)).unwrap();
        assert_eq!(m.d(0, 2), 2.0);
        let c4 = graph_metric(&Graph::cycle(4)).unwrap();
        assert_eq!(c4.d(0, 2), 2.0);
        assert_eq!(c4.d(1, 3), 2.0);
        let k5 = graph_metric(&Graph::complete(5)).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(k5.d(i, j), if i == j { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn disconnected_graph_names_a_pair() {
        let g = Graph::from_edges(4, vec![[0, 1], [2, 3]]).unwrap();
        match graph_metric(&g) {
            Err(Error::Disconnected(a, b)) => assert!((a < 2) != (b < 2)),
            other => panic!("expected disconnection error, got {other:?}"),
        }
    }

    #[test]
    fn graph_validation() {
        assert!(Graph::new(3, vec![[0, 0]], 2).is_err());
        assert!(Graph::new(3, vec![[0, 1], [1, 0]], 2).is_err());
        assert!(Graph::new(3, vec![[0, 1], [0, 2]], 1).is_err());
        assert!(Graph::new(3, vec![[0, 3]], 2).is_err());
    }

    #[test]
    fn lipschitz_examples() {
        let m = graph_metric(&Graph::path(4)).unwrap();
        let id = PointMap::new(&m, &m, (0..4).collect()).unwrap();
        assert_eq!(id.lipschitz_constant(), 1.0);
        let constant = PointMap::new(&m, &m, vec![2; 4]).unwrap();
        assert_eq!(constant.lipschitz_constant(), 0.0);

        let two = FiniteMetricSpace::new(labels(2), vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let far = FiniteMetricSpace::new(labels(2), vec![vec![0.0, 3.0], vec![3.0, 0.0]]).unwrap();
        let f = PointMap::new(&two, &far, vec![0, 1]).unwrap();
        assert_eq!(f.lipschitz_constant(), 3.0);
    }

    #[test]
    fn ball_examples() {
        let m = graph_metric(&Graph::path(3)).unwrap();
        assert_eq!(ball(&m, 1, 0.0).unwrap(), vec![1]);
        assert_eq!(ball(&m, 1, 1.0).unwrap(), vec![0, 1, 2]);
        assert!(ball(&m, 7, 1.0).is_err());
    }

    #[test]
    fn ball_growth_examples() {
        let c = Graph::cycle(20);
        let bg = ball_growth_check(&c, 3).unwrap();
        assert_eq!(bg.largest, 7);
        assert_eq!(bg.bound, 16.0);
        assert!(bg.holds());
        let bg0 = ball_growth_check(&c, 0).unwrap();
        assert_eq!((bg0.largest, bg0.bound), (1, 2.0));

        // Petersen graph: 3-regular, every 2-ball is the whole graph of 10 <= 13.
        let outer: Vec<[usize; 2]> = (0..5).map(|i| [i, (i + 1) % 5]).collect();
        let spokes: Vec<[usize; 2]> = (0..5).map(|i| [i, i + 5]).collect();
        let inner: Vec<[usize; 2]> = (0..5).map(|i| [5 + i, 5 + (i + 2) % 5]).collect();
        let petersen = Graph::new(10, [outer, spokes, inner].concat(), 3).unwrap();
        let bg = ball_growth_check(&petersen, 2).unwrap();
        assert_eq!(bg.bound, 18.0);
        assert!(bg.largest <= 13);
        assert!(bg.holds());
    }

    #[test]
    fn metric_rejects_bad_matrices() {
        let asym = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(FiniteMetricSpace::new(labels(2), asym).is_err());
        let zero = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert!(FiniteMetricSpace::new(labels(2), zero).is_err());
        let tri = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        assert!(FiniteMetricSpace::new(labels(3), tri).is_err());
    }

    #[test]
    fn json_round_trips_bit_exactly() {
        let m = FiniteMetricSpace::new(
            labels(3),
            vec![vec![0.0, 0.1, 0.30000000000000004], vec![0.1, 0.0, 0.2], vec![0.30000000000000004, 0.2, 0.0]],
        )
        .unwrap()
        .with_base(1)
        .unwrap();
        let text = m.to_json();
        let back = FiniteMetricSpace::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), text);

        let g = Graph::new(4, vec![[3, 1], [0, 2], [1, 2]], 3).unwrap();
        let text = g.to_json();
        assert_eq!(text, r#"{"n":4,"edges":[[3,1],[0,2],[1,2]],"degree":3}"#);
        assert_eq!(Graph::from_json(&text).unwrap().to_json(), text);
    }
}
