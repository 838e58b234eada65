//! Covers of finite metric spaces, their nerves, and the distance-to-complement
//! projection of a space onto the nerve of a cover.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{geometry::project_to_probability_simplex, ComplexMetric, ComplexPoint, GeodesicGraph, MetricComplex};
use crate::error::{Error, Result};
use crate::metric::{euclidean_distance, FiniteMetricSpace};

/// An indexed family of non-empty point sets covering a finite space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cover {
    pub lambda: f64,
    pub sets: Vec<Vec<usize>>,
}

impl Cover {
    pub fn new(space: &FiniteMetricSpace, lambda: f64, sets: Vec<Vec<usize>>) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidCover(format!("scale {lambda} must be positive")));
        }
        let mut covered = vec![false; space.len()];
        let mut sorted = Vec::with_capacity(sets.len());
        for (i, mut s) in sets.into_iter().enumerate() {
            if s.is_empty() {
                return Err(Error::InvalidCover(format!("set {i} is empty")));
            }
            s.sort_unstable();
            s.dedup();
            if let Some(&x) = s.iter().find(|&&x| x >= space.len()) {
                return Err(Error::InvalidCover(format!("set {i} names unknown point {x}")));
            }
            s.iter().for_each(|&x| covered[x] = true);
            sorted.push(s);
        }
        if let Some(x) = covered.iter().position(|c| !c) {
            return Err(Error::InvalidCover(format!("point {x} is not covered")));
        }
        Ok(Self { lambda, sets: sorted })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Indices of the sets containing each point.
    pub fn memberships(&self, n_points: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); n_points];
        for (i, s) in self.sets.iter().enumerate() {
            for &x in s {
                out[x].push(i);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap()
    }

    /// Parses and validates against `space`.
    pub fn from_json(text: &str, space: &FiniteMetricSpace) -> Result<Self> {
        let raw: Cover =
            serde_json::from_str(text).map_err(|e| Error::Parse { path: "<cover>".into(), msg: e.to_string() })?;
        Self::new(space, raw.lambda, raw.sets)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverStats {
    /// Largest set diameter.
    pub mesh: f64,
    /// Largest number of sets containing one point.
    pub multiplicity: usize,
    /// `min_x max_U d(x, X \ U)`.
    pub lebesgue: f64,
}

fn mesh_of(space: &FiniteMetricSpace, cover: &Cover) -> f64 {
    cover.sets.iter().map(|s| space.subset_diameter(s)).fold(0.0, f64::max)
}

/// `t[x][U] = d(x, X \ U)`, with `U = X` contributing the mesh.
fn complement_table(space: &FiniteMetricSpace, cover: &Cover, mesh: f64) -> Vec<Vec<f64>> {
    let n = space.len();
    let mut t = vec![vec![0.0; cover.len()]; n];
    let mut inside = vec![false; n];
    for (u, set) in cover.sets.iter().enumerate() {
        inside.iter_mut().for_each(|b| *b = false);
        set.iter().for_each(|&x| inside[x] = true);
        let outside: Vec<usize> = (0..n).filter(|&y| !inside[y]).collect();
        for &x in set {
            t[x][u] = if outside.is_empty() {
                mesh
            } else {
                outside.iter().map(|&y| space.d(x, y)).fold(f64::INFINITY, f64::min)
            };
        }
    }
    t
}

pub fn cover_stats(space: &FiniteMetricSpace, cover: &Cover) -> CoverStats {
    let mesh = mesh_of(space, cover);
    let multiplicity = cover.memberships(space.len()).iter().map(Vec::len).max().unwrap_or(0);
    let lebesgue = complement_table(space, cover, mesh)
        .iter()
        .map(|row| row.iter().copied().fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min);
    CoverStats { mesh, multiplicity, lebesgue }
}

/// Greedy cover by balls around a `λ`-net (lowest point id first).
///
/// Balls start at radius `λ`; each pass that leaves the Lebesgue number below
/// `λ/2` grows every radius by `λ/4`, up to `2λ`.
pub fn greedy_cover(space: &FiniteMetricSpace, lambda: f64, passes: usize) -> Result<Cover> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidCover(format!("scale {lambda} must be positive")));
    }
    let n = space.len();
    let mut centers: Vec<usize> = Vec::new();
    for x in 0..n {
        if centers.iter().all(|&c| space.d(c, x) > lambda) {
            centers.push(x);
        }
    }
    let balls = |r: f64| -> Vec<Vec<usize>> {
        centers.iter().map(|&c| (0..n).filter(|&x| space.d(c, x) <= r).collect()).collect()
    };
    let mut radius = lambda;
    let mut cover = Cover::new(space, lambda, balls(radius))?;
    for _ in 0..passes {
        if cover_stats(space, &cover).lebesgue >= lambda / 2.0 || radius >= 2.0 * lambda {
            break;
        }
        radius = (radius + lambda / 4.0).min(2.0 * lambda);
        cover = Cover::new(space, lambda, balls(radius))?;
    }
    Ok(cover)
}

/// The raw coordinates `t[x][U] = d(x, X \ U)`.
pub fn distance_coordinates(space: &FiniteMetricSpace, cover: &Cover) -> Result<Vec<Vec<f64>>> {
    let t = complement_table(space, cover, mesh_of(space, cover));
    if let Some(x) = t.iter().position(|row| row.iter().all(|&v| v <= 0.0)) {
        return Err(Error::InvalidCover(format!("point {x} lies on the boundary of every set containing it")));
    }
    Ok(t)
}

/// Nerve of a cover, stored by its maximal simplices.
#[derive(Debug, Clone, PartialEq)]
pub struct Nerve {
    pub n_sets: usize,
    /// Maximal families of sets with a common point, sorted.
    pub facets: Vec<Vec<usize>>,
    /// Sets containing each point.
    pub memberships: Vec<Vec<usize>>,
}

impl Nerve {
    pub fn new(space: &FiniteMetricSpace, cover: &Cover) -> Self {
        let memberships = cover.memberships(space.len());
        let complex = MetricComplex::new(cover.len(), memberships.clone(), ComplexMetric::Uniform { size: 1.0 })
            .expect("membership sets form a complex");
        Self { n_sets: cover.len(), facets: complex.facets().to_vec(), memberships }
    }

    pub fn dim(&self) -> usize {
        self.facets.iter().map(|f| f.len() - 1).max().unwrap_or(0)
    }

    /// Points lying in every set of `simplex`.
    pub fn witnesses(&self, simplex: &[usize]) -> Vec<usize> {
        (0..self.memberships.len())
            .filter(|&x| simplex.iter().all(|u| self.memberships[x].binary_search(u).is_ok()))
            .collect()
    }

    /// The nerve as a complex of regular simplices with edge `size`.
    pub fn complex(&self, size: f64) -> Result<MetricComplex> {
        MetricComplex::new(self.n_sets, self.facets.clone(), ComplexMetric::Uniform { size })
    }

    pub fn to_json(&self) -> String {
        let witnesses: Vec<Vec<usize>> = self.facets.iter().map(|f| self.witnesses(f)).collect();
        serde_json::to_string(&serde_json::json!({
            "vertices": self.n_sets,
            "dimension": self.dim(),
            "simplices": self.facets,
            "witnesses": witnesses,
        }))
        .unwrap()
    }

    /// OFF text: vertices on a helix, every 2-face as a triangle and every
    /// 1-dimensional facet as a two-vertex face.
    pub fn to_off(&self) -> String {
        let mut faces: BTreeSet<Vec<usize>> = BTreeSet::new();
        for f in &self.facets {
            match f.len() {
                1 => {}
                2 => {
                    faces.insert(f.clone());
                }
                k => {
                    for a in 0..k {
                        for b in a + 1..k {
                            for c in b + 1..k {
                                faces.insert(vec![f[a], f[b], f[c]]);
                            }
                        }
                    }
                }
            }
        }
        let mut out = String::new();
        writeln!(out, "OFF").unwrap();
        writeln!(out, "{} {} 0", self.n_sets, faces.len()).unwrap();
        let m = self.n_sets.max(1) as f64;
        for v in 0..self.n_sets {
            let th = std::f64::consts::TAU * v as f64 / m;
            writeln!(out, "{} {} {}", th.cos(), th.sin(), v as f64 / m).unwrap();
        }
        for f in &faces {
            let ids: Vec<String> = f.iter().map(usize::to_string).collect();
            writeln!(out, "{} {}", f.len(), ids.join(" ")).unwrap();
        }
        out
    }
}

/// Projection of a space onto the nerve of a cover.
#[derive(Debug, Clone)]
pub struct ProjectionMap {
    /// Image of each point, in barycentric coordinates over the cover sets.
    pub points: Vec<ComplexPoint>,
    /// Radius of the `l∞` sphere the raw coordinates are projected onto.
    pub lambda: f64,
    /// Nerve-dimension constant relating the `l∞` and Euclidean simplices.
    pub c_n: f64,
    pub nerve: Nerve,
}

impl ProjectionMap {
    /// Edge length of the Euclidean nerve simplices, `c_n · λ`.
    pub fn simplex_size(&self) -> f64 {
        self.c_n * self.lambda
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("point");
        for u in 0..self.nerve.n_sets {
            write!(out, ",U{u}").unwrap();
        }
        out.push('\n');
        for (x, p) in self.points.iter().enumerate() {
            write!(out, "{x}").unwrap();
            for w in p.dense(self.nerve.n_sets) {
                write!(out, ",{w}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Projects every point onto the nerve: the complement-distance vector is
/// pushed radially onto the `l∞` sphere of radius `λ` and then normalized to
/// barycentric coordinates.
pub fn nerve_projection(space: &FiniteMetricSpace, cover: &Cover, lambda: f64) -> Result<ProjectionMap> {
    let stats = cover_stats(space, cover);
    if !(lambda > 0.0) || stats.lebesgue < 2.0 * lambda {
        return Err(Error::LebesgueTooSmall { measured: stats.lebesgue, required: 2.0 * lambda });
    }
    let t = distance_coordinates(space, cover)?;
    let nerve = Nerve::new(space, cover);
    let points = t
        .iter()
        .map(|row| {
            let top = row.iter().copied().fold(0.0, f64::max);
            let sphere = row.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(u, &v)| (u, lambda * v / top));
            ComplexPoint::new(sphere)
        })
        .collect::<Result<Vec<_>>>()?;
    let c_n = nerve_constant(nerve.dim());
    Ok(ProjectionMap { points, lambda, c_n, nerve })
}

/// Largest diameter of a simplex preimage, with the simplex attaining it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoboundedReport {
    pub holds: bool,
    pub worst_simplex: Option<Vec<usize>>,
    pub worst_diameter: f64,
}

/// Checks `diam φ⁻¹(Δ) <= bound` for every open simplex `Δ` of the nerve,
/// i.e. over the groups of points whose images have the same carrier.
/// Simplices with empty preimage are skipped.
pub fn cobounded_check(space: &FiniteMetricSpace, p: &ProjectionMap, bound: f64) -> CoboundedReport {
    let mut groups: std::collections::BTreeMap<&[usize], Vec<usize>> = std::collections::BTreeMap::new();
    for (x, pt) in p.points.iter().enumerate() {
        groups.entry(pt.carrier()).or_default().push(x);
    }
    let mut worst: Option<Vec<usize>> = None;
    let mut worst_d = 0.0f64;
    for (simplex, pre) in groups {
        let d = space.subset_diameter(&pre);
        if worst.is_none() || d > worst_d {
            worst_d = d;
            worst = Some(simplex.to_vec());
        }
    }
    CoboundedReport { holds: worst_d <= bound + 1e-12, worst_simplex: worst, worst_diameter: worst_d }
}

/// Largest stretch of the projection into the nerve with Euclidean simplices
/// of edge `c_n·λ`, with the witnessing pair.
///
/// Nerve distances come from [`GeodesicGraph`] (an upper bound on the length
/// metric); for adjacent points carried by different facets the shortest
/// two-segment path through their common face is added as well.
pub fn projection_stretch(space: &FiniteMetricSpace, p: &ProjectionMap, depth: u32) -> Result<(f64, (usize, usize))> {
    let k = p.nerve.complex(p.simplex_size())?;
    let mut g = GeodesicGraph::new(&k, depth, &p.points)?;
    let n = p.points.len();
    for x in 0..n {
        for y in x + 1..n {
            if space.d(x, y) > 1.0 + 1e-12 || k.chord(&p.points[x], &p.points[y]).is_some() {
                continue;
            }
            if let Some(w) = hinge_distance(&k, &p.points[x], &p.points[y]) {
                g.add_edge(g.query_node(x), g.query_node(y), w);
            }
        }
    }
    let rows: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|x| {
                let d = g.shortest_from(g.query_node(x));
                (0..n).map(|y| d[g.query_node(y)]).collect()
            })
            .collect()
    };
    let mut best = (0.0, (0, 0));
    for x in 0..n {
        for y in x + 1..n {
            let r = rows[x][y] / space.d(x, y);
            if r > best.0 {
                best = (r, (x, y));
            }
        }
    }
    Ok(best)
}

/// `min_z |p − z| + |z − q|` over `z` in the common face of the carriers of
/// `p` and `q`, each segment measured inside a facet containing its ends.
fn hinge_distance(k: &MetricComplex, p: &ComplexPoint, q: &ComplexPoint) -> Option<f64> {
    let face = crate::complex::intersect_sorted(p.carrier(), q.carrier());
    if face.is_empty() {
        return None;
    }
    let fa = k.facets_containing(p.carrier()).find(|&f| crate::complex::is_subset(&face, &k.facets()[f]))?;
    let fb = k.facets_containing(q.carrier()).find(|&f| crate::complex::is_subset(&face, &k.facets()[f]))?;
    let (ra, rb) = (k.realize(fa), k.realize(fb));
    let (pa, qb) = (ra.position(&p.weights()), rb.position(&q.weights()));
    let cost = |w: &[f64]| {
        let z: Vec<(usize, f64)> = face.iter().copied().zip(w.iter().copied()).collect();
        euclidean_distance(&pa, &ra.position(&z)) + euclidean_distance(&qb, &rb.position(&z))
    };
    let m = face.len();
    let mut w = vec![1.0 / m as f64; m];
    let mut best = cost(&w);
    if m == 1 {
        return Some(best);
    }
    let mut step = 0.25;
    for _ in 0..400 {
        let h = 1e-7;
        let base = cost(&w);
        let grad: Vec<f64> = (0..m)
            .map(|i| {
                let mut v = w.clone();
                v[i] += h;
                (cost(&v) - base) / h
            })
            .collect();
        let mut next: Vec<f64> = w.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
        project_to_probability_simplex(&mut next);
        let c = cost(&next);
        if c < base {
            w = next;
            best = best.min(c);
        } else {
            step *= 0.5;
        }
    }
    Some(best)
}

/// The constant `c_n`: the largest `c` for which identifying the positive
/// part of the unit `l∞` sphere in `R^{n+1}` with the regular simplex of edge
/// `c` (via `s ↦ s / Σs`) is 1-Lipschitz. Estimated as the smallest sampled
/// distance ratio times a 0.99 safety factor, and cached per `n`.
pub fn nerve_constant(n: usize) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<usize, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&c) = cache.lock().unwrap().get(&n) {
        return c;
    }
    let c = 0.99 * sampled_ratio_infimum(n, 20_000);
    cache.lock().unwrap().insert(n, c);
    c
}

/// Smallest sampled `‖s − s'‖∞ / (‖b − b'‖₂ / √2)` over pairs of the sphere
/// part, with `b = s / Σs`.
pub fn sampled_ratio_infimum(n: usize, samples: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let dim = n + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(0x6e65_7276_6500 + n as u64);
    let ratio = |s: &[f64], t: &[f64]| -> Option<f64> {
        let linf = s.iter().zip(t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let (ss, ts): (f64, f64) = (s.iter().sum(), t.iter().sum());
        let l2 = s.iter().zip(t).map(|(a, b)| (a / ss - b / ts).powi(2)).sum::<f64>().sqrt();
        (l2 > 1e-14).then(|| linf / (l2 / std::f64::consts::SQRT_2))
    };
    let to_sphere = |v: &mut Vec<f64>| {
        let top = v.iter().copied().fold(0.0, f64::max);
        v.iter_mut().for_each(|x| *x /= top);
    };
    let mut best = f64::INFINITY;
    for i in 0..samples {
        let mut s: Vec<f64> = match i % 3 {
            // Near a vertex, where the ratio is smallest.
            0 => {
                let mut v = vec![0.0; dim];
                v[rng.gen_range(0..dim)] = 1.0;
                v
            }
            1 => (0..dim).map(|_| rng.gen::<f64>()).collect(),
            _ => (0..dim).map(|_| if rng.gen_bool(0.5) { 0.0 } else { rng.gen::<f64>() }).collect(),
        };
        if s.iter().all(|&x| x == 0.0) {
            s[0] = 1.0;
        }
        to_sphere(&mut s);
        let scale = [1e-6, 1e-3, 0.1, 1.0][rng.gen_range(0..4)];
        // Half the perturbations move a random subset of coordinates together.
        let common = rng.gen::<f64>();
        let uniform = rng.gen_bool(0.5);
        let mut t: Vec<f64> = s
            .iter()
            .map(|&x| {
                let u = if uniform { if rng.gen_bool(0.8) { common } else { 0.0 } } else { rng.gen::<f64>() };
                (x + scale * u).max(0.0)
            })
            .collect();
        to_sphere(&mut t);
        if let Some(r) = ratio(&s, &t) {
            best = best.min(r);
        }
    }
    best
}
