use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};

use super::{ComplexMetric, ComplexPoint, MetricComplex};
use crate::error::Result;

/// An iterated barycentric subdivision of a base complex.
///
/// Vertex `i < base.n_vertices()` of the subdivision is vertex `i` of the
/// base; every other vertex is the barycenter of a simplex of the previous
/// level. Edge lengths are measured in the realization of the base.
#[derive(Debug, Clone)]
pub struct Subdivision {
    pub base: MetricComplex,
    pub complex: MetricComplex,
    /// Position of every subdivision vertex in the base complex.
    pub carrier: Vec<ComplexPoint>,
    /// Base facet containing each subdivision facet.
    pub parent: Vec<usize>,
    pub depth: usize,
}

impl Subdivision {
    pub fn identity(base: &MetricComplex) -> Self {
        let carrier = (0..base.n_vertices()).map(ComplexPoint::vertex).collect();
        let parent = (0..base.facets().len()).collect();
        Self { base: base.clone(), complex: base.clone(), carrier, parent, depth: 0 }
    }

    pub fn mesh(&self) -> f64 {
        self.complex.mesh()
    }

    /// Subdivides once more.
    pub fn refine(&self) -> Result<Self> {
        let prev = &self.complex;
        let nv = prev.n_vertices();
        let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut carrier: Vec<ComplexPoint> = self.carrier.clone();
        for v in 0..nv {
            ids.insert(vec![v], v);
        }
        for s in prev.simplices() {
            if s.len() == 1 {
                continue;
            }
            let w = 1.0 / s.len() as f64;
            let pairs = s.iter().flat_map(|&v| self.carrier[v].weights().into_iter().map(move |(b, c)| (b, c * w)));
            carrier.push(ComplexPoint::new(pairs)?);
            ids.insert(s, carrier.len() - 1);
        }

        let mut facets = Vec::new();
        let mut parent = Vec::new();
        for (fi, f) in prev.facets().iter().enumerate() {
            let p = self.parent[fi];
            for perm in permutations(f.len()) {
                let mut chain = Vec::with_capacity(f.len());
                let mut face: Vec<usize> = Vec::with_capacity(f.len());
                for &i in &perm {
                    face.push(f[i]);
                    face.sort_unstable();
                    chain.push(ids[&face]);
                }
                chain.sort_unstable();
                facets.push(chain);
                parent.push(p);
            }
        }

        let mut lengths = BTreeMap::new();
        for (chain, &p) in facets.iter().zip(&parent) {
            let real = self.base.realize(p);
            for (a, &u) in chain.iter().enumerate() {
                for &v in &chain[a + 1..] {
                    lengths
                        .entry((u, v))
                        .or_insert_with(|| real.distance(&carrier[u].weights(), &carrier[v].weights()));
                }
            }
        }
        let complex = MetricComplex::new(carrier.len(), facets.clone(), ComplexMetric::Euclidean { lengths })?;
        // `MetricComplex::new` may reorder facets; recover each parent by lookup.
        let parent_of: HashMap<&Vec<usize>, usize> = facets.iter().zip(parent.iter().copied()).collect();
        let parent = complex.facets().iter().map(|f| parent_of[f]).collect();
        Ok(Self { base: self.base.clone(), complex, carrier, parent, depth: self.depth + 1 })
    }

    /// Maps a point of the subdivision to the base complex.
    pub fn to_base(&self, p: &ComplexPoint) -> ComplexPoint {
        let pairs = p
            .weights()
            .into_iter()
            .flat_map(|(v, w)| self.carrier[v].weights().into_iter().map(move |(b, c)| (b, c * w)));
        ComplexPoint::new(pairs).expect("convex combination of carriers")
    }

    /// Subdivision facets grouped by their base facet.
    pub fn facets_by_parent(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.base.facets().len()];
        for (f, &p) in self.parent.iter().enumerate() {
            out[p].push(f);
        }
        out
    }

    /// Finds a subdivision facet containing the base point `x` and returns it
    /// with the barycentric weights of `x` in that facet. `by_parent` is the
    /// output of [`Self::facets_by_parent`].
    pub fn locate(&self, x: &ComplexPoint, by_parent: &[Vec<usize>]) -> Option<(usize, Vec<(usize, f64)>)> {
        let mut best: Option<(usize, Vec<(usize, f64)>, f64)> = None;
        for base_facet in self.base.facets_containing(x.carrier()) {
            let real = self.base.realize(base_facet);
            let target = real.position(&x.weights());
            for &f in &by_parent[base_facet] {
                let verts = &self.complex.facets()[f];
                let pos: Vec<Vec<f64>> = verts.iter().map(|&v| real.position(&self.carrier[v].weights())).collect();
                let Some(beta) = solve_barycentric(&pos, &target) else { continue };
                let worst = beta.iter().copied().fold(f64::INFINITY, f64::min);
                if best.as_ref().map_or(true, |b| worst > b.2) {
                    let w = verts.iter().copied().zip(beta.into_iter().map(|b| b.max(0.0))).collect();
                    best = Some((f, w, worst));
                }
                if worst >= -1e-9 {
                    return best.map(|(f, w, _)| (f, w));
                }
            }
        }
        best.filter(|b| b.2 >= -1e-6).map(|(f, w, _)| (f, w))
    }
}

/// Barycentric coordinates of `x` with respect to the simplex `pos` when the
/// simplex spans the ambient space; `None` if it is degenerate.
fn solve_barycentric(pos: &[Vec<f64>], x: &[f64]) -> Option<Vec<f64>> {
    let m = pos.len() - 1;
    if m == 0 {
        return Some(vec![1.0]);
    }
    let dim = x.len();
    let a = DMatrix::from_fn(dim, m, |r, c| pos[c + 1][r] - pos[0][r]);
    let rhs = DVector::from_fn(dim, |r, _| x[r] - pos[0][r]);
    let nu = if dim == m {
        a.lu().solve(&rhs)?
    } else {
        let at = a.transpose();
        (at.clone() * &a).cholesky()?.solve(&(at * rhs))
    };
    let mut beta = Vec::with_capacity(m + 1);
    beta.push(1.0 - nu.sum());
    beta.extend(nu.iter());
    Some(beta)
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(k - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, k - 1);
            out.push(p);
        }
    }
    out
}

/// `times`-fold iterated barycentric subdivision of `k`.
pub fn barycentric_subdivide(k: &MetricComplex, times: usize) -> Result<Subdivision> {
    let mut s = Subdivision::identity(k);
    for _ in 0..times {
        s = s.refine()?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(simplices: Vec<Vec<usize>>, n: usize) -> MetricComplex {
        MetricComplex::new(n, simplices, ComplexMetric::Uniform { size: 1.0 }).unwrap()
    }

    #[test]
    fn subdividing_an_edge_halves_it() {
        let s = barycentric_subdivide(&unit(vec![vec![0, 1]], 2), 1).unwrap();
        assert_eq!(s.complex.facets().len(), 2);
        for (u, v) in s.complex.edges() {
            assert!((s.complex.edge_length(u, v) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn subdividing_a_triangle() {
        let s = barycentric_subdivide(&unit(vec![vec![0, 1, 2]], 3), 1).unwrap();
        assert_eq!(s.complex.facets().len(), 6);
        assert_eq!(s.complex.n_vertices(), 7);
        // Oracle: realize and measure every edge independently.
        let base = &s.base;
        let real = base.realize(0);
        let mut longest = 0.0f64;
        for (u, v) in s.complex.edges() {
            let d = real.distance(&s.carrier[u].weights(), &s.carrier[v].weights());
            longest = longest.max(d);
        }
        assert!((longest - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((s.mesh() - longest).abs() < 1e-15);
    }

    #[test]
    fn zero_times_is_identity() {
        let k = unit(vec![vec![0, 1, 2], vec![2, 3]], 4);
        let s = barycentric_subdivide(&k, 0).unwrap();
        assert_eq!(s.complex, k);
        assert_eq!(s.carrier[3], ComplexPoint::vertex(3));
    }

    #[test]
    fn mesh_contracts_by_dimension_factor() {
        for (n, simplex) in [(1usize, vec![0, 1]), (2, vec![0, 1, 2]), (3, vec![0, 1, 2, 3])] {
            let k = unit(vec![simplex.clone()], n + 1);
            let mut s = Subdivision::identity(&k);
            let ratio = n as f64 / (n + 1) as f64;
            for t in 1..=3 {
                s = s.refine().unwrap();
                assert!(s.mesh() <= ratio.powi(t) + 1e-12, "n={n} t={t} mesh={}", s.mesh());
            }
        }
    }

    #[test]
    fn locate_recovers_points() {
        let k = unit(vec![vec![0, 1, 2], vec![1, 2, 3]], 4);
        let s = barycentric_subdivide(&k, 2).unwrap();
        let x = ComplexPoint::new(vec![(1, 0.2), (2, 0.3), (3, 0.5)]).unwrap();
        let (_, w) = s.locate(&x, &s.facets_by_parent()).unwrap();
        let back = s.to_base(&ComplexPoint::new(w).unwrap());
        for v in 0..4 {
            assert!((back.coord(v) - x.coord(v)).abs() < 1e-12);
        }
    }
}
