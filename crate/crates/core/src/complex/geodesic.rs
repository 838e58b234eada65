use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use super::{ComplexPoint, MetricComplex};
use crate::error::{Error, Result};
use crate::metric::euclidean_distance;

/// Upper-bound model of the length metric of a complex.
///
/// Nodes are the vertices, the interior points of the `depth`-fold edge
/// subdivision (`2^depth - 1` per edge) and any query points. Every pair of
/// nodes lying in a common facet is joined by the straight chord of that
/// facet's realization. Shortest paths in this graph are lengths of genuine
/// paths in the complex, so they never underestimate the geodesic distance,
/// and deeper subdivisions only add nodes.
#[derive(Debug, Clone)]
pub struct GeodesicGraph {
    nodes: Vec<ComplexPoint>,
    adj: Vec<Vec<(usize, f64)>>,
    query_offset: usize,
}

impl GeodesicGraph {
    pub fn new(k: &MetricComplex, depth: u32, queries: &[ComplexPoint]) -> Result<Self> {
        let nv = k.n_vertices();
        let per_edge = (1usize << depth) - 1;
        let mut nodes: Vec<ComplexPoint> = (0..nv).map(ComplexPoint::vertex).collect();
        let mut edge_start: HashMap<(usize, usize), usize> = HashMap::new();
        let steps = (per_edge + 1) as f64;
        for (u, v) in k.edges() {
            edge_start.insert((u, v), nodes.len());
            for j in 1..=per_edge {
                let t = j as f64 / steps;
                nodes.push(ComplexPoint::new([(u, 1.0 - t), (v, t)]).expect("edge point"));
            }
        }
        let query_offset = nodes.len();
        let mut members: Vec<Vec<usize>> = k.facets().iter().map(|f| f.clone()).collect();
        for (fi, f) in k.facets().iter().enumerate() {
            for (a, &u) in f.iter().enumerate() {
                for &v in &f[a + 1..] {
                    let s = edge_start[&(u, v)];
                    members[fi].extend(s..s + per_edge);
                }
            }
        }
        for (qi, q) in queries.iter().enumerate() {
            let mut found = false;
            for f in k.facets_containing(q.carrier()) {
                members[f].push(query_offset + qi);
                found = true;
            }
            if !found {
                return Err(Error::InvalidComplex(format!("query point carried by {:?} is not in the complex", q.carrier())));
            }
            nodes.push(q.clone());
        }
        let mut adj = vec![Vec::new(); nodes.len()];
        for (fi, list) in members.iter().enumerate() {
            if list.len() < 2 {
                continue;
            }
            let real = k.realize(fi);
            let pos: Vec<Vec<f64>> = list.iter().map(|&n| real.position(&nodes[n].weights())).collect();
            for a in 0..list.len() {
                for b in a + 1..list.len() {
                    let w = euclidean_distance(&pos[a], &pos[b]);
                    adj[list[a]].push((list[b], w));
                    adj[list[b]].push((list[a], w));
                }
            }
        }
        Ok(Self { nodes, adj, query_offset })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &ComplexPoint {
        &self.nodes[i]
    }

    /// Node index of the `q`-th query point.
    pub fn query_node(&self, q: usize) -> usize {
        self.query_offset + q
    }

    pub fn n_queries(&self) -> usize {
        self.nodes.len() - self.query_offset
    }

    /// Adds a path of known length between two nodes.
    pub fn add_edge(&mut self, a: usize, b: usize, w: f64) {
        self.adj[a].push((b, w));
        self.adj[b].push((a, w));
    }

    pub fn shortest_from(&self, src: usize) -> Vec<f64> {
        let mut init = vec![f64::INFINITY; self.nodes.len()];
        init[src] = 0.0;
        self.multi_source(&init)
    }

    /// `out[v] = min_u (init[u] + dist(u, v))`.
    pub fn multi_source(&self, init: &[f64]) -> Vec<f64> {
        let mut dist = init.to_vec();
        let mut heap: BinaryHeap<Entry> =
            dist.iter().enumerate().filter(|(_, d)| d.is_finite()).map(|(i, &d)| Entry(d, i)).collect();
        while let Some(Entry(d, v)) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &(w, len) in &self.adj[v] {
                let nd = d + len;
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(Entry(nd, w));
                }
            }
        }
        dist
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Distance between two points of a connected complex: the exact chord when
/// the chord is shortest, otherwise the shortest path through the
/// `depth`-fold subdivided 1-skeleton with within-simplex chords.
pub fn complex_distance(k: &MetricComplex, p: &ComplexPoint, q: &ComplexPoint, depth: u32) -> Result<f64> {
    if !k.is_connected() {
        return Err(Error::DisconnectedComplex);
    }
    let g = GeodesicGraph::new(k, depth, &[p.clone(), q.clone()])?;
    Ok(g.shortest_from(g.query_node(0))[g.query_node(1)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::ComplexMetric;

    #[test]
    fn single_edge_and_barycenter() {
        let edge = MetricComplex::new(2, vec![vec![0, 1]], ComplexMetric::Uniform { size: 1.0 }).unwrap();
        let d = complex_distance(&edge, &ComplexPoint::vertex(0), &ComplexPoint::vertex(1), 2).unwrap();
        assert!((d - 1.0).abs() < 1e-12);

        let tri = MetricComplex::new(3, vec![vec![0, 1, 2]], ComplexMetric::Uniform { size: 1.0 }).unwrap();
        let d = complex_distance(&tri, &ComplexPoint::barycenter(&[0, 1, 2]), &ComplexPoint::vertex(0), 0).unwrap();
        assert!((d - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn path_through_cone_point() {
        let k = MetricComplex::new(3, vec![vec![0, 2], vec![1, 2]], ComplexMetric::Uniform { size: 1.0 }).unwrap();
        for depth in 0..4 {
            let d = complex_distance(&k, &ComplexPoint::vertex(0), &ComplexPoint::vertex(1), depth).unwrap();
            assert!((d - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn disconnected_is_an_error() {
        let k = MetricComplex::new(2, vec![vec![0], vec![1]], ComplexMetric::Uniform { size: 1.0 }).unwrap();
        assert!(matches!(
            complex_distance(&k, &ComplexPoint::vertex(0), &ComplexPoint::vertex(1), 0),
            Err(Error::DisconnectedComplex)
        ));
    }
}
