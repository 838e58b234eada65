//! Euclidean realizations of single simplices given their edge lengths.

use nalgebra::{DMatrix, DVector};

/// A simplex realized in `R^m` from its edge lengths. Vertex 0 sits at the
/// origin; coordinates come from the Cholesky factor of the Gram matrix.
#[derive(Debug, Clone)]
pub struct RealizedSimplex {
    /// Global vertex ids, sorted.
    pub vertices: Vec<usize>,
    /// One row per vertex.
    pub coords: Vec<Vec<f64>>,
}

impl RealizedSimplex {
    /// `lengths[i][j]` is the edge length between local vertices `i` and `j`.
    /// Returns `None` when the lengths do not span a non-degenerate simplex.
    pub fn from_lengths(vertices: Vec<usize>, lengths: &[Vec<f64>]) -> Option<Self> {
        let k = vertices.len();
        let m = k.saturating_sub(1);
        let mut coords = vec![vec![0.0; m]; k];
        if m == 0 {
            return Some(Self { vertices, coords });
        }
        let gram = DMatrix::from_fn(m, m, |i, j| {
            let (a, b) = (i + 1, j + 1);
            0.5 * (lengths[0][a].powi(2) + lengths[0][b].powi(2) - lengths[a][b].powi(2))
        });
        let chol = gram.cholesky()?;
        let l = chol.l();
        for i in 0..m {
            for j in 0..m {
                coords[i + 1][j] = l[(i, j)];
            }
        }
        Some(Self { vertices, coords })
    }

    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    fn local(&self, v: usize) -> usize {
        self.vertices.binary_search(&v).expect("vertex outside realized simplex")
    }

    /// Cartesian position of a point given by `(vertex, weight)` pairs.
    pub fn position(&self, weights: &[(usize, f64)]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for &(v, w) in weights {
            let row = &self.coords[self.local(v)];
            for (o, c) in out.iter_mut().zip(row) {
                *o += w * c;
            }
        }
        out
    }

    pub fn vertex_position(&self, v: usize) -> &[f64] {
        &self.coords[self.local(v)]
    }

    pub fn distance(&self, a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
        let pa = self.position(a);
        let pb = self.position(b);
        crate::metric::euclidean_distance(&pa, &pb)
    }

    /// `m`-dimensional volume of the simplex.
    pub fn volume(&self) -> f64 {
        simplex_volume(&self.coords)
    }

    /// Radius of the inscribed sphere: `m · V_m / Σ V_{m-1}(facets)`.
    pub fn inradius(&self) -> f64 {
        let m = self.dim();
        if m == 0 {
            return 0.0;
        }
        let vol = self.volume();
        let mut facet_sum = 0.0;
        for skip in 0..=m {
            let pts: Vec<Vec<f64>> = self
                .coords
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != skip)
                .map(|(_, c)| c.clone())
                .collect();
            facet_sum += simplex_volume(&pts);
        }
        m as f64 * vol / facet_sum
    }

    /// Distance from the point `x` to the convex hull of the local vertices in
    /// `face` (global ids), together with the barycentric weights of the
    /// nearest point.
    pub fn distance_to_face(&self, x: &[f64], face: &[usize]) -> (f64, Vec<(usize, f64)>) {
        let pts: Vec<&[f64]> = face.iter().map(|&v| self.vertex_position(v)).collect();
        let (d, mu) = distance_to_hull(x, &pts);
        (d, face.iter().copied().zip(mu).collect())
    }
}

/// Volume of the simplex spanned by `pts` (k points in any dimension >= k-1).
pub fn simplex_volume(pts: &[Vec<f64>]) -> f64 {
    let k = pts.len();
    if k <= 1 {
        return 1.0;
    }
    let m = k - 1;
    let dim = pts[0].len();
    let edges = DMatrix::from_fn(dim, m, |r, c| pts[c + 1][r] - pts[0][r]);
    let gram = edges.transpose() * &edges;
    let det = gram.determinant().max(0.0);
    det.sqrt() / factorial(m)
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|i| i as f64).product()
}

/// Inradius of the regular `n`-simplex with edge `a`: `a / sqrt(2n(n+1))`.
pub fn inradius(n: usize, a: f64) -> f64 {
    assert!(n >= 1 && a > 0.0, "inradius needs n >= 1 and a > 0");
    a / ((2 * n * (n + 1)) as f64).sqrt()
}

/// Nearest point of `conv(pts)` to `x`: returns the distance and convex weights.
///
/// Exact for up to 12 points (enumerates the faces whose affine projection is
/// feasible); larger hulls fall back to projected gradient descent.
pub fn distance_to_hull(x: &[f64], pts: &[&[f64]]) -> (f64, Vec<f64>) {
    let k = pts.len();
    assert!(k > 0);
    if k <= 12 {
        let mut best = (f64::INFINITY, vec![0.0; k]);
        for mask in 1u32..(1u32 << k) {
            let idx: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
            if let Some(mu) = affine_projection(x, pts, &idx) {
                if mu.iter().all(|&m| m >= -1e-12) {
                    let mut w = vec![0.0; k];
                    for (&i, &m) in idx.iter().zip(&mu) {
                        w[i] = m.max(0.0);
                    }
                    let s: f64 = w.iter().sum();
                    w.iter_mut().for_each(|v| *v /= s);
                    let d = hull_point_distance(x, pts, &w);
                    if d < best.0 {
                        best = (d, w);
                    }
                }
            }
        }
        return best;
    }
    projected_gradient_hull(x, pts)
}

fn hull_point_distance(x: &[f64], pts: &[&[f64]], w: &[f64]) -> f64 {
    let mut p = vec![0.0; x.len()];
    for (pt, &wi) in pts.iter().zip(w) {
        for (o, c) in p.iter_mut().zip(pt.iter()) {
            *o += wi * c;
        }
    }
    crate::metric::euclidean_distance(x, &p)
}

/// Weights `μ` (summing to 1) of the orthogonal projection of `x` onto the
/// affine hull of `pts[idx]`; `None` if those points are affinely dependent.
fn affine_projection(x: &[f64], pts: &[&[f64]], idx: &[usize]) -> Option<Vec<f64>> {
    let base = pts[idx[0]];
    let m = idx.len() - 1;
    if m == 0 {
        return Some(vec![1.0]);
    }
    let dim = x.len();
    let a = DMatrix::from_fn(dim, m, |r, c| pts[idx[c + 1]][r] - base[r]);
    let rhs = DVector::from_fn(dim, |r, _| x[r] - base[r]);
    let gram = a.transpose() * &a;
    let nu = gram.cholesky()?.solve(&(a.transpose() * rhs));
    let mut mu = Vec::with_capacity(m + 1);
    mu.push(1.0 - nu.sum());
    mu.extend(nu.iter());
    Some(mu)
}

fn projected_gradient_hull(x: &[f64], pts: &[&[f64]]) -> (f64, Vec<f64>) {
    let k = pts.len();
    let mut w = vec![1.0 / k as f64; k];
    // Lipschitz constant of the gradient of ½‖Aw − x‖² is ‖AᵀA‖ <= trace.
    let lip: f64 = pts.iter().map(|p| p.iter().map(|c| c * c).sum::<f64>()).sum::<f64>().max(1e-12);
    let step = 1.0 / lip;
    let mut best = (hull_point_distance(x, pts, &w), w.clone());
    for _ in 0..4000 {
        let mut p = vec![0.0; x.len()];
        for (pt, &wi) in pts.iter().zip(&w) {
            for (o, c) in p.iter_mut().zip(pt.iter()) {
                *o += wi * c;
            }
        }
        let resid: Vec<f64> = p.iter().zip(x).map(|(a, b)| a - b).collect();
        for (wi, pt) in w.iter_mut().zip(pts) {
            let g: f64 = pt.iter().zip(&resid).map(|(a, b)| a * b).sum();
            *wi -= step * g;
        }
        project_to_probability_simplex(&mut w);
        let d = hull_point_distance(x, pts, &w);
        if d < best.0 {
            best = (d, w.clone());
        }
    }
    best
}

/// Euclidean projection onto `{w >= 0, Σw = 1}` (sort-based).
pub fn project_to_probability_simplex(w: &mut [f64]) {
    let mut u: Vec<f64> = w.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    for v in w.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
}
