use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::subdivide::{barycentric_subdivide, Subdivision};
use super::{is_subset, union_sorted, ComplexFile, ComplexMetric, ComplexPoint, MetricComplex};
use crate::error::{Error, Result};

/// A piecewise-linear map from a complex `L` into a complex `K`.
///
/// The map is affine on every facet of `structure` (an iterated barycentric
/// subdivision of `L`) and is given by the images of the structure vertices.
#[derive(Debug, Clone)]
pub struct PLMap {
    pub structure: Subdivision,
    pub codomain: MetricComplex,
    pub images: Vec<ComplexPoint>,
    by_parent: Vec<Vec<usize>>,
}

impl PLMap {
    /// Checks that the images of every structure facet lie in a common
    /// simplex of the codomain, so the affine extension is defined.
    pub fn new(structure: Subdivision, codomain: MetricComplex, images: Vec<ComplexPoint>) -> Result<Self> {
        if images.len() != structure.complex.n_vertices() {
            return Err(Error::InvalidComplex(format!(
                "{} images for {} vertices",
                images.len(),
                structure.complex.n_vertices()
            )));
        }
        for f in structure.complex.facets() {
            let union = f.iter().fold(Vec::new(), |acc, &v| union_sorted(&acc, images[v].carrier()));
            if !codomain.is_simplex(&union) {
                return Err(Error::InvalidComplex(format!(
                    "images of simplex {f:?} span {union:?}, which is not a simplex of the codomain"
                )));
            }
        }
        let by_parent = structure.facets_by_parent();
        Ok(Self { structure, codomain, images, by_parent })
    }

    pub fn domain(&self) -> &MetricComplex {
        &self.structure.base
    }

    /// Image of a point of the domain.
    pub fn eval(&self, x: &ComplexPoint) -> Result<ComplexPoint> {
        let (_, beta) = self
            .structure
            .locate(x, &self.by_parent)
            .ok_or_else(|| Error::InvalidComplex(format!("point on {:?} is outside the domain", x.carrier())))?;
        Ok(combine(&self.images, &beta))
    }

    /// Exact Lipschitz constant: the largest operator norm of the linear part
    /// over the structure facets.
    pub fn lipschitz_constant(&self) -> f64 {
        let cx = &self.structure.complex;
        (0..cx.facets().len())
            .map(|f| {
                let verts = &cx.facets()[f];
                let imgs: Vec<&ComplexPoint> = verts.iter().map(|&v| &self.images[v]).collect();
                affine_norm(cx, f, &self.codomain, &imgs).expect("images share a simplex")
            })
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        let images: Vec<Value> = self.images.iter().map(|p| json!(p.weights())).collect();
        let doc = json!({
            "domain": complex_value(&self.structure.base),
            "depth": self.structure.depth,
            "codomain": complex_value(&self.codomain),
            "images": images,
        });
        serde_json::to_string(&doc).unwrap()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct File {
            domain: ComplexFile,
            #[serde(default)]
            depth: usize,
            codomain: ComplexFile,
            images: Vec<Vec<(usize, f64)>>,
        }
        let file: File =
            serde_json::from_str(text).map_err(|e| Error::Parse { path: "<map>".into(), msg: e.to_string() })?;
        let domain = file.domain.into_complex()?;
        let codomain = file.codomain.into_complex()?;
        let structure = barycentric_subdivide(&domain, file.depth)?;
        let images = file.images.into_iter().map(ComplexPoint::new).collect::<Result<Vec<_>>>()?;
        Self::new(structure, codomain, images)
    }
}

fn complex_value(k: &MetricComplex) -> Value {
    serde_json::from_str(&k.to_json()).expect("complex serializes to JSON")
}

fn combine(images: &[ComplexPoint], beta: &[(usize, f64)]) -> ComplexPoint {
    let pairs = beta
        .iter()
        .flat_map(|&(v, b)| images[v].weights().into_iter().map(move |(u, w)| (u, w * b)));
    ComplexPoint::new(pairs).expect("convex combination")
}

/// Operator norm of the affine map sending the vertices of facet `f` of `dom`
/// to the points `imgs` of `cod`; `None` if the images share no simplex.
fn affine_norm(dom: &MetricComplex, f: usize, cod: &MetricComplex, imgs: &[&ComplexPoint]) -> Option<f64> {
    let m = dom.facets()[f].len() - 1;
    if m == 0 {
        return Some(0.0);
    }
    let union = imgs.iter().fold(Vec::new(), |acc, p| union_sorted(&acc, p.carrier()));
    let target = cod.facets_containing(&union).next()?;
    let real_cod = cod.realize(target);
    let q: Vec<Vec<f64>> = imgs.iter().map(|p| real_cod.position(&p.weights())).collect();
    let real_dom = dom.realize(f);
    let p = &real_dom.coords;
    let dp = DMatrix::from_fn(m, m, |r, c| p[c + 1][r] - p[0][r]);
    let dim = q[0].len();
    if dim == 0 {
        return Some(0.0);
    }
    let dq = DMatrix::from_fn(dim, m, |r, c| q[c + 1][r] - q[0][r]);
    let inv = dp.try_inverse()?;
    let a = dq * inv;
    Some(a.singular_values().max())
}

#[derive(Debug, Clone)]
pub struct ApproxOptions {
    /// Lipschitz bound for the map; computed exactly when absent.
    pub lambda: Option<f64>,
    /// Forces this subdivision depth instead of searching for one.
    pub depth: Option<usize>,
    /// Largest depth tried by the search.
    pub max_depth: usize,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        Self { lambda: None, depth: None, max_depth: 8 }
    }
}

/// Outcome of the star test at one vertex of the subdivided domain.
#[derive(Debug, Clone, Serialize)]
pub struct StarCheck {
    pub vertex: usize,
    pub target: usize,
    pub samples: usize,
    /// Smallest barycentric coordinate of `target` over the sampled images.
    pub min_coord: f64,
}

/// A simplicial map `g` from a subdivision `T` of the domain to the codomain
/// whose open-star images satisfy `f(St(a)) ⊂ St(g(a))`.
#[derive(Debug, Clone)]
pub struct Approximation {
    pub subdivision: Subdivision,
    pub vertex_map: Vec<usize>,
    pub lambda: f64,
    pub required_mesh: f64,
    pub mesh: f64,
    /// Smallest inradius of a facet of `T`.
    pub inradius: f64,
    /// `1 / inradius`.
    pub mu: f64,
    /// Lipschitz constant of the straight-line homotopy from `f` to `g`,
    /// measured facet by facet.
    pub homotopy_lipschitz: f64,
    pub checks: Vec<StarCheck>,
    by_parent: Vec<Vec<usize>>,
}

impl Approximation {
    /// Image under `g` of a point of the domain.
    pub fn eval(&self, x: &ComplexPoint) -> Result<ComplexPoint> {
        let (_, beta) = self
            .subdivision
            .locate(x, &self.by_parent)
            .ok_or_else(|| Error::InvalidComplex(format!("point on {:?} is outside the domain", x.carrier())))?;
        let pairs = beta.iter().map(|&(v, b)| (self.vertex_map[v], b));
        ComplexPoint::new(pairs)
    }

    pub fn to_json(&self) -> String {
        let carriers: Vec<Value> = self.subdivision.carrier.iter().map(|p| json!(p.weights())).collect();
        let min_coord = self.checks.iter().map(|c| c.min_coord).fold(f64::INFINITY, f64::min);
        let doc = json!({
            "depth": self.subdivision.depth,
            "lambda": self.lambda,
            "mesh": self.mesh,
            "required_mesh": self.required_mesh,
            "inradius": self.inradius,
            "mu": self.mu,
            "homotopy_lipschitz": self.homotopy_lipschitz,
            "star_checks": self.checks.len(),
            "min_star_coord": min_coord,
            "simplices": self.subdivision.complex.facets(),
            "carriers": carriers,
            "vertex_map": self.vertex_map,
        });
        serde_json::to_string(&doc).unwrap()
    }
}

/// Builds a simplicial approximation of `f`.
///
/// The domain is subdivided until its mesh drops below `r / (4λ)`, where `r`
/// is the smallest inradius of a codomain facet; each vertex `a` of the
/// subdivision goes to the codomain vertex `v` whose smallest barycentric
/// coordinate over `f` of the sampled open star of `a` is largest, which
/// must be positive (ties go to the lower id).
pub fn simplicial_approximation(f: &PLMap, opts: &ApproxOptions) -> Result<Approximation> {
    let k = &f.codomain;
    if k.dim() == 0 {
        return Err(Error::InvalidComplex("codomain has no simplex of positive dimension".into()));
    }
    let lambda = opts.lambda.unwrap_or_else(|| f.lipschitz_constant());
    let r = k.min_inradius();
    let required_mesh = if lambda > 0.0 { r / (4.0 * lambda) } else { f64::INFINITY };

    let t = match opts.depth {
        Some(depth) => {
            let t = barycentric_subdivide(f.domain(), depth)?;
            if t.mesh() >= required_mesh {
                return Err(Error::MeshTooCoarse { mesh: t.mesh(), required: required_mesh });
            }
            t
        }
        None => {
            let mut t = Subdivision::identity(f.domain());
            while t.mesh() >= required_mesh {
                if t.depth >= opts.max_depth {
                    return Err(Error::MeshTooCoarse { mesh: t.mesh(), required: required_mesh });
                }
                t = t.refine()?;
            }
            t
        }
    };

    let tc = &t.complex;
    let f_vals: Vec<ComplexPoint> = t.carrier.iter().map(|x| f.eval(x)).collect::<Result<_>>()?;
    let affine: Vec<bool> = (0..tc.facets().len()).map(|i| is_affine_on(f, &t, &tc.facets()[i])).collect();

    let mut vertex_map = vec![usize::MAX; tc.n_vertices()];
    let mut checks = Vec::with_capacity(tc.n_vertices());
    for a in 0..tc.n_vertices() {
        let mut samples: Vec<ComplexPoint> = vec![f_vals[a].clone()];
        for &fi in tc.facets_of_vertex(a) {
            let facet = &tc.facets()[fi];
            for point in star_samples(a, facet) {
                let img = if affine[fi] {
                    combine(&f_vals, &point)
                } else {
                    f.eval(&t.to_base(&ComplexPoint::new(point)?))?
                };
                samples.push(img);
            }
        }
        let (chosen, min_coord) = f_vals[a]
            .carrier()
            .iter()
            .map(|&v| (v, samples.iter().map(|s| s.coord(v)).fold(f64::INFINITY, f64::min)))
            .fold((usize::MAX, 0.0), |best, c| if c.1 > best.1 { c } else { best });
        if chosen == usize::MAX {
            return Err(Error::StarCondition { vertex: a });
        }
        vertex_map[a] = chosen;
        checks.push(StarCheck { vertex: a, target: chosen, samples: samples.len(), min_coord });
    }

    let mut homotopy_lipschitz = 0.0f64;
    let mut inradius = f64::INFINITY;
    for (fi, facet) in tc.facets().iter().enumerate() {
        let image: Vec<usize> = {
            let mut s: Vec<usize> = facet.iter().map(|&v| vertex_map[v]).collect();
            s.sort_unstable();
            s.dedup();
            s
        };
        if !k.is_simplex(&image) {
            return Err(Error::Assertion(format!("vertex map sends {facet:?} to non-simplex {image:?}")));
        }
        if facet.len() < 2 {
            continue;
        }
        inradius = inradius.min(tc.realize(fi).inradius());
        let g_pts: Vec<ComplexPoint> = facet.iter().map(|&v| ComplexPoint::vertex(vertex_map[v])).collect();
        let g_refs: Vec<&ComplexPoint> = g_pts.iter().collect();
        let g_norm = affine_norm(tc, fi, k, &g_refs).expect("image is a simplex");
        let f_norm = if affine[fi] {
            let f_refs: Vec<&ComplexPoint> = facet.iter().map(|&v| &f_vals[v]).collect();
            affine_norm(tc, fi, k, &f_refs).expect("images share a simplex")
        } else {
            lambda
        };
        let mut shift = 0.0f64;
        for (&v, g) in facet.iter().zip(&g_pts) {
            let d = k.chord(&f_vals[v], g).ok_or_else(|| Error::Assertion("f(a) and g(a) share no simplex".into()))?;
            shift = shift.max(d);
        }
        homotopy_lipschitz = homotopy_lipschitz.max(g_norm).max(f_norm).max(shift);
    }
    let mesh = t.mesh();
    let by_parent = t.facets_by_parent();
    Ok(Approximation {
        subdivision: t,
        vertex_map,
        lambda,
        required_mesh,
        mesh,
        inradius,
        mu: 1.0 / inradius,
        homotopy_lipschitz,
        checks,
        by_parent,
    })
}

/// Whether the facet `verts` of the subdivision `t` lies inside a single
/// structure facet of `f`, making `f` affine on it.
fn is_affine_on(f: &PLMap, t: &Subdivision, verts: &[usize]) -> bool {
    let w = 1.0 / verts.len() as f64;
    let bary = ComplexPoint::new(verts.iter().map(|&v| (v, w))).expect("facet");
    let Some((sf, _)) = f.structure.locate(&t.to_base(&bary), &f.by_parent) else { return false };
    let svert = &f.structure.complex.facets()[sf];
    verts.iter().all(|&v| match f.structure.locate(&t.carrier[v], &f.by_parent) {
        Some((_, beta)) => {
            let support: Vec<usize> = beta.iter().filter(|(_, b)| *b > 1e-9).map(|(u, _)| *u).collect();
            is_subset(&support, svert)
        }
        None => false,
    })
}

/// Sample points of the open star of `a` inside `facet`: for each face `S`
/// of the opposite face, points with weight `ε` on `a` and the rest spread
/// evenly over `S`.
fn star_samples(a: usize, facet: &[usize]) -> Vec<Vec<(usize, f64)>> {
    let others: Vec<usize> = facet.iter().copied().filter(|&v| v != a).collect();
    let mut out = Vec::new();
    for mask in 1u32..(1u32 << others.len()) {
        let s: Vec<usize> = (0..others.len()).filter(|i| mask & (1 << i) != 0).map(|i| others[i]).collect();
        for eps in [1e-6, 0.5] {
            let rest = (1.0 - eps) / s.len() as f64;
            let mut p = vec![(a, eps)];
            p.extend(s.iter().map(|&v| (v, rest)));
            out.push(p);
        }
    }
    out
}

/// A strip of `n_facets` consecutive `dim`-simplices with unit edges.
fn strip(dim: usize, n_facets: usize) -> Result<MetricComplex> {
    let verts: Vec<usize> = (0..dim + n_facets).collect();
    MetricComplex::new(verts.len(), verts.windows(dim + 1).map(<[usize]>::to_vec).collect(), ComplexMetric::Uniform {
        size: 1.0,
    })
}

/// Random vertex map from `l` to `k` sending every facet onto a simplex.
fn random_simplicial(l: &MetricComplex, k: &MetricComplex, rng: &mut impl Rng) -> Vec<usize> {
    for _ in 0..100 {
        let mut h: Vec<Option<usize>> = vec![None; l.n_vertices()];
        let mut ok = true;
        for v in 0..l.n_vertices() {
            let mut candidates: Vec<usize> = (0..k.n_vertices())
                .filter(|&c| {
                    l.facets_of_vertex(v).iter().all(|&fi| {
                        let mut img: Vec<usize> =
                            l.facets()[fi].iter().filter_map(|&u| if u == v { Some(c) } else { h[u] }).collect();
                        img.sort_unstable();
                        img.dedup();
                        k.is_simplex(&img)
                    })
                })
                .collect();
            if candidates.is_empty() {
                ok = false;
                break;
            }
            h[v] = Some(candidates.swap_remove(rng.gen_range(0..candidates.len())));
        }
        if ok {
            return h.into_iter().map(Option::unwrap).collect();
        }
    }
    vec![0; l.n_vertices()]
}

fn random_point_of(simplex: &[usize], rng: &mut impl Rng) -> ComplexPoint {
    ComplexPoint::new(simplex.iter().map(|&v| (v, -rng.gen::<f64>().max(1e-300).ln()))).expect("positive weights")
}

/// Random PL map whose domain is a strip of `dim`-simplices (`dim` in 1..=3).
///
/// One-dimensional domains, and half of the two-dimensional ones, get a
/// perturbed simplicial map into a strip (a path when the domain is
/// two-dimensional). The rest map into a single codomain facet and are
/// contracted towards its barycenter so the approximation depth stays small:
/// at most 4 subdivisions for triangles and 2 for tetrahedra.
pub fn random_pl_map(rng: &mut impl Rng, dim: usize) -> Result<PLMap> {
    let dim = dim.clamp(1, 3);
    let domain = strip(dim, rng.gen_range(1..=if dim == 3 { 2 } else { 3 }))?;
    let depth = if dim == 1 { rng.gen_range(0..=2) } else { rng.gen_range(0..=1) };
    let structure = barycentric_subdivide(&domain, depth)?;
    let contracted = dim == 3 || (dim == 2 && rng.gen_bool(0.5));
    let codim = if dim == 2 && !contracted { 1 } else { rng.gen_range(1..=3) };
    let codomain = strip(codim, rng.gen_range(1..=3))?;
    let h = if contracted {
        let facet = &codomain.facets()[rng.gen_range(0..codomain.facets().len())];
        (0..domain.n_vertices()).map(|_| facet[rng.gen_range(0..facet.len())]).collect()
    } else {
        random_simplicial(&domain, &codomain, rng)
    };
    let wobble = if dim == 2 && !contracted { 0.0 } else { rng.gen_range(0.0..0.2) };
    let images: Vec<ComplexPoint> = structure
        .carrier
        .iter()
        .map(|x| {
            let y = ComplexPoint::new(x.weights().into_iter().map(|(v, w)| (h[v], w))).expect("convex");
            y.lerp(&random_point_of(y.carrier(), rng), wobble)
        })
        .collect();
    let f = PLMap::new(structure.clone(), codomain.clone(), images)?;
    if !contracted {
        return Ok(f);
    }
    let budget = barycentric_subdivide(&domain, if dim == 3 { 2 } else { 4 })?.mesh();
    let lambda = f.lipschitz_constant();
    let c = if lambda > 0.0 { (codomain.min_inradius() / (4.0 * lambda * budget) * 0.9).min(1.0) } else { 1.0 };
    let union = f.images.iter().fold(Vec::new(), |acc, p| union_sorted(&acc, p.carrier()));
    let center = ComplexPoint::barycenter(&union);
    let images = f.images.iter().map(|p| center.lerp(p, c)).collect();
    PLMap::new(structure, codomain, images)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::ComplexMetric;

    fn unit(simplices: Vec<Vec<usize>>, n: usize) -> MetricComplex {
        MetricComplex::new(n, simplices, ComplexMetric::Uniform { size: 1.0 }).unwrap()
    }

    fn identity_map(k: &MetricComplex) -> PLMap {
        let s = barycentric_subdivide(k, 0).unwrap();
        let images = (0..k.n_vertices()).map(ComplexPoint::vertex).collect();
        PLMap::new(s, k.clone(), images).unwrap()
    }

    #[test]
    fn identity_has_unit_lipschitz_constant() {
        let k = unit(vec![vec![0, 1, 2], vec![1, 2, 3]], 4);
        let f = identity_map(&k);
        assert!((f.lipschitz_constant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn approximation_of_identity_on_an_edge() {
        let k = unit(vec![vec![0, 1]], 2);
        let f = identity_map(&k);
        let g = simplicial_approximation(&f, &ApproxOptions::default()).unwrap();
        // r_1 / 4 = 1/8 needs four halvings to fall strictly below.
        assert_eq!(g.subdivision.depth, 4);
        assert!(g.mesh < g.required_mesh);
        assert!(g.homotopy_lipschitz <= g.mu + 1e-12);
        for c in &g.checks {
            assert!(c.min_coord > 0.0);
        }
    }

    #[test]
    fn forced_shallow_depth_is_rejected() {
        let k = unit(vec![vec![0, 1, 2]], 3);
        let f = identity_map(&k);
        let opts = ApproxOptions { depth: Some(1), ..Default::default() };
        assert!(matches!(simplicial_approximation(&f, &opts), Err(Error::MeshTooCoarse { .. })));
    }

    #[test]
    fn non_simplicial_images_are_rejected() {
        let k = unit(vec![vec![0, 1], vec![1, 2]], 3);
        let s = barycentric_subdivide(&k, 0).unwrap();
        let images = vec![ComplexPoint::vertex(0), ComplexPoint::vertex(2), ComplexPoint::vertex(1)];
        assert!(PLMap::new(s, k, images).is_err());
    }

    #[test]
    fn json_round_trip() {
        let k = unit(vec![vec![0, 1, 2]], 3);
        let s = barycentric_subdivide(&k, 1).unwrap();
        let images =
            s.carrier.iter().map(|p| p.lerp(&ComplexPoint::barycenter(&[0, 1, 2]), 0.5)).collect::<Vec<_>>();
        let f = PLMap::new(s, k, images).unwrap();
        let back = PLMap::from_json(&f.to_json()).unwrap();
        assert_eq!(back.to_json(), f.to_json());
        assert!((f.lipschitz_constant() - 0.5).abs() < 1e-12);
    }
}
