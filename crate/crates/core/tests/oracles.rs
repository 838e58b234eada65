//! Library results against independent computations and closed forms.

use std::collections::VecDeque;
use std::f64::consts::PI;

use coarselab::cover::{cover_stats, greedy_cover, nerve_projection, projection_stretch};
use coarselab::embed::{audit_member, far_pair_census, normalize_lipschitz, scale_schedule, spectral_embedding};
use coarselab::metric::{graph_metric, squared_distance, Graph};
use coarselab::rng::stream;
use coarselab::spectral::{cheeger_constant, lambda1, poincare_constant, poincare_ratio, random_map, random_regular, spectrum};
use coarselab::{Cheeger, SpectralReport};
use rand::Rng;

fn hops(g: &Graph, src: usize) -> Vec<usize> {
    let mut d = vec![usize::MAX; g.n()];
    let mut q = VecDeque::from([src]);
    d[src] = 0;
    while let Some(v) = q.pop_front() {
        for &w in g.neighbors(v) {
            if d[w] == usize::MAX {
                d[w] = d[v] + 1;
                q.push_back(w);
            }
        }
    }
    d
}

fn assert_spectrum(g: &Graph, mut expect: Vec<f64>) {
    expect.sort_by(f64::total_cmp);
    let (vals, _) = spectrum(g);
    for (a, b) in vals.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn cycle_path_and_complete_spectra() {
    for n in 3..=30 {
        assert_spectrum(&Graph::cycle(n), (0..n).map(|k| 2.0 - 2.0 * (2.0 * PI * k as f64 / n as f64).cos()).collect());
        assert_spectrum(&Graph::path(n), (0..n).map(|k| 2.0 - 2.0 * (PI * k as f64 / n as f64).cos()).collect());
        assert_spectrum(&Graph::complete(n), (0..n).map(|k| if k == 0 { 0.0 } else { n as f64 }).collect());
    }
}

/// Exhaustive `min |∂A| / |A|` over bitmasks.
fn brute_cheeger(g: &Graph) -> f64 {
    let n = g.n();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        let size = mask.count_ones() as usize;
        if 2 * size > n {
            continue;
        }
        let mut boundary = 0u32;
        for v in 0..n {
            if mask >> v & 1 == 1 {
                for &w in g.neighbors(v) {
                    boundary |= 1 << w;
                }
            }
        }
        boundary &= !mask;
        best = best.min(boundary.count_ones() as f64 / size as f64);
    }
    best
}

#[test]
fn exact_cheeger_matches_bitmask_enumeration() {
    let mut graphs = vec![Graph::complete(4), Graph::cycle(6), Graph::path(4), Graph::cycle(11), Graph::complete(7)];
    for seed in 0..6 {
        graphs.push(random_regular(12, 3, seed).unwrap());
        graphs.push(random_regular(14, 4, seed).unwrap());
    }
    for g in &graphs {
        let Cheeger::Exact { value, set } = cheeger_constant(g, 24).unwrap() else { panic!("exact regime") };
        assert!((value - brute_cheeger(g)).abs() < 1e-12);
        assert!(2 * set.len() <= g.n());
    }
    let Cheeger::Exact { value, .. } = cheeger_constant(&Graph::complete(4), 24).unwrap() else { unreachable!() };
    assert_eq!(value, 1.0);
}

#[test]
fn spectral_regime_brackets_the_constant() {
    let g = random_regular(30, 3, 5).unwrap();
    let c = cheeger_constant(&g, 24).unwrap();
    assert_eq!(c.method(), "spectral");
    let (l1, _) = lambda1(&g).unwrap();
    assert!((c.lower() - l1 / 6.0).abs() < 1e-12);
    assert!((c.upper() - (6.0 * l1).sqrt()).abs() < 1e-12);
}

#[test]
fn fiedler_vector_attains_the_poincare_constant() {
    for (n, seed) in [(16, 1), (64, 2), (200, 3)] {
        let g = random_regular(n, 4, seed).unwrap();
        let (l1, v) = lambda1(&g).unwrap();
        let c0 = poincare_constant(&g, l1);
        assert!((c0 - 2.0 * g.edges().len() as f64 / ((n - 1) as f64 * l1)).abs() < 1e-12 * c0);
        let f: Vec<Vec<f64>> = v.iter().map(|&x| vec![x]).collect();
        let r = poincare_ratio(&g, &f, 2.0).unwrap();
        assert!((r - c0).abs() < 1e-9 * c0);
        let mut rng = stream(seed, "oracle/poincare");
        for dim in 1..6 {
            let f = random_map(n, dim, &mut rng);
            let mut pairs = 0.0;
            for x in 0..n {
                for y in x + 1..n {
                    pairs += squared_distance(&f[x], &f[y]);
                }
            }
            let edges: f64 = g.edges().iter().map(|&[a, b]| squared_distance(&f[a], &f[b])).sum();
            let direct = (pairs / (n * (n - 1) / 2) as f64) / (edges / g.edges().len() as f64);
            let r = poincare_ratio(&g, &f, 2.0).unwrap();
            assert!((r - direct).abs() < 1e-9 * direct);
            assert!(r <= c0 * (1.0 + 1e-9));
        }
    }
}

#[test]
fn far_threshold_of_the_64_member_is_two() {
    let g = random_regular(64, 4, 9).unwrap();
    let c = far_pair_census(&g).unwrap();
    assert!((c.threshold - 2.0).abs() < 1e-12);
    assert_eq!(c.ball_bound, 32.0);
}

#[test]
fn audit_matches_direct_far_pair_minimum() {
    for n in [64, 128, 256] {
        let g = random_regular(n, 4, stream(3, &format!("oracle/audit/{n}")).gen()).unwrap();
        let report = SpectralReport::new(&g, 24).unwrap();
        let raw = spectral_embedding(&g, 3);
        let row = audit_member(&g, &report, "spectral", &raw);

        let stretch = g
            .edges()
            .iter()
            .map(|&[a, b]| squared_distance(&raw[a], &raw[b]).sqrt())
            .fold(0.0, f64::max);
        let threshold = ((n as f64) / 4.0).ln() / 4f64.ln();
        let mut min_far = f64::INFINITY;
        for x in 0..n {
            let d = hops(&g, x);
            for y in x + 1..n {
                if d[y] as f64 >= threshold {
                    min_far = min_far.min(squared_distance(&raw[x], &raw[y]) / (stretch * stretch));
                }
            }
        }
        assert!((row.min_far_sq - min_far).abs() <= 1e-9 * min_far.max(1e-12), "n={n}");
        assert!(min_far <= 4.0 * report.c0);
        let mut f = raw.clone();
        let factor = normalize_lipschitz(&g, &mut f);
        assert!((factor * stretch - 1.0).abs() < 1e-12);
    }
}

#[test]
fn census_counts_match_direct_enumeration() {
    let g = random_regular(128, 4, 4).unwrap();
    let c = far_pair_census(&g).unwrap();
    let t = c.threshold;
    let mut far = 0;
    for x in 0..g.n() {
        let d = hops(&g, x);
        far += (x + 1..g.n()).filter(|&y| d[y] as f64 >= t).count();
    }
    assert_eq!(c.far_pairs, far);
    assert_eq!(c.far_pairs + c.near_pairs, 128 * 127 / 2);
}

#[test]
fn schedule_places_members_far_apart() {
    let members: Vec<Graph> = [16, 32, 64].iter().map(|&n| random_regular(n, 4, n as u64).unwrap()).collect();
    let s = scale_schedule(&members).unwrap();
    for k in 0..2 {
        let diam = |g: &Graph| (0..g.n()).map(|x| *hops(g, x).iter().max().unwrap()).max().unwrap() as f64;
        assert_eq!(s.links[k], diam(&members[k]) + diam(&members[k + 1]) + 2f64.powi(k as i32 + 1));
        assert_eq!(s.offsets[k + 1], s.offsets[k] + s.links[k]);
    }
    // Cross-member distances dominate both diameters.
    let d = s.distance(&members, 0, 5, 2, 7);
    assert!(d >= s.links[0] + s.links[1]);
    assert_eq!(d, s.distance(&members, 2, 7, 0, 5));
    let mut last = 0;
    for t in 0..(s.offsets[2] as usize + 5) {
        if let Some(n) = s.n_at(&members, t as f64) {
            assert!(n >= last);
            last = n;
        }
    }
}

/// With Lebesgue number 1 on a unit-edge graph, adjacent points can have
/// disjoint carriers, and the projection then stretches an edge.
#[test]
fn projection_needs_lebesgue_two_on_unit_graphs() {
    let g = random_regular(100, 3, 2).unwrap();
    let x = graph_metric(&g).unwrap();
    let cover = greedy_cover(&x, 2.0, 8).unwrap();
    let stats = cover_stats(&x, &cover);
    assert_eq!(stats.lebesgue, 1.0);
    let p = nerve_projection(&x, &cover, stats.lebesgue / 2.0).unwrap();
    let (l, (a, b)) = projection_stretch(&x, &p, 1).unwrap();
    assert!(l > 1.0, "stretch {l}");
    assert_eq!(x.d(a, b), 1.0);
    assert!(p.points[a].carrier().iter().all(|u| !p.points[b].carrier().contains(u)));

    let cover = greedy_cover(&x, 4.0, 8).unwrap();
    let stats = cover_stats(&x, &cover);
    assert!(stats.lebesgue >= 2.0);
    let p = nerve_projection(&x, &cover, stats.lebesgue / 2.0).unwrap();
    let (l, _) = projection_stretch(&x, &p, 1).unwrap();
    assert!(l <= 1.0 + 1e-9);
}
