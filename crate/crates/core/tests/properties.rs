use coarselab::complex::{random_pl_map, simplicial_approximation, ApproxOptions};
use coarselab::cover::{cover_stats, greedy_cover, nerve_projection, Nerve};
use coarselab::embed::{compression_profile, generate_c0_complex, hilbert_embed, random_point_in, C0GenOptions};
use coarselab::metric::{euclidean_distance, graph_metric, Graph};
use coarselab::rng::stream;
use coarselab::spectral::{random_map, random_regular};
use proptest::prelude::*;
use rand::Rng;

/// A connected graph: a random spanning tree plus extra random edges.
fn connected_graph() -> impl Strategy<Value = Graph> {
    (4usize..40, any::<u64>(), 0usize..30).prop_map(|(n, seed, extra)| {
        let mut rng = stream(seed, "prop/graph");
        let mut edges: Vec<[usize; 2]> = (1..n).map(|v| [rng.gen_range(0..v), v]).collect();
        for _ in 0..extra {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if a != b && !edges.contains(&[a.min(b), a.max(b)]) {
                edges.push([a.min(b), a.max(b)]);
            }
        }
        Graph::from_edges(n, edges).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn graph_metric_is_a_metric(g in connected_graph()) {
        let x = graph_metric(&g).unwrap();
        prop_assert!(x.triangle_violation().is_none());
        for i in 0..x.len() {
            prop_assert_eq!(x.d(i, i), 0.0);
            for j in 0..x.len() {
                prop_assert_eq!(x.d(i, j), x.d(j, i));
                if i != j {
                    prop_assert!(x.d(i, j) >= 1.0);
                }
            }
        }
        for &[a, b] in g.edges() {
            prop_assert_eq!(x.d(a, b), 1.0);
        }
    }

    #[test]
    fn greedy_cover_stats(g in connected_graph(), lambda in 1.0f64..5.0) {
        let x = graph_metric(&g).unwrap();
        let cover = greedy_cover(&x, lambda, 8).unwrap();
        let stats = cover_stats(&x, &cover);
        prop_assert!(stats.mesh <= 4.0 * lambda + 1e-12);
        let nerve = Nerve::new(&x, &cover);
        prop_assert_eq!(stats.multiplicity, nerve.dim() + 1);
        prop_assert!(stats.lebesgue >= 1.0);
        let mut covered = vec![false; x.len()];
        cover.sets.iter().flatten().for_each(|&p| covered[p] = true);
        prop_assert!(covered.iter().all(|&c| c));
    }

    #[test]
    fn projection_coordinates_are_barycentric(g in connected_graph(), scale in 2.0f64..5.0) {
        let x = graph_metric(&g).unwrap();
        let cover = greedy_cover(&x, scale, 8).unwrap();
        let stats = cover_stats(&x, &cover);
        let p = nerve_projection(&x, &cover, stats.lebesgue / 2.0).unwrap();
        let k = p.nerve.complex(p.simplex_size()).unwrap();
        for (pt, sets) in p.points.iter().zip(&p.nerve.memberships) {
            let sum: f64 = pt.coords().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(pt.coords().iter().all(|&c| c > 0.0));
            prop_assert!(k.is_simplex(pt.carrier()));
            prop_assert!(pt.carrier().iter().all(|u| sets.contains(u)));
        }
    }

    #[test]
    fn profile_envelopes_bracket_every_pair(seed in any::<u64>(), n in 3usize..12, dim in 1usize..4) {
        let g = random_regular(2 * n, 3, seed).unwrap();
        let x = graph_metric(&g).unwrap();
        let f = random_map(g.n(), dim, &mut stream(seed, "prop/profile"));
        let prof = compression_profile(&f, |a, b| x.d(a, b));
        for a in 0..g.n() {
            for b in a + 1..g.n() {
                let e = euclidean_distance(&f[a], &f[b]);
                let t = x.d(a, b);
                prop_assert!(prof.rho1_at(t).unwrap() <= e);
                prop_assert!(e <= prof.rho2_at(t).unwrap());
            }
        }
        for w in prof.buckets.windows(2) {
            prop_assert!(w[0].rho1 <= w[1].rho1 && w[0].rho2 <= w[1].rho2);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn c0_embedding_is_three_lipschitz(seed in any::<u64>(), dim in 1usize..4) {
        let mut rng = stream(seed, "prop/c0");
        let opts = C0GenOptions { dim, max_vertices: 80, ..Default::default() };
        let k = generate_c0_complex(&mut rng, &opts).unwrap();
        let points: Vec<_> = (0..120).map(|i| random_point_in(&k, i % k.facets().len(), &mut rng)).collect();
        let emb = hilbert_embed(&k, &points, 1).unwrap();
        prop_assert!(emb.max_ratio <= 3.0);
        for (l, r) in emb.scale.l.iter().zip(&emb.scale.rho) {
            prop_assert!(*r >= l / 2.0 && r <= l);
        }
    }

    #[test]
    fn random_pl_maps_admit_approximations(seed in any::<u64>(), dim in 1usize..4) {
        let f = random_pl_map(&mut stream(seed, "prop/pl"), dim).unwrap();
        let g = simplicial_approximation(&f, &ApproxOptions::default()).unwrap();
        prop_assert!(g.mesh < g.required_mesh);
        prop_assert!(g.checks.iter().all(|c| c.min_coord > 0.0));
        for (v, c) in g.checks.iter().enumerate() {
            prop_assert_eq!(g.vertex_map[v], c.target);
        }
    }
}
