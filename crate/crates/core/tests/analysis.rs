use causabs::analysis::*;
use causabs::interchange::BitMatrix;
use causabs::natlog::Node;
use causabs::neural::GridLocation;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graph(n: usize, p: f64, p_impactful: f64, rng: &mut impl Rng) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let mut edges = Vec::new();
    let mut imp = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
                if rng.random_bool(p_impactful) {
                    imp.push((i, j));
                }
            }
        }
    }
    (edges, imp)
}

/// Subset enumeration: the lexicographically smallest largest clique that contains an impactful edge.
fn brute_force(n: usize, edges: &[(usize, usize)], imp: &[(usize, usize)]) -> Vec<usize> {
    let mut adj = vec![0u32; n];
    for &(a, b) in edges {
        adj[a] |= 1 << b;
        adj[b] |= 1 << a;
    }
    let mut best: Vec<usize> = Vec::new();
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|v| mask >> v & 1 == 1).collect();
        if members.len() < best.len().max(2) {
            continue;
        }
        if !members.iter().all(|v| (adj[*v] | 1 << v) & mask == mask) {
            continue;
        }
        if !imp.iter().any(|(a, b)| mask >> a & 1 == 1 && mask >> b & 1 == 1) {
            continue;
        }
        if members.len() > best.len() || members < best {
            best = members;
        }
    }
    best
}

fn exact() -> CliqueConfig {
    CliqueConfig {
        mode: CliqueMode::Exact,
        ..CliqueConfig::default()
    }
}

#[test]
fn graph_construction_rules() {
    let all = BitMatrix::from_rows(&vec![vec![true; 4]; 4]).unwrap();
    let none = BitMatrix::new(4);
    let g = build_graph(&all, &none).unwrap();
    assert_eq!(g.edges().len(), 6);
    assert!(g.impactful_edges().is_empty());

    let mut one_way = BitMatrix::new(3);
    one_way.set(0, 1, true);
    one_way.set(1, 2, true);
    one_way.set(2, 1, true);
    one_way.set(0, 0, true);
    let mut imp = BitMatrix::new(3);
    imp.set(2, 1, true);
    let g = build_graph(&one_way, &imp).unwrap();
    assert_eq!(g.edges(), vec![(1, 2)]);
    assert_eq!(g.impactful_edges(), vec![(1, 2)]);

    assert!(build_graph(&all, &BitMatrix::new(3)).is_err());
    assert!(build_graph_from_rows(&[vec![true, true], vec![true]], &[vec![false; 2], vec![false; 2]]).is_err());
    assert_eq!(
        g.edge_list(),
        "# vertices 3\n# edge impactful iff either ordered pair is impactful\n1 2 1\n"
    );
}

#[test]
fn complete_graph_with_impactful_edges() {
    let edges: Vec<(usize, usize)> = (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).collect();
    let g = SuccessGraph::from_edges(5, &edges, &edges).unwrap();
    for mode in [CliqueMode::Exact, CliqueMode::Heuristic, CliqueMode::Auto] {
        let r = max_clique_impactful(
            &g,
            &CliqueConfig {
                mode,
                ..CliqueConfig::default()
            },
        )
        .unwrap();
        assert_eq!(r.vertices, vec![0, 1, 2, 3, 4]);
        assert_eq!(r.witness, Some((0, 1)));
    }
}

#[test]
fn no_impactful_edge_gives_the_marker() {
    let g = SuccessGraph::from_edges(4, &[(0, 1), (1, 2), (0, 2)], &[]).unwrap();
    let r = max_clique_impactful(&g, &exact()).unwrap();
    assert_eq!(r.size(), 0);
    assert!(r.no_impactful_edge());
    let empty = SuccessGraph::from_edges(0, &[], &[]).unwrap();
    assert_eq!(max_clique_impactful(&empty, &exact()).unwrap().size(), 0);
}

#[test]
fn planted_constraint_beats_the_global_maximum() {
    let mut edges = Vec::new();
    for i in 0..10 {
        for j in i + 1..10 {
            edges.push((i, j));
        }
    }
    for i in 10..16 {
        for j in i + 1..16 {
            edges.push((i, j));
        }
    }
    let g = SuccessGraph::from_edges(16, &edges, &[(12, 14)]).unwrap();
    let r = max_clique_impactful(&g, &exact()).unwrap();
    assert_eq!(r.vertices, (10..16).collect::<Vec<_>>());
    assert_eq!(r.witness, Some((12, 14)));
    assert_eq!(brute_force(16, &edges, &[(12, 14)]), r.vertices);
}

#[test]
fn exact_solver_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..100 {
        let p = [0.3, 0.5, 0.7][trial % 3];
        let (edges, imp) = random_graph(18, p, 0.2, &mut rng);
        let g = SuccessGraph::from_edges(18, &edges, &imp).unwrap();
        let r = max_clique_impactful(&g, &exact()).unwrap();
        assert_eq!(r.vertices, brute_force(18, &edges, &imp), "trial {trial}, p {p}");
        let h = max_clique_impactful(
            &g,
            &CliqueConfig {
                mode: CliqueMode::Heuristic,
                ..CliqueConfig::default()
            },
        )
        .unwrap();
        assert!(h.size() <= r.size());
    }
}

#[test]
fn mode_bounds() {
    let (edges, imp) = random_graph(30, 0.5, 0.5, &mut ChaCha8Rng::seed_from_u64(1));
    let g = SuccessGraph::from_edges(30, &edges, &imp).unwrap();
    let tight = CliqueConfig {
        exact_vertex_bound: 10,
        ..exact()
    };
    assert!(matches!(
        max_clique_impactful(&g, &tight),
        Err(causabs::Error::BudgetExceeded { .. })
    ));
    let auto = CliqueConfig {
        mode: CliqueMode::Auto,
        ..tight
    };
    let r = max_clique_impactful(&g, &auto).unwrap();
    assert!(!r.exact);
    verify_clique(&g, &r.vertices, r.witness).unwrap();
}

#[test]
fn certificates_reject_non_cliques() {
    let g = SuccessGraph::from_edges(4, &[(0, 1), (1, 2)], &[(0, 1)]).unwrap();
    assert!(verify_clique(&g, &[0, 1], Some((0, 1))).is_ok());
    assert!(verify_clique(&g, &[0, 1, 2], Some((0, 1))).is_err());
    assert!(verify_clique(&g, &[1, 2], Some((1, 2))).is_err());
    assert!(verify_clique(&g, &[1, 0], Some((0, 1))).is_err());
    assert!(verify_clique(&g, &[0, 1], None).is_err());
}

#[test]
fn summaries() {
    assert_eq!(summarize(&[]), Summary::default());
    assert_eq!(Summary::default().main_table(), "node\tmax_clique\tlocation\n");
    let clique = |n: usize| CliqueResult {
        vertices: (0..n).collect(),
        witness: (n > 0).then_some((0, 1)),
        exact: true,
    };
    let results = vec![
        LocationClique {
            node: Node::Verb,
            location: GridLocation::new(1, &[8]),
            vertices: 9,
            clique: clique(3),
        },
        LocationClique {
            node: Node::Verb,
            location: GridLocation::new(2, &[8]),
            vertices: 9,
            clique: clique(7),
        },
        LocationClique {
            node: Node::Verb,
            location: GridLocation::new(2, &[8, 21]),
            vertices: 9,
            clique: clique(7),
        },
    ];
    let s = summarize(&results[..1]);
    assert_eq!(s.per_node, vec![(Node::Verb, 3, GridLocation::new(1, &[8]))]);
    let s = summarize(&results);
    assert_eq!(s.per_node, vec![(Node::Verb, 7, GridLocation::new(2, &[8]))]);
    assert_eq!(s.location_table().lines().count(), 4);
    let heat = s.heatmaps(10);
    assert!(heat.contains("1\t-\t-\t-\t-\t-\t-\t-\t-\t3\t-"));
    assert!(heat.contains("2\t-\t-\t-\t-\t-\t-\t-\t-\t7\t-"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adding_edges_never_shrinks_the_optimum(seed in any::<u64>(), n in 4usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (edges, imp) = random_graph(n, 0.4, 0.3, &mut rng);
        let (extra, extra_imp) = random_graph(n, 0.2, 0.3, &mut rng);
        let mut all_edges = edges.clone();
        all_edges.extend(extra.iter().filter(|e| !edges.contains(e)));
        let mut all_imp = imp.clone();
        all_imp.extend(extra_imp.iter().filter(|e| !edges.contains(e)));
        let small = SuccessGraph::from_edges(n, &edges, &imp).unwrap();
        let big = SuccessGraph::from_edges(n, &all_edges, &all_imp).unwrap();
        let a = max_clique_impactful(&small, &exact()).unwrap();
        let b = max_clique_impactful(&big, &exact()).unwrap();
        prop_assert!(a.size() <= b.size());
        let h = max_clique_impactful(&big, &CliqueConfig { mode: CliqueMode::Heuristic, seed, ..CliqueConfig::default() }).unwrap();
        prop_assert!(h.size() <= b.size());
        verify_clique(&big, &h.vertices, h.witness).unwrap();
    }
}
