use causabs::baselines::*;
use causabs::mqnli::{
    from_slots, generate, generate_examples, node_positions, slots, Example, GeneratorConfig, Vocabulary,
    SEQUENCE_LENGTH,
};
use causabs::natlog::{Node, SignatureLibrary};
use causabs::neural::{
    train, Architecture, Csr, FixedAdditionNet, GridLayer, GridLocation, Mixing, OracleNetwork, TokenGridNetwork,
    TrainConfig, TrainItem,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn lib() -> &'static SignatureLibrary {
    SignatureLibrary::golden()
}

fn mini_config(count: usize) -> GeneratorConfig {
    GeneratorConfig {
        words_per_class: 4,
        count,
        ..GeneratorConfig::default()
    }
}

/// Rank by Gaussian elimination with partial pivoting.
fn numeric_rank(m: &Array2<f64>) -> usize {
    let mut a = m.clone();
    let (rows, cols) = a.dim();
    let mut rank = 0;
    for c in 0..cols {
        let pivot = (rank..rows).max_by(|x, y| a[[*x, c]].abs().total_cmp(&a[[*y, c]].abs()));
        let Some(p) = pivot else { break };
        if a[[p, c]].abs() < 1e-9 {
            continue;
        }
        for k in 0..cols {
            a.swap([rank, k], [p, k]);
        }
        for r in 0..rows {
            if r != rank {
                let factor = a[[r, c]] / a[[rank, c]];
                for k in 0..cols {
                    a[[r, k]] -= factor * a[[rank, k]];
                }
            }
        }
        rank += 1;
    }
    rank
}

#[test]
fn inert_branch_is_perfectly_probed_but_causally_idle() {
    let config = ProbeConfig {
        epochs: 5_000,
        ..ProbeConfig::default()
    };
    let three = inert_branch_study(FixedAdditionNet::ThreeUnit, 1, &config).unwrap();
    assert_eq!(three.pairs, 1_000_000);
    assert_eq!(three.probe_accuracy, 1.0);
    assert_eq!(three.inert_changes, 0);
    assert!(three.live_changes >= 1);
    let onehot = inert_branch_study(FixedAdditionNet::OneHot, 0, &config).unwrap();
    assert_eq!(onehot.inert_unit, 2);
    assert_eq!(onehot.probe_accuracy, 1.0);
    assert_eq!(onehot.inert_changes, 0);
    assert!(onehot.live_changes >= 1);
}

#[test]
fn rank_zero_probe_predicts_the_majority_class() {
    let features = Array2::from_shape_fn((10, 3), |(i, j)| (i * 3 + j) as f64);
    let labels = [2, 2, 2, 2, 1, 1, 0, 2, 1, 0];
    let probe = train_probe(
        &features,
        &labels,
        3,
        &ProbeConfig {
            rank: 0,
            ..ProbeConfig::default()
        },
    )
    .unwrap();
    assert_eq!(probe.predict(&features), vec![2; 10]);
    assert_eq!(probe.accuracy(&features, &labels), 0.5);
}

#[test]
fn effective_matrix_rank_is_bounded_by_the_factorization() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let features = Array2::from_shape_fn((60, 6), |_| rng.sample::<f64, _>(StandardNormal));
    let labels: Vec<usize> = (0..60).map(|i| i % 5).collect();
    for rank in [1, 2, 3] {
        let probe = train_probe(
            &features,
            &labels,
            5,
            &ProbeConfig {
                rank,
                ..ProbeConfig::default()
            },
        )
        .unwrap();
        assert_eq!(probe.effective().dim(), (5, 6));
        assert!(numeric_rank(&probe.effective()) <= rank);
    }
}

#[test]
fn noise_probe_stays_near_chance() {
    let (classes, n_train, n_test) = (10, 400, 1_000);
    let chance = 1.0 / classes as f64;
    let sigma = (chance * (1.0 - chance) / n_test as f64).sqrt();
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut draw = |n: usize| {
            let x = Array2::from_shape_fn((n, 16), |_| StandardNormal.sample(&mut rng));
            let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
            (x, y)
        };
        let (train_x, train_y) = draw(n_train);
        let (test_x, test_y) = draw(n_test);
        let probe = train_probe(
            &train_x,
            &train_y,
            classes,
            &ProbeConfig {
                seed,
                ..ProbeConfig::default()
            },
        )
        .unwrap();
        let acc = probe.accuracy(&test_x, &test_y);
        assert!((acc - chance).abs() < 3.0 * sigma, "seed {seed}: {acc}");
    }
}

#[test]
fn probe_input_errors() {
    let x = Array2::zeros((3, 2));
    assert!(train_probe(&x, &[0, 1], 2, &ProbeConfig::default()).is_err());
    assert!(train_probe(&x, &[0, 1, 2], 2, &ProbeConfig::default()).is_err());
    assert!(train_probe(&Array2::zeros((0, 2)), &[], 2, &ProbeConfig::default()).is_err());
}

#[test]
fn control_labels_are_deterministic() {
    let task = ControlTask {
        node: Node::SubjectPhrase,
        seed: 9,
    };
    assert_eq!(task.classes(), 7);
    assert_eq!(
        ControlTask {
            node: Node::SubjectQuantifier,
            seed: 9
        }
        .classes(),
        16
    );
    assert_eq!(
        ControlTask {
            node: Node::Negation,
            seed: 9
        }
        .classes(),
        4
    );
    assert_eq!(
        ControlTask {
            node: Node::Adverb,
            seed: 9
        }
        .classes(),
        5
    );
    let tuple = ["happy", "baker", "ε", "baker"];
    let first = task.label(&tuple);
    assert_eq!(task.label(&tuple), first);
    assert_eq!(task.clone().label(&tuple), first);
    assert!(first < 7);
    // Frozen value: the hash is part of the file format of control tables.
    assert_eq!(
        first,
        task.label(&tuple.map(String::from).iter().map(String::as_str).collect::<Vec<_>>())
    );
    let reseeded = ControlTask { seed: 10, ..task };
    let tuples: Vec<[String; 1]> = (0..50).map(|i| [format!("w{i}")]).collect();
    assert!(tuples.iter().any(|t| task.label(&[&t[0]]) != reseeded.label(&[&t[0]])));
    let examples = generate_examples(&mini_config(50), lib(), 3).unwrap();
    for e in &examples {
        assert_eq!(task.label_example(e), task.label_example(&e.clone()));
    }
}

#[test]
fn selectivity_is_the_difference() {
    assert_eq!(selectivity(0.9, 0.9), 0.0);
    assert!((selectivity(0.95, 0.3) - 0.65).abs() < 1e-12);
}

#[test]
fn linear_integrated_gradients_match_the_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let dim = rng.random_range(1..12);
        let f = LinearFunction {
            weights: (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect(),
            bias: rng.random_range(-1.0..1.0),
        };
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
        for steps in [1, 7, 512] {
            let a = integrated_gradients(&f, &x, &vec![0.0; dim], steps).unwrap();
            for i in 0..dim {
                assert!((a.values[i] - f.weights[i] * x[i]).abs() < 1e-10);
            }
            assert!(a.completeness_gap() < 1e-10);
        }
        let same = integrated_gradients(&f, &x, &x, 16).unwrap();
        assert!(same.values.iter().all(|v| *v == 0.0));
    }
    let f = LinearFunction {
        weights: vec![1.0; 3],
        bias: 0.0,
    };
    assert!(integrated_gradients(&f, &[1.0; 3], &[0.0; 3], 0).is_err());
    assert!(integrated_gradients(&f, &[1.0; 2], &[0.0; 3], 4).is_err());
}

fn trained_net() -> (TokenGridNetwork, Vocabulary, Vec<Example>) {
    let config = mini_config(1_500);
    let split = generate(&config, lib(), 31).unwrap();
    let vocab = Vocabulary::new(&config.lexicon());
    let items: Vec<TrainItem> = split
        .train
        .iter()
        .map(|e| TrainItem {
            tokens: vocab.encode(&e.tokens()).unwrap(),
            label: e.label_index(),
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let net = TokenGridNetwork::random(&Architecture::default(), vocab.len(), SEQUENCE_LENGTH, 3, &mut rng);
    let cfg = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let state = train(net, &items, &[], &cfg, 2).unwrap();
    (state.net, vocab, split.dev)
}

#[test]
fn network_integrated_gradients_converge() {
    // The strict 1% bound at 512 steps is checked (and reported) by the
    // acceptance run; ReLU kinks on the path make a few inputs with a small
    // logit change exceed it, so here the convergence behaviour is pinned.
    let (net, vocab, dev) = trained_net();
    let (mut below, mut coarse_total, mut fine_total) = (0, 0.0, 0.0);
    for e in dev.iter().take(50) {
        let tokens = vocab.encode(&e.tokens()).unwrap();
        let coarse = network_attribution(&net, &vocab, &tokens, 32).unwrap();
        let fine = network_attribution(&net, &vocab, &tokens, 512).unwrap();
        let finest = network_attribution(&net, &vocab, &tokens, 4096).unwrap();
        assert_eq!(fine.steps, 512);
        assert_eq!(fine.values.len(), SEQUENCE_LENGTH * net.width());
        assert!(fine.completeness_gap() < 0.05, "gap {}", fine.completeness_gap());
        let absolute = (finest.values.iter().sum::<f64>() - (finest.f_input - finest.f_baseline)).abs();
        assert!(absolute < 1e-3, "absolute gap {absolute}");
        below += usize::from(fine.completeness_gap() < 0.01);
        coarse_total += coarse.completeness_gap();
        fine_total += fine.completeness_gap();
    }
    assert!(below >= 45, "{below} of 50 below 1%");
    assert!(fine_total < coarse_total);
}

#[test]
fn input_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for residual in [true, false] {
        let arch = Architecture {
            width: 5,
            layers: 3,
            residual,
        };
        let net = TokenGridNetwork::random(&arch, 7, 4, 3, &mut rng);
        let input = Array2::from_shape_fn((4, 5), |_| rng.random_range(-1.0..1.0));
        for class in 0..3 {
            let (_, grad) = net.input_gradient(&input, class);
            for p in 0..4 {
                for u in 0..5 {
                    let eps = 1e-6;
                    let mut plus = input.clone();
                    plus[[p, u]] += eps;
                    let mut minus = input.clone();
                    minus[[p, u]] -= eps;
                    let numeric =
                        (net.input_gradient(&plus, class).0 - net.input_gradient(&minus, class).0) / (2.0 * eps);
                    assert!(
                        (numeric - grad[[p, u]]).abs() <= 1e-6 * (1.0 + numeric.abs()),
                        "{p},{u}"
                    );
                }
            }
        }
    }
}

/// Examples whose hypothesis is the premise with one slot replaced: `slot`, or a random one.
fn single_change_examples(n: usize, seed: u64, slot: Option<usize>) -> Vec<Example> {
    let config = mini_config(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = generate_examples(&config, lib(), seed).unwrap();
    let mut out = Vec::new();
    for e in &base {
        let donor = &base[rng.random_range(0..base.len())];
        let mut s = slots(&e.premise);
        let (p, d) = (slots(&e.premise), slots(&donor.hypothesis));
        let choices: Vec<usize> = (0..9)
            .filter(|k| p[*k] != d[*k] && slot.is_none_or(|x| x == *k))
            .collect();
        if choices.is_empty() {
            continue;
        }
        let k = choices[rng.random_range(0..choices.len())];
        s[k] = d[k].clone();
        out.push(Example::new(lib(), e.premise.clone(), from_slots(&s).unwrap()));
    }
    out
}

/// One-hot embeddings; position 0 of the single layer holds `ReLU(premise verb − hypothesis verb)`
/// per word, and class 1 sums it. Only the verb slot can move the output.
fn verb_comparator(vocab: &Vocabulary) -> TokenGridNetwork {
    let v = vocab.len();
    let positions = node_positions(Node::Verb);
    let (p, h) = (positions[0], positions[1]);
    let triplets = (0..v)
        .flat_map(|u| [(u, p * v + u, 1.0), (u, h * v + u, -1.0)])
        .collect();
    let mut head_weight = Array2::zeros((2, v));
    head_weight.row_mut(1).fill(1.0);
    let mut head_bias = Array2::zeros((1, 2));
    head_bias[[0, 0]] = 0.5;
    TokenGridNetwork {
        embedding: Array2::eye(v),
        layers: vec![GridLayer {
            mixing: Mixing::Sparse(Csr::from_triplets(SEQUENCE_LENGTH * v, SEQUENCE_LENGTH * v, triplets)),
            bias: Array2::zeros((SEQUENCE_LENGTH, v)),
        }],
        head_weight,
        head_bias,
        residual: false,
        positions: SEQUENCE_LENGTH,
    }
}

#[test]
fn attribution_concentrates_where_only_the_differing_slot_matters() {
    let config = mini_config(10);
    let vocab = Vocabulary::new(&config.lexicon());
    let net = verb_comparator(&vocab);
    let verb_slot = Node::ALL.iter().position(|n| *n == Node::Verb).unwrap();
    let examples = single_change_examples(60, 12, Some(verb_slot));
    assert!(examples.len() >= 30);
    assert!(examples.iter().all(|e| single_differing_slot(e) == Some(verb_slot)));
    let study = matched_position_study(&net, &vocab, &examples, 64, 0).unwrap();
    assert_eq!(study.pairs, examples.len());
    assert_eq!(study.wins, examples.len());
    assert!((study.differing_mean - 0.5).abs() < 1e-12);
    assert_eq!(study.matched_mean, 0.0);
    assert!(study.p_value < 1e-6);
}

#[test]
fn oracle_study_reports_both_means() {
    let config = mini_config(10);
    let oracle = OracleNetwork::build(&config.lexicon(), lib()).unwrap();
    let examples = single_change_examples(60, 12, None);
    let study = matched_position_study(&oracle.net, &oracle.vocabulary, &examples, 64, 0).unwrap();
    assert_eq!(study.pairs, examples.len());
    assert_eq!(study.wins + study.losses + study.ties, study.pairs);
    assert!(study.differing_mean > 0.0 && study.matched_mean > 0.0);
    assert_eq!(study.table().lines().count(), 2);
    let again = matched_position_study(&oracle.net, &oracle.vocabulary, &examples, 64, 0).unwrap();
    assert_eq!(again, study);
}

#[test]
fn study_skips_examples_without_a_single_difference() {
    let config = mini_config(40);
    let oracle = OracleNetwork::build(&config.lexicon(), lib()).unwrap();
    let same: Vec<Example> = generate_examples(&config, lib(), 1)
        .unwrap()
        .into_iter()
        .map(|e| Example::new(lib(), e.premise.clone(), e.premise.clone()))
        .collect();
    assert!(matched_position_study(&oracle.net, &oracle.vocabulary, &same, 8, 0).is_err());
    let mut mixed = same.clone();
    mixed.extend(single_change_examples(5, 3, None));
    let study = matched_position_study(&oracle.net, &oracle.vocabulary, &mixed, 8, 0).unwrap();
    assert_eq!(study.pairs, 5);
    assert_eq!(study.skipped, same.len());
}

#[test]
fn sign_test_values() {
    assert_eq!(sign_test(0, 0), 1.0);
    assert!((sign_test(10, 0) - 2.0 / 1024.0).abs() < 1e-12);
    assert!((sign_test(3, 3) - 1.0).abs() < 1e-12);
    // Two-sided P(X ≤ 2) for Binomial(8, 1/2) = 2 · 37/256.
    assert!((sign_test(2, 6) - 74.0 / 256.0).abs() < 1e-12);
}

#[test]
fn probe_location_reports_both_tasks() {
    let config = mini_config(300);
    let oracle = OracleNetwork::build(&config.lexicon(), lib()).unwrap();
    let examples = generate_examples(&config, lib(), 6).unwrap();
    let (train_x, dev_x) = examples.split_at(200);
    let node = Node::SubjectNoun;
    let report = probe_location(
        &oracle.net,
        &oracle.vocabulary,
        train_x,
        dev_x,
        node,
        &oracle.location(node).unwrap(),
        &ProbeConfig::default(),
        0,
    )
    .unwrap();
    eprintln!("{}", probe_table(std::slice::from_ref(&report)));
    assert_eq!(report.train_accuracy, 1.0);
    assert_eq!(
        report.selectivity,
        report.train_accuracy - report.control_train_accuracy
    );
    assert!(report.dev_accuracy > 0.95);
    let other = GridLocation::new(0, &[0]);
    let cls = probe_location(
        &oracle.net,
        &oracle.vocabulary,
        train_x,
        dev_x,
        node,
        &other,
        &ProbeConfig::default(),
        0,
    )
    .unwrap();
    assert!(cls.train_accuracy < 1.0);
}
