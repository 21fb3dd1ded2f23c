use std::collections::BTreeMap;

use causabs::mqnli::{generate, generate_examples, GeneratorConfig, Vocabulary, SEQUENCE_LENGTH};
use causabs::natlog::{Lexicon, Node, SignatureLibrary};
use causabs::neural::checkpoint;
use causabs::neural::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lib() -> &'static SignatureLibrary {
    SignatureLibrary::golden()
}

fn tiny_net(seed: u64, residual: bool) -> (TokenGridNetwork, Vec<TrainItem>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = Architecture {
        width: 4,
        layers: 2,
        residual,
    };
    let net = TokenGridNetwork::random(&arch, 6, 5, 3, &mut rng);
    let items = (0..8)
        .map(|_| TrainItem {
            tokens: (0..5).map(|_| rng.random_range(0..6)).collect(),
            label: rng.random_range(0..3),
        })
        .collect();
    (net, items)
}

#[test]
fn addition_nets_compute_sums_and_ignore_the_inert_unit() {
    for net in [FixedAdditionNet::ThreeUnit, FixedAdditionNet::OneHot] {
        for i in 0..10u8 {
            for j in 0..10u8 {
                for k in 0..10u8 {
                    let t = net.forward([i, j, k]);
                    assert_eq!(t.output, f64::from(i + j + k));
                    let patched = net.forward_with([i, j, k], &[(net.inert_unit(), 17.0)]);
                    assert_eq!(patched.output, t.output);
                }
            }
        }
    }
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let (net, items) = tiny_net(1, true);
    let config = TrainConfig {
        learning_rate: 0.0,
        epochs: 3,
        batch_size: 3,
        ..TrainConfig::default()
    };
    let state = train(net.clone(), &items, &[], &config, 5).unwrap();
    assert_eq!(state.net, net);
    assert_eq!(state.loss_history.len(), 3);
    assert_eq!(state.step, 9);
}

#[test]
fn a_single_example_can_be_memorized() {
    let (net, items) = tiny_net(2, true);
    let config = TrainConfig {
        learning_rate: 0.05,
        epochs: 400,
        batch_size: 1,
        ..TrainConfig::default()
    };
    let state = train(net, &items[..1], &[], &config, 0).unwrap();
    assert!(loss(&state.net, &items[0]).unwrap() < 0.01);
    assert_eq!(state.train_accuracy, 1.0);
}

#[test]
fn gradients_match_central_differences() {
    for seed in 0..20 {
        let (net, items) = tiny_net(100 + seed, seed % 2 == 0);
        let report = grad_check(&net, &items[0], 1e-6, 1e-4).unwrap();
        assert!(report.passed, "seed {seed}: {report:?}");
        assert_eq!(report.checked, 6 * 4 + 2 * (25 + 16 + 20) + 3 * 4 + 3);
    }
}

#[test]
fn grad_check_names_a_corrupted_parameter() {
    let (net, items) = tiny_net(7, true);
    let (_, mut grads) = loss_and_gradients(&net, &items[0]).unwrap();
    grads[2][[1, 3]] += 0.5;
    let report = grad_check_against(&net, &items[0], &grads, 1e-6, 1e-4).unwrap();
    assert!(!report.passed);
    assert_eq!(report.worst_parameter, "layer0.features[1,3]");
}

#[test]
fn confident_correct_prediction_has_near_zero_loss_and_gradient() {
    let (mut net, items) = tiny_net(3, true);
    net.head_weight.fill(0.0);
    net.head_bias[[0, items[0].label]] = 50.0;
    let (l, grads) = loss_and_gradients(&net, &items[0]).unwrap();
    assert!(l < 1e-20);
    assert!(grads.iter().all(|g| g.iter().all(|x| x.abs() < 1e-15)));
}

#[test]
fn checkpoints_round_trip_bit_for_bit() {
    let (net, items) = tiny_net(4, true);
    let config = TrainConfig {
        epochs: 2,
        batch_size: 4,
        ..TrainConfig::default()
    };
    let state = train(net, &items, &items[..2], &config, 9).unwrap();
    let meta = BTreeMap::from([("config_hash".to_string(), "abc123".to_string())]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.ckpt");
    checkpoint::save(&state, &meta, &path).unwrap();
    let (loaded, loaded_meta) = checkpoint::load(&path).unwrap();
    assert_eq!(loaded_meta, meta);
    assert_eq!(loaded, state);
    for ((_, a), (_, b)) in loaded.net.tensors().into_iter().zip(state.net.tensors()) {
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    let resumed = train_state(loaded, &items, &[], &config).unwrap();
    let straight = train_state(state, &items, &[], &config).unwrap();
    assert_eq!(resumed.net, straight.net);

    let text = std::fs::read_to_string(&path).unwrap();
    let broken = text.replacen("layer0.features", "layer0.feature", 1);
    assert!(checkpoint::from_text(&broken).is_err());
}

#[test]
fn training_on_mini_dataset_beats_the_majority_class() {
    let config = GeneratorConfig {
        words_per_class: 4,
        count: 2_000,
        ..GeneratorConfig::default()
    };
    let split = generate(&config, lib(), 21).unwrap();
    let vocab = Vocabulary::new(&config.lexicon());
    let items = |xs: &[causabs::mqnli::Example]| -> Vec<TrainItem> {
        xs.iter()
            .map(|e| TrainItem {
                tokens: vocab.encode(&e.tokens()).unwrap(),
                label: e.label_index(),
            })
            .collect()
    };
    let (train_items, dev_items) = (items(&split.train), items(&split.dev));
    let mut counts = [0usize; 3];
    for i in &dev_items {
        counts[i.label] += 1;
    }
    let majority = *counts.iter().max().unwrap() as f64 / dev_items.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let net = TokenGridNetwork::random(&Architecture::default(), vocab.len(), SEQUENCE_LENGTH, 3, &mut rng);
    let state = train(net, &train_items, &dev_items, &TrainConfig::default(), 1).unwrap();
    assert!(
        state.dev_accuracy > majority,
        "dev {} vs majority {majority}",
        state.dev_accuracy
    );
    assert!(state.loss_history.last() < state.loss_history.first());
}

#[test]
fn sparse_networks_refuse_training() {
    let oracle = OracleNetwork::build(&Lexicon::english(2), lib()).unwrap();
    let item = TrainItem {
        tokens: vec![0; SEQUENCE_LENGTH],
        label: 0,
    };
    assert!(loss_and_gradients(&oracle.net, &item).is_err());
}

#[test]
fn oracle_reproduces_every_node_and_label() {
    let config = GeneratorConfig {
        words_per_class: 4,
        count: 3_000,
        ..GeneratorConfig::default()
    };
    let oracle = OracleNetwork::build(&config.lexicon(), lib()).unwrap();
    assert!(!oracle.net.is_trainable());
    for e in generate_examples(&config, lib(), 13).unwrap() {
        let f = oracle.net.forward(&oracle.encode(&e).unwrap()).unwrap();
        assert_eq!(f.label, e.label_index(), "{e}");
        for node in Node::intermediates() {
            assert_eq!(oracle.read_value(*node, &f.grid), Some(e.node(*node)), "{node} on {e}");
        }
    }
}

#[test]
fn oracle_locations_are_distinct_cells() {
    let oracle = OracleNetwork::build(&Lexicon::english(3), lib()).unwrap();
    let mut seen = std::collections::HashSet::new();
    for node in Node::intermediates() {
        let loc = oracle.location(*node).unwrap();
        loc.validate(&oracle.net).unwrap();
        assert!(seen.insert((loc.layer, loc.positions.clone())), "{node}");
    }
    assert!(oracle.location(Node::Root).is_err());
}
