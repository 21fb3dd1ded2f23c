//! Low-rank linear softmax probes, control tasks and selectivity.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::interchange::capture;
use crate::mqnli::{node_positions, Example, Vocabulary};
use crate::natlog::{Node, Relation};
use crate::neural::{argmax, FixedAdditionNet, GridLocation, TokenGridNetwork};

/// Probe optimizer settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// Inner dimension of the factorization; 0 gives a bias-only probe.
    pub rank: usize,
    /// Adam step size.
    pub learning_rate: f64,
    /// Adam first-moment decay.
    pub beta1: f64,
    /// Adam second-moment decay.
    pub beta2: f64,
    /// Full-batch steps.
    pub epochs: usize,
    /// Seed for the factor initialization.
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            rank: 8,
            learning_rate: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            epochs: 400,
            seed: 0,
        }
    }
}

/// Softmax classifier whose weight matrix is stored as `left · right`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProbe {
    /// Classes × rank.
    pub left: Array2<f64>,
    /// Rank × features.
    pub right: Array2<f64>,
    /// One bias per class.
    pub bias: Array1<f64>,
    /// Feature means subtracted before the linear map.
    pub mean: Array1<f64>,
    /// Feature scales divided out before the linear map.
    pub scale: Array1<f64>,
}

impl LinearProbe {
    /// Number of classes.
    pub fn classes(&self) -> usize {
        self.bias.len()
    }

    /// The full weight matrix, rank at most `left.ncols()`.
    pub fn effective(&self) -> Array2<f64> {
        self.left.dot(&self.right)
    }

    fn standardize(&self, features: &Array2<f64>) -> Array2<f64> {
        (features - &self.mean) / &self.scale
    }

    /// Class scores for each row of `features`.
    pub fn logits(&self, features: &Array2<f64>) -> Array2<f64> {
        let z = self.standardize(features);
        z.dot(&self.right.t()).dot(&self.left.t()) + &self.bias
    }

    /// Predicted class per row.
    pub fn predict(&self, features: &Array2<f64>) -> Vec<usize> {
        self.logits(features).rows().into_iter().map(argmax).collect()
    }

    /// Fraction of rows predicted correctly; 0 for no rows.
    pub fn accuracy(&self, features: &Array2<f64>, labels: &[usize]) -> f64 {
        if labels.is_empty() {
            return 0.0;
        }
        let hits = self
            .predict(features)
            .iter()
            .zip(labels)
            .filter(|(p, y)| p == y)
            .count();
        hits as f64 / labels.len() as f64
    }
}

fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, b| a.max(*b));
        row.mapv_inplace(|x| (x - m).exp());
        let s = row.sum();
        row /= s;
    }
}

struct Adam {
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Adam {
    fn new(len: usize) -> Self {
        Self {
            first: vec![0.0; len],
            second: vec![0.0; len],
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], t: i32, config: &ProbeConfig) {
        let c1 = 1.0 - config.beta1.powi(t);
        let c2 = 1.0 - config.beta2.powi(t);
        for (k, (p, g)) in params.iter_mut().zip(grad).enumerate() {
            self.first[k] = config.beta1 * self.first[k] + (1.0 - config.beta1) * g;
            self.second[k] = config.beta2 * self.second[k] + (1.0 - config.beta2) * g * g;
            *p -= config.learning_rate * (self.first[k] / c1) / ((self.second[k] / c2).sqrt() + 1e-8);
        }
    }
}

/// Fit a probe by full-batch Adam on mean cross-entropy.
pub fn train_probe(
    features: &Array2<f64>,
    labels: &[usize],
    classes: usize,
    config: &ProbeConfig,
) -> Result<LinearProbe> {
    let (n, d) = features.dim();
    if n != labels.len() {
        return Err(Error::Shape(format!("{n} feature rows, {} labels", labels.len())));
    }
    if n == 0 || classes == 0 {
        return Err(Error::Config("probe needs at least one example and one class".into()));
    }
    if let Some(bad) = labels.iter().find(|y| **y >= classes) {
        return Err(Error::Shape(format!("label {bad} outside {classes} classes")));
    }
    let mean = features.mean_axis(Axis(0)).expect("nonempty");
    let scale = features
        .std_axis(Axis(0), 0.0)
        .mapv(|s| if s > 1e-12 { s } else { 1.0 });
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 0.1).expect("valid deviation");
    let mut probe = LinearProbe {
        left: Array2::from_shape_fn((classes, config.rank), |_| normal.sample(&mut rng)),
        right: Array2::from_shape_fn((config.rank, d), |_| normal.sample(&mut rng)),
        bias: Array1::zeros(classes),
        mean,
        scale,
    };
    let z = probe.standardize(features);
    let mut onehot = Array2::<f64>::zeros((n, classes));
    for (i, y) in labels.iter().enumerate() {
        onehot[[i, *y]] = 1.0;
    }
    let mut adam_left = Adam::new(probe.left.len());
    let mut adam_right = Adam::new(probe.right.len());
    let mut adam_bias = Adam::new(classes);
    for step in 0..config.epochs {
        let projected = z.dot(&probe.right.t());
        let mut p = projected.dot(&probe.left.t()) + &probe.bias;
        softmax_rows(&mut p);
        let loss = -(&p * &onehot).sum_axis(Axis(1)).mapv(|x| x.max(1e-300).ln()).sum() / n as f64;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        let d_logits = (p - &onehot) / n as f64;
        let g_left = d_logits.t().dot(&projected);
        let g_right = d_logits.dot(&probe.left).t().dot(&z);
        let g_bias = d_logits.sum_axis(Axis(0));
        let t = i32::try_from(step + 1).unwrap_or(i32::MAX);
        let slice = |a: &Array2<f64>| a.as_standard_layout().into_owned().into_raw_vec_and_offset().0;
        adam_left.step(
            probe.left.as_slice_mut().expect("standard layout"),
            &slice(&g_left),
            t,
            config,
        );
        adam_right.step(
            probe.right.as_slice_mut().expect("standard layout"),
            &slice(&g_right),
            t,
            config,
        );
        adam_bias.step(
            probe.bias.as_slice_mut().expect("contiguous"),
            g_bias.as_slice().expect("contiguous"),
            t,
            config,
        );
    }
    Ok(probe)
}

/// Fixed random relabeling of a node's token tuple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ControlTask {
    /// Node whose tokens are relabeled.
    pub node: Node,
    /// Seed mixed into every hash.
    pub seed: u64,
}

impl ControlTask {
    /// Control label count: the seven relations for relation-valued nodes, the operator-pair count otherwise.
    pub fn classes(&self) -> usize {
        if self.node.is_operator() {
            self.node.value_space().len()
        } else {
            Relation::ALL.len()
        }
    }

    /// Control label of a token tuple.
    pub fn label(&self, tokens: &[&str]) -> usize {
        let key = format!("{}|{}|{}", self.seed, self.node.name(), tokens.join(" "));
        let digest = Sha256::digest(key.as_bytes());
        let head = u64::from_be_bytes(digest[..8].try_into().expect("eight bytes"));
        (head % self.classes() as u64) as usize
    }

    /// Control label of an example: the tokens the node spans in both sentences.
    pub fn label_example(&self, example: &Example) -> usize {
        let tokens = example.tokens();
        let tuple: Vec<&str> = node_positions(self.node).iter().map(|p| tokens[*p]).collect();
        self.label(&tuple)
    }
}

/// Probe accuracy minus control accuracy.
pub fn selectivity(probe_accuracy: f64, control_accuracy: f64) -> f64 {
    probe_accuracy - control_accuracy
}

/// Index of an example's node value within the node's value space.
pub fn node_target(example: &Example, node: Node) -> usize {
    let value = example.node(node);
    node.value_space()
        .iter()
        .position(|v| *v == value)
        .expect("value in space")
}

/// Captured activations at `loc`, one row per token sequence.
pub fn probe_features(net: &TokenGridNetwork, tokens: &[Vec<usize>], loc: &GridLocation) -> Result<Array2<f64>> {
    let rows: Vec<Vec<f64>> = tokens.par_iter().map(|t| capture(net, t, loc)).collect::<Result<_>>()?;
    let width = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((tokens.len(), width), flat).map_err(|e| Error::Shape(e.to_string()))
}

/// Probe and control-task results at one location.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    /// Probed node.
    pub node: Node,
    /// Probed cells.
    pub location: GridLocation,
    /// Probe rank.
    pub rank: usize,
    /// Node-value probe accuracy on the training examples.
    pub train_accuracy: f64,
    /// Node-value probe accuracy on the held-out examples.
    pub dev_accuracy: f64,
    /// Control probe accuracy on the training examples.
    pub control_train_accuracy: f64,
    /// Control probe accuracy on the held-out examples.
    pub control_dev_accuracy: f64,
    /// Train accuracy minus control train accuracy.
    pub selectivity: f64,
}

/// Train the node probe and its control probe at one location.
#[allow(clippy::too_many_arguments)]
pub fn probe_location(
    net: &TokenGridNetwork,
    vocab: &Vocabulary,
    train: &[Example],
    dev: &[Example],
    node: Node,
    loc: &GridLocation,
    config: &ProbeConfig,
    control_seed: u64,
) -> Result<ProbeReport> {
    let encode = |xs: &[Example]| -> Result<Vec<Vec<usize>>> { xs.iter().map(|e| vocab.encode(&e.tokens())).collect() };
    let train_x = probe_features(net, &encode(train)?, loc)?;
    let dev_x = probe_features(net, &encode(dev)?, loc)?;
    let targets = |xs: &[Example]| -> Vec<usize> { xs.iter().map(|e| node_target(e, node)).collect() };
    let control = ControlTask {
        node,
        seed: control_seed,
    };
    let controls = |xs: &[Example]| -> Vec<usize> { xs.iter().map(|e| control.label_example(e)).collect() };

    let (train_y, dev_y) = (targets(train), targets(dev));
    let probe = train_probe(&train_x, &train_y, node.value_space().len(), config)?;
    let (train_c, dev_c) = (controls(train), controls(dev));
    let control_probe = train_probe(&train_x, &train_c, control.classes(), config)?;
    let train_accuracy = probe.accuracy(&train_x, &train_y);
    let control_train_accuracy = control_probe.accuracy(&train_x, &train_c);
    Ok(ProbeReport {
        node,
        location: loc.clone(),
        rank: config.rank,
        train_accuracy,
        dev_accuracy: probe.accuracy(&dev_x, &dev_y),
        control_train_accuracy,
        control_dev_accuracy: control_probe.accuracy(&dev_x, &dev_c),
        selectivity: selectivity(train_accuracy, control_train_accuracy),
    })
}

/// Tab-separated probe table.
pub fn probe_table(reports: &[ProbeReport]) -> String {
    let mut out = String::from("node\tlocation\trank\ttrain\tdev\tcontrol_train\tcontrol_dev\tselectivity\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
            r.node,
            r.location,
            r.rank,
            r.train_accuracy,
            r.dev_accuracy,
            r.control_train_accuracy,
            r.control_dev_accuracy,
            r.selectivity
        );
    }
    out
}

/// Outcome of probing a fixed addition network's hidden units.
#[derive(Clone, Debug, PartialEq)]
pub struct InertBranchReport {
    /// Probed unit.
    pub inert_unit: usize,
    /// Accuracy of a probe reading `i + j` from the inert unit, over every input.
    pub probe_accuracy: f64,
    /// Ordered input pairs evaluated.
    pub pairs: usize,
    /// Pairs whose output changes when the inert unit takes the source's value.
    pub inert_changes: usize,
    /// Same count for the unit the output reads.
    pub live_changes: usize,
}

/// Probe the inert hidden unit of a fixed addition network for `i + j` and count
/// which ordered pairs a swap of that unit (and of a live unit) affects.
pub fn inert_branch_study(net: FixedAdditionNet, live_unit: usize, config: &ProbeConfig) -> Result<InertBranchReport> {
    let inputs: Vec<[u8; 3]> = crate::interchange::all_digit_triples();
    let inert = net.inert_unit();
    let traces: Vec<_> = inputs.iter().map(|d| net.forward(*d)).collect();
    let features = Array2::from_shape_fn((inputs.len(), 1), |(i, _)| traces[i].hidden[inert]);
    let labels: Vec<usize> = inputs.iter().map(|d| usize::from(d[0] + d[1])).collect();
    let probe = train_probe(&features, &labels, 19, config)?;
    let count_changes = |unit: usize| -> usize {
        inputs
            .par_iter()
            .zip(&traces)
            .map(|(base, trace)| {
                traces
                    .iter()
                    .filter(|source| net.forward_with(*base, &[(unit, source.hidden[unit])]).output != trace.output)
                    .count()
            })
            .sum()
    };
    Ok(InertBranchReport {
        inert_unit: inert,
        probe_accuracy: probe.accuracy(&features, &labels),
        pairs: inputs.len() * inputs.len(),
        inert_changes: count_changes(inert),
        live_changes: count_changes(live_unit),
    })
}
