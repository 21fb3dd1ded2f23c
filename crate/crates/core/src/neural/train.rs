//! Cross-entropy training of token-grid networks with hand-derived gradients.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{Mixing, TokenGridNetwork};
use crate::error::{Error, Result};

/// One training example: token ids and a class index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainItem {
    /// Token ids.
    pub tokens: Vec<usize>,
    /// Class index.
    pub label: usize,
}

/// Optimizer settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Step size.
    pub learning_rate: f64,
    /// Momentum coefficient.
    pub momentum: f64,
    /// Examples per step.
    pub batch_size: usize,
    /// Passes over the data.
    pub epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.02,
            momentum: 0.9,
            batch_size: 32,
            epochs: 30,
        }
    }
}

/// Network plus optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    /// Current parameters.
    pub net: TokenGridNetwork,
    /// Momentum buffers, one per tensor.
    pub velocity: Vec<Array2<f64>>,
    /// Optimizer steps taken.
    pub step: usize,
    /// Seed of the shuffling stream.
    pub seed: u64,
    /// Mean training loss per epoch.
    pub loss_history: Vec<f64>,
    /// Accuracy on the training items after the last epoch.
    pub train_accuracy: f64,
    /// Accuracy on the dev items after the last epoch.
    pub dev_accuracy: f64,
}

impl TrainState {
    /// Fresh state with zero momentum.
    pub fn new(net: TokenGridNetwork, seed: u64) -> Self {
        let velocity = net.tensors().iter().map(|(_, t)| Array2::zeros(t.raw_dim())).collect();
        Self {
            net,
            velocity,
            step: 0,
            seed,
            loss_history: Vec::new(),
            train_accuracy: 0.0,
            dev_accuracy: 0.0,
        }
    }
}

fn log_softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    let lse = max + logits.mapv(|x| (x - max).exp()).sum().ln();
    logits.mapv(|x| x - lse)
}

/// Cross-entropy of one example.
pub fn loss(net: &TokenGridNetwork, item: &TrainItem) -> Result<f64> {
    let f = net.forward(&item.tokens)?;
    check_label(net, item)?;
    Ok(-log_softmax(&f.logits)[item.label])
}

fn check_label(net: &TokenGridNetwork, item: &TrainItem) -> Result<()> {
    if item.label >= net.classes() {
        return Err(Error::Shape(format!(
            "label {} outside {} classes",
            item.label,
            net.classes()
        )));
    }
    Ok(())
}

/// Loss and its gradient with respect to every tensor of [`TokenGridNetwork::tensors`].
pub fn loss_and_gradients(net: &TokenGridNetwork, item: &TrainItem) -> Result<(f64, Vec<Array2<f64>>)> {
    if !net.is_trainable() {
        return Err(Error::Config(
            "network has fixed sparse layers and cannot be trained".into(),
        ));
    }
    check_label(net, item)?;
    let mut grid = vec![net.embed(&item.tokens)?];
    let mut pres = Vec::with_capacity(net.layers.len());
    let mut mixed = Vec::with_capacity(net.layers.len());
    for l in 0..net.layers.len() {
        let Mixing::Factored { features, .. } = &net.layers[l].mixing else {
            unreachable!()
        };
        mixed.push(grid[l].dot(&features.t()));
        let (pre, out) = net.layer_forward(l, &grid[l]);
        pres.push(pre);
        grid.push(out);
    }
    let last = grid.last().expect("embedding row");
    let logits = net.head(last);
    let logp = log_softmax(&logits);
    let loss = -logp[item.label];
    let mut dlogits = logp.mapv(f64::exp);
    dlogits[item.label] -= 1.0;

    let d_head_weight = dlogits
        .view()
        .insert_axis(Axis(1))
        .dot(&last.row(0).insert_axis(Axis(0)));
    let d_head_bias = dlogits.clone().insert_axis(Axis(0));
    let mut d_row = Array2::zeros(last.raw_dim());
    d_row.row_mut(0).assign(&net.head_weight.t().dot(&dlogits));

    let mut layer_grads = Vec::with_capacity(net.layers.len());
    for l in (0..net.layers.len()).rev() {
        let Mixing::Factored { positions, features } = &net.layers[l].mixing else {
            unreachable!()
        };
        let d_pre = &d_row * &pres[l].mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
        let d_positions = d_pre.dot(&mixed[l].t());
        let d_mixed = positions.t().dot(&d_pre);
        let d_features = d_mixed.t().dot(&grid[l]);
        let mut d_input = d_mixed.dot(features);
        if net.residual {
            d_input += &d_row;
        }
        layer_grads.push((d_positions, d_features, d_pre));
        d_row = d_input;
    }
    layer_grads.reverse();

    let mut d_embedding = Array2::zeros(net.embedding.raw_dim());
    for (k, t) in item.tokens.iter().enumerate() {
        let mut row = d_embedding.row_mut(*t);
        row += &d_row.row(k);
    }
    let mut grads = vec![d_embedding];
    for (p, f, b) in layer_grads {
        grads.extend([p, f, b]);
    }
    grads.push(d_head_weight);
    grads.push(d_head_bias);
    Ok((loss, grads))
}

/// Fraction of items whose argmax prediction equals the label.
pub fn accuracy(net: &TokenGridNetwork, items: &[TrainItem]) -> Result<f64> {
    if items.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for item in items {
        if net.forward(&item.tokens)?.label == item.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / items.len() as f64)
}

/// Run `config.epochs` epochs of minibatch SGD with momentum
/// (`v ← μv + g`, `p ← p − ηv`) on a state, shuffling with a seeded stream per epoch.
pub fn train_state(
    mut state: TrainState,
    items: &[TrainItem],
    dev: &[TrainItem],
    config: &TrainConfig,
) -> Result<TrainState> {
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    for _ in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(state.seed);
        rng.set_stream(state.loss_history.len() as u64);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut sum: Option<Vec<Array2<f64>>> = None;
            for &i in batch {
                let (l, g) = loss_and_gradients(&state.net, &items[i])?;
                if !l.is_finite() {
                    return Err(Error::NonFiniteLoss { step: state.step });
                }
                total += l;
                match &mut sum {
                    None => sum = Some(g),
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                }
            }
            let scale = 1.0 / batch.len() as f64;
            let grads = sum.expect("non-empty batch");
            for ((p, v), g) in state.net.tensors_mut().into_iter().zip(&mut state.velocity).zip(&grads) {
                v.zip_mut_with(g, |v, g| *v = config.momentum * *v + scale * g);
                p.scaled_add(-config.learning_rate, v);
            }
            state.step += 1;
        }
        let mean = if items.is_empty() {
            0.0
        } else {
            total / items.len() as f64
        };
        if !mean.is_finite() {
            return Err(Error::NonFiniteLoss { step: state.step });
        }
        state.loss_history.push(mean);
    }
    state.train_accuracy = accuracy(&state.net, items)?;
    state.dev_accuracy = accuracy(&state.net, dev)?;
    Ok(state)
}

/// Train a network from scratch.
pub fn train(
    net: TokenGridNetwork,
    items: &[TrainItem],
    dev: &[TrainItem],
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainState> {
    train_state(TrainState::new(net, seed), items, dev, config)
}

/// Largest disagreement between analytic and finite-difference gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Maximum of `|a − n| / max(|a|, |n|, 1e-6)` over all parameters.
    pub max_relative_error: f64,
    /// Parameter attaining it, as `tensor[row,col]`.
    pub worst_parameter: String,
    /// Number of parameters compared.
    pub checked: usize,
    /// Whether the maximum is below the tolerance.
    pub passed: bool,
}

/// Compare given gradients with central differences of the loss.
pub fn grad_check_against(
    net: &TokenGridNetwork,
    item: &TrainItem,
    analytic: &[Array2<f64>],
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    if epsilon <= 0.0 {
        return Err(Error::Config("epsilon must be positive".into()));
    }
    let names: Vec<String> = net.tensors().into_iter().map(|(n, _)| n).collect();
    let mut probe = net.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_parameter: String::new(),
        checked: 0,
        passed: true,
    };
    for (t, name) in names.iter().enumerate() {
        let shape = analytic[t].dim();
        for r in 0..shape.0 {
            for c in 0..shape.1 {
                let original = probe.tensors_mut()[t][[r, c]];
                probe.tensors_mut()[t][[r, c]] = original + epsilon;
                let up = loss(&probe, item)?;
                probe.tensors_mut()[t][[r, c]] = original - epsilon;
                let down = loss(&probe, item)?;
                probe.tensors_mut()[t][[r, c]] = original;
                let numeric = (up - down) / (2.0 * epsilon);
                let a = analytic[t][[r, c]];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                if rel > report.max_relative_error || report.worst_parameter.is_empty() {
                    report.max_relative_error = rel;
                    report.worst_parameter = format!("{name}[{r},{c}]");
                }
                report.checked += 1;
            }
        }
    }
    report.passed = report.max_relative_error < tolerance;
    Ok(report)
}

/// Compare backpropagated gradients with central differences.
pub fn grad_check(net: &TokenGridNetwork, item: &TrainItem, epsilon: f64, tolerance: f64) -> Result<GradCheckReport> {
    let (_, grads) = loss_and_gradients(net, item)?;
    grad_check_against(net, item, &grads, epsilon, tolerance)
}
