//! Integrated gradients and the differing-versus-matched position study.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};
use crate::mqnli::{node_positions, slots, Example, Vocabulary, PAD};
use crate::natlog::Node;
use crate::neural::TokenGridNetwork;

/// A differentiable scalar function of a flat input vector.
pub trait ScalarFunction: Sync {
    /// Input length.
    fn dim(&self) -> usize;
    /// Value and gradient at `x`.
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>);
}

/// `weights · x + bias`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearFunction {
    /// Coefficients.
    pub weights: Vec<f64>,
    /// Constant term.
    pub bias: f64,
}

impl ScalarFunction for LinearFunction {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let value = self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        (value, self.weights.clone())
    }
}

/// One class logit of a token-grid network as a function of its flattened embedding row.
#[derive(Clone, Copy, Debug)]
pub struct NetworkLogit<'a> {
    /// Network.
    pub net: &'a TokenGridNetwork,
    /// Class whose logit is read.
    pub class: usize,
    /// Sequence length.
    pub positions: usize,
}

impl ScalarFunction for NetworkLogit<'_> {
    fn dim(&self) -> usize {
        self.positions * self.net.width()
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let input = Array2::from_shape_vec((self.positions, self.net.width()), x.to_vec()).expect("flat embedding row");
        let (value, grad) = self.net.input_gradient(&input, self.class);
        (value, grad.into_iter().collect())
    }
}

/// Per-input attributions with what is needed to check completeness.
#[derive(Clone, Debug, PartialEq)]
pub struct Attribution {
    /// One value per input unit.
    pub values: Vec<f64>,
    /// Reference input.
    pub baseline: Vec<f64>,
    /// Riemann steps.
    pub steps: usize,
    /// Function value at the input.
    pub f_input: f64,
    /// Function value at the baseline.
    pub f_baseline: f64,
}

impl Attribution {
    /// `|Σ values − (F(x) − F(baseline))|` relative to `|F(x) − F(baseline)|` (floored at 1e-8).
    pub fn completeness_gap(&self) -> f64 {
        let delta = self.f_input - self.f_baseline;
        (self.values.iter().sum::<f64>() - delta).abs() / delta.abs().max(1e-8)
    }
}

/// Integrated gradients along the straight path from `baseline` to `x`, midpoint rule on `steps` intervals.
pub fn integrated_gradients(f: &dyn ScalarFunction, x: &[f64], baseline: &[f64], steps: usize) -> Result<Attribution> {
    if steps == 0 {
        return Err(Error::Config("integrated gradients needs at least one step".into()));
    }
    if x.len() != f.dim() || baseline.len() != f.dim() {
        return Err(Error::Shape(format!(
            "input {} and baseline {} for a function of {} inputs",
            x.len(),
            baseline.len(),
            f.dim()
        )));
    }
    let mut sum = vec![0.0; x.len()];
    for k in 0..steps {
        let alpha = (k as f64 + 0.5) / steps as f64;
        let point: Vec<f64> = baseline.iter().zip(x).map(|(b, v)| b + alpha * (v - b)).collect();
        let (_, grad) = f.value_and_gradient(&point);
        for (s, g) in sum.iter_mut().zip(&grad) {
            *s += g;
        }
    }
    if sum.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient("integrated gradients".into()));
    }
    let values = sum
        .iter()
        .zip(x.iter().zip(baseline))
        .map(|(g, (v, b))| (v - b) * g / steps as f64)
        .collect();
    Ok(Attribution {
        values,
        baseline: baseline.to_vec(),
        steps,
        f_input: f.value_and_gradient(x).0,
        f_baseline: f.value_and_gradient(baseline).0,
    })
}

/// Attribution of the predicted-class logit to the embedding row, against the all-padding sequence.
pub fn network_attribution(
    net: &TokenGridNetwork,
    vocab: &Vocabulary,
    tokens: &[usize],
    steps: usize,
) -> Result<Attribution> {
    let input = net.embed(tokens)?;
    let baseline = net.embed(&vec![vocab.id(PAD)?; tokens.len()])?;
    let class = net.forward(tokens)?.label;
    let f = NetworkLogit {
        net,
        class,
        positions: tokens.len(),
    };
    integrated_gradients(
        &f,
        input.as_slice().expect("standard layout"),
        baseline.as_slice().expect("standard layout"),
        steps,
    )
}

/// Sum of absolute attributions at each position of a flattened `positions × width` row.
pub fn position_scores(attribution: &Attribution, width: usize) -> Vec<f64> {
    attribution
        .values
        .chunks(width)
        .map(|c| c.iter().map(|v| v.abs()).sum())
        .collect()
}

/// Differing-slot versus matched-slot attribution summary.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchedStudy {
    /// Examples whose sentences differ in exactly one slot.
    pub pairs: usize,
    /// Examples skipped for differing in zero or several slots.
    pub skipped: usize,
    /// Mean score at the differing slot's positions.
    pub differing_mean: f64,
    /// Mean score at the matched slot's positions.
    pub matched_mean: f64,
    /// Examples where the differing slot scored higher.
    pub wins: usize,
    /// Examples where the matched slot scored higher.
    pub losses: usize,
    /// Equal scores.
    pub ties: usize,
    /// Two-sided sign-test p-value over wins and losses.
    pub p_value: f64,
    /// Mean position score over the studied examples, one entry per position.
    pub position_means: Vec<f64>,
}

impl MatchedStudy {
    /// Position means as a two-line table: positions, then scores.
    pub fn position_table(&self) -> String {
        let header: Vec<String> = (0..self.position_means.len()).map(|p| p.to_string()).collect();
        let cells: Vec<String> = self.position_means.iter().map(|v| format!("{v:.6}")).collect();
        format!("{}\n{}\n", header.join("\t"), cells.join("\t"))
    }

    /// Tab-separated one-row table.
    pub fn table(&self) -> String {
        format!(
            "pairs\tskipped\tdiffering_mean\tmatched_mean\twins\tlosses\tties\tp_value\n{}\t{}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{:.6}\n",
            self.pairs,
            self.skipped,
            self.differing_mean,
            self.matched_mean,
            self.wins,
            self.losses,
            self.ties,
            self.p_value
        )
    }
}

/// The single slot where premise and hypothesis differ, if exactly one does.
pub fn single_differing_slot(example: &Example) -> Option<usize> {
    let (p, h) = (slots(&example.premise), slots(&example.hypothesis));
    let mut differing = (0..9).filter(|k| p[*k] != h[*k]);
    let first = differing.next()?;
    differing.next().is_none().then_some(first)
}

/// Two-sided sign test: probability of a split at least this uneven under a fair coin.
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = (wins + losses) as u64;
    if n == 0 {
        return 1.0;
    }
    let binomial = Binomial::new(0.5, n).expect("valid binomial");
    (2.0 * binomial.cdf(wins.min(losses) as u64)).min(1.0)
}

fn slot_score(scores: &[f64], slot: usize) -> f64 {
    let positions = node_positions(Node::ALL[slot]);
    positions.iter().map(|p| scores[*p]).sum::<f64>() / positions.len() as f64
}

/// Compare embedding-row attribution at the one slot where the sentences differ
/// with a randomly chosen other slot. The matched slot of example `i` is drawn
/// from stream `i` of a generator seeded with `seed`.
pub fn matched_position_study(
    net: &TokenGridNetwork,
    vocab: &Vocabulary,
    examples: &[Example],
    steps: usize,
    seed: u64,
) -> Result<MatchedStudy> {
    let chosen: Vec<(usize, usize)> = examples
        .iter()
        .enumerate()
        .filter_map(|(i, e)| single_differing_slot(e).map(|k| (i, k)))
        .collect();
    if chosen.is_empty() {
        return Err(Error::Config("no example differs in exactly one slot".into()));
    }
    let scored: Vec<(f64, f64, Vec<f64>)> = chosen
        .par_iter()
        .map(|(i, differing)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(*i as u64);
            let mut matched = rng.random_range(0..8);
            if matched >= *differing {
                matched += 1;
            }
            let tokens = vocab.encode(&examples[*i].tokens())?;
            let attribution = network_attribution(net, vocab, &tokens, steps)?;
            let scores = position_scores(&attribution, net.width());
            Ok((slot_score(&scores, *differing), slot_score(&scores, matched), scores))
        })
        .collect::<Result<_>>()?;
    let n = scored.len() as f64;
    let wins = scored.iter().filter(|(d, m, _)| d > m).count();
    let losses = scored.iter().filter(|(d, m, _)| d < m).count();
    let mut position_means = vec![0.0; scored[0].2.len()];
    for (_, _, scores) in &scored {
        for (mean, s) in position_means.iter_mut().zip(scores) {
            *mean += s / n;
        }
    }
    Ok(MatchedStudy {
        pairs: scored.len(),
        skipped: examples.len() - scored.len(),
        differing_mean: scored.iter().map(|s| s.0).sum::<f64>() / n,
        matched_mean: scored.iter().map(|s| s.1).sum::<f64>() / n,
        wins,
        losses,
        ties: scored.len() - wins - losses,
        p_value: sign_test(wins, losses),
        position_means,
    })
}
