//! Seeded generation of labeled pairs and train/dev/test splits.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Example;
use crate::error::{Error, Result};
use crate::natlog::{Lexicon, Quantifier, Sentence, SignatureLibrary, WordClass};

/// The only generator accepted in configs; recorded in provenance.
pub const PRNG_NAME: &str = "chacha8";

/// Subject quantifier, negation and object quantifier of one sentence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QuantifierFrame {
    /// Subject quantifier.
    pub subject: Quantifier,
    /// Negation.
    pub negated: bool,
    /// Object quantifier.
    pub object: Quantifier,
}

impl QuantifierFrame {
    /// Frame of a sentence.
    pub fn of(s: &Sentence) -> Self {
        Self {
            subject: s.subject_quantifier,
            negated: s.negated,
            object: s.object_quantifier,
        }
    }
}

fn quantifier_token(q: Quantifier) -> &'static str {
    match q {
        Quantifier::NotEvery => "not-every",
        other => other.word(),
    }
}

impl fmt::Display for QuantifierFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let neg = if self.negated { "not" } else { "ε" };
        write!(
            f,
            "{}/{}/{}",
            quantifier_token(self.subject),
            neg,
            quantifier_token(self.object)
        )
    }
}

impl FromStr for QuantifierFrame {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad holdout frame `{s}`, expected e.g. every/not/some"));
        let parts: Vec<&str> = s.split('/').collect();
        let [q, n, o] = parts[..] else { return Err(bad()) };
        let quant = |w: &str| w.replace('-', " ").parse::<Quantifier>().map_err(|_| bad());
        let negated = match n {
            "not" => true,
            "ε" | "none" | "-" => false,
            _ => return Err(bad()),
        };
        Ok(Self {
            subject: quant(q)?,
            negated,
            object: quant(o)?,
        })
    }
}

/// How examples are divided into train, dev and test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SplitMode {
    /// Uniformly random assignment.
    Random,
    /// Examples with either sentence in one of these frames never go to train.
    Holdout(Vec<QuantifierFrame>),
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitMode::Random => f.write_str("random"),
            SplitMode::Holdout(frames) => {
                let parts: Vec<String> = frames.iter().map(|t| t.to_string()).collect();
                write!(f, "holdout:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for SplitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "random" {
            return Ok(SplitMode::Random);
        }
        let spec = s
            .strip_prefix("holdout:")
            .ok_or_else(|| Error::Config(format!("unknown split mode `{s}`")))?;
        let frames = spec.split(',').map(str::parse).collect::<Result<Vec<_>>>()?;
        Ok(SplitMode::Holdout(frames))
    }
}

impl Serialize for SplitMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SplitMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Dataset generation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Words per open class.
    pub words_per_class: usize,
    /// Number of distinct pairs.
    pub count: usize,
    /// Probability that an optional slot is empty.
    pub epsilon_probability: f64,
    /// Probability that a hypothesis slot copies the premise slot.
    pub copy_probability: f64,
    /// Split mode.
    pub split: SplitMode,
    /// Fraction of examples in dev.
    pub dev_fraction: f64,
    /// Fraction of examples in test.
    pub test_fraction: f64,
    /// Random generator; only `chacha8` is supported.
    pub prng: String,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            words_per_class: 8,
            count: 10_000,
            epsilon_probability: 0.5,
            copy_probability: 0.5,
            split: SplitMode::Random,
            dev_fraction: 0.1,
            test_fraction: 0.1,
            prng: PRNG_NAME.to_string(),
        }
    }
}

impl GeneratorConfig {
    fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")))
            }
        };
        prob("epsilon_probability", self.epsilon_probability)?;
        prob("copy_probability", self.copy_probability)?;
        prob("dev_fraction", self.dev_fraction)?;
        prob("test_fraction", self.test_fraction)?;
        if self.dev_fraction + self.test_fraction > 1.0 {
            return Err(Error::Config("dev and test fractions exceed 1".into()));
        }
        if self.prng != PRNG_NAME {
            return Err(Error::Config(format!(
                "unsupported prng `{}`, only `{PRNG_NAME}`",
                self.prng
            )));
        }
        if self.words_per_class == 0 {
            return Err(Error::Config("words_per_class must be positive".into()));
        }
        Ok(())
    }

    /// The lexicon these settings generate from.
    pub fn lexicon(&self) -> Lexicon {
        Lexicon::english(self.words_per_class)
    }

    /// Number of distinct sentences the lexicon admits.
    pub fn sentence_capacity(&self) -> u128 {
        let lex = self.lexicon();
        let n = |c: WordClass| lex.words(c).len() as u128 + u128::from(c.optional());
        let q = Quantifier::ALL.len() as u128;
        WordClass::ALL.iter().map(|c| n(*c)).product::<u128>() * q * q * 2
    }
}

/// Where a dataset came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Generation seed.
    pub seed: u64,
    /// Hash of the generator configuration.
    pub config_hash: String,
    /// Random generator name.
    pub prng: String,
    /// Split mode.
    pub split: String,
}

/// Train, dev and test examples with their provenance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSplit {
    /// Training examples.
    pub train: Vec<Example>,
    /// Development examples.
    pub dev: Vec<Example>,
    /// Test examples.
    pub test: Vec<Example>,
    /// Seed, config hash and split mode.
    pub provenance: Provenance,
}

fn draw_word<R: Rng>(rng: &mut R, words: &[String]) -> String {
    words[rng.random_range(0..words.len())].clone()
}

fn draw_optional<R: Rng>(rng: &mut R, words: &[String], epsilon: f64) -> Option<String> {
    if rng.random_bool(epsilon) {
        None
    } else {
        Some(draw_word(rng, words))
    }
}

fn draw_sentence<R: Rng>(rng: &mut R, lex: &Lexicon, epsilon: f64) -> Sentence {
    let q = |rng: &mut R| Quantifier::ALL[rng.random_range(0..4)];
    Sentence {
        subject_quantifier: q(rng),
        subject_adjective: draw_optional(rng, &lex.subject_adjectives, epsilon),
        subject_noun: draw_word(rng, &lex.subject_nouns),
        negated: rng.random_bool(0.5),
        adverb: draw_optional(rng, &lex.adverbs, epsilon),
        verb: draw_word(rng, &lex.verbs),
        object_quantifier: q(rng),
        object_adjective: draw_optional(rng, &lex.object_adjectives, epsilon),
        object_noun: draw_word(rng, &lex.object_nouns),
    }
}

/// Hypothesis built slot by slot, each slot copied from the premise with
/// probability `copy` and drawn afresh otherwise.
fn draw_hypothesis<R: Rng>(rng: &mut R, lex: &Lexicon, premise: &Sentence, epsilon: f64, copy: f64) -> Sentence {
    let fresh = draw_sentence(rng, lex, epsilon);
    let mut keep = [false; 9];
    for k in &mut keep {
        *k = rng.random_bool(copy);
    }
    let pick = |i: usize, p: &Sentence, f: &Sentence| if keep[i] { p.clone() } else { f.clone() };
    let p = premise;
    let f = &fresh;
    Sentence {
        subject_quantifier: if keep[0] {
            p.subject_quantifier
        } else {
            f.subject_quantifier
        },
        subject_adjective: pick(1, p, f).subject_adjective,
        subject_noun: pick(2, p, f).subject_noun,
        negated: if keep[3] { p.negated } else { f.negated },
        adverb: pick(4, p, f).adverb,
        verb: pick(5, p, f).verb,
        object_quantifier: if keep[6] {
            p.object_quantifier
        } else {
            f.object_quantifier
        },
        object_adjective: pick(7, p, f).object_adjective,
        object_noun: pick(8, p, f).object_noun,
    }
}

/// Generator for candidate `index`: one ChaCha8 stream per index, so the
/// candidate sequence does not depend on how work is scheduled.
fn candidate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Generate `config.count` distinct labeled pairs.
pub fn generate_examples(config: &GeneratorConfig, lib: &SignatureLibrary, seed: u64) -> Result<Vec<Example>> {
    config.validate()?;
    let lex = config.lexicon();
    let sentences = config.sentence_capacity();
    let capacity = sentences.saturating_mul(sentences);
    if config.count as u128 > capacity {
        return Err(Error::Capacity {
            requested: config.count,
            available: usize::try_from(capacity).unwrap_or(usize::MAX),
        });
    }
    let max_candidates = (config.count as u64).saturating_mul(50).max(10_000);
    let mut seen = HashSet::with_capacity(config.count);
    let mut out = Vec::with_capacity(config.count);
    let mut next = 0u64;
    while out.len() < config.count {
        if next >= max_candidates {
            return Err(Error::Capacity {
                requested: config.count,
                available: out.len(),
            });
        }
        let batch = ((config.count - out.len()) as u64 * 2 + 64).min(max_candidates - next);
        let pairs: Vec<(Sentence, Sentence)> = (next..next + batch)
            .into_par_iter()
            .map(|i| {
                let mut rng = candidate_rng(seed, i);
                let p = draw_sentence(&mut rng, &lex, config.epsilon_probability);
                let h = draw_hypothesis(&mut rng, &lex, &p, config.epsilon_probability, config.copy_probability);
                (p, h)
            })
            .collect();
        next += batch;
        for pair in pairs {
            if out.len() == config.count {
                break;
            }
            if seen.insert(pair.clone()) {
                out.push(pair);
            }
        }
    }
    Ok(out.into_par_iter().map(|(p, h)| Example::new(lib, p, h)).collect())
}

/// Generate and split a dataset.
pub fn generate(config: &GeneratorConfig, lib: &SignatureLibrary, seed: u64) -> Result<DatasetSplit> {
    let examples = generate_examples(config, lib, seed)?;
    let mut rng = candidate_rng(seed, u64::MAX);
    let held = |e: &Example| match &config.split {
        SplitMode::Random => false,
        SplitMode::Holdout(frames) => {
            frames.contains(&QuantifierFrame::of(&e.premise)) || frames.contains(&QuantifierFrame::of(&e.hypothesis))
        }
    };
    let (held_out, rest): (Vec<usize>, Vec<usize>) = (0..examples.len()).partition(|i| held(&examples[*i]));
    let mut order = rest;
    order.shuffle(&mut rng);
    let n = order.len() as f64;
    let n_test = (n * config.test_fraction).round() as usize;
    let n_dev = (n * config.dev_fraction).round() as usize;
    let mut test: Vec<usize> = order[..n_test].to_vec();
    let mut dev: Vec<usize> = order[n_test..n_test + n_dev].to_vec();
    let mut train: Vec<usize> = order[n_test + n_dev..].to_vec();
    test.extend(held_out);
    for part in [&mut train, &mut dev, &mut test] {
        part.sort_unstable();
    }
    let take = |idx: &[usize]| idx.iter().map(|i| examples[*i].clone()).collect::<Vec<_>>();
    Ok(DatasetSplit {
        train: take(&train),
        dev: take(&dev),
        test: take(&test),
        provenance: Provenance {
            seed,
            config_hash: crate::config::digest(config),
            prng: config.prng.clone(),
            split: config.split.to_string(),
        },
    })
}
