//! End-to-end runs: one configuration, named seed streams, stage artifacts
//! that carry the hash of the configuration they came from, and reports.
//!
//! Stage layout under the output directory:
//!
//! | stage   | writes                                   | reads            |
//! |---------|------------------------------------------|------------------|
//! | gen     | `data/{train,dev,test}.jsonl`            |                  |
//! | train   | `model.ckpt`                             | data             |
//! | sweep   | `sweep.bits`, `sweep.tsv`                | data, model      |
//! | cliques | `cliques.tsv`, `graphs/*.edges`          | sweep            |
//! | probe   | `probes.tsv`                             | data, model      |
//! | ig      | `attribution.tsv`, `attribution_positions.tsv` | data, model |
//! | report  | `report/*`                               | cliques, probe and ig when present |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::abstraction::CheckOptions;
use crate::addition::{self, AdditionAlignment};
use crate::analysis::{build_graph, cliques_for, summarize, CliqueConfig, CliqueResult, LocationClique};
use crate::baselines::{
    matched_position_study, probe_location, probe_table, single_differing_slot, MatchedStudy, ProbeConfig, ProbeReport,
};
use crate::config::digest;
use crate::error::{Error, Result};
use crate::interchange::{
    alignment_search, correctly_classified, read_bitmatrices, summary_tsv, write_bitmatrices, LocationPolicy,
};
use crate::mqnli::{
    augment, generate, load_split, save_split, DatasetSplit, Example, GeneratorConfig, Vocabulary,
    DEFAULT_VERIFY_SAMPLE, SENTENCE_LABELS, SEQUENCE_LENGTH, TOTAL_LABELS,
};
use crate::natlog::{Node, SignatureLibrary};
use crate::neural::{
    checkpoint, train, Architecture, GridLocation, OracleNetwork, TokenGridNetwork, TrainConfig, TrainItem,
};

/// Which network the analysis stages run on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// A token-grid network trained by the `train` stage.
    Trained,
    /// The hand-built oracle network; needs no training.
    Oracle,
}

/// Model settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Network kind.
    pub kind: ModelKind,
    /// Shape of a trained network.
    pub architecture: Architecture,
    /// Optimizer.
    pub training: TrainConfig,
    /// Add one subphrase example per node to the training set.
    pub augment: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Trained,
            architecture: Architecture::default(),
            training: TrainConfig::default(),
            augment: false,
        }
    }
}

/// Interchange sweep settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Node names; empty means every intermediate node.
    pub nodes: Vec<String>,
    /// Candidate locations per node.
    pub policy: LocationPolicy,
    /// Correctly classified test examples to sweep over.
    pub sample: usize,
    /// Upper bound on the number of interchange runs.
    pub max_interchanges: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            nodes: Vec::new(),
            policy: LocationPolicy::default(),
            sample: 200,
            max_interchanges: 4_000_000_000,
        }
    }
}

/// Probe and attribution settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Probe optimizer; its rank is overridden by `ranks`.
    pub probe: ProbeConfig,
    /// Probe ranks to train.
    pub ranks: Vec<usize>,
    /// Node names to probe; empty means every intermediate node.
    pub probe_nodes: Vec<String>,
    /// Probe training examples (correctly classified, from train).
    pub probe_train: usize,
    /// Probe evaluation examples (correctly classified, from dev).
    pub probe_dev: usize,
    /// Integrated-gradients steps.
    pub ig_steps: usize,
    /// Single-difference test examples in the attribution study.
    pub ig_examples: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            probe: ProbeConfig {
                epochs: 200,
                ..ProbeConfig::default()
            },
            ranks: vec![8, 32],
            probe_nodes: Vec::new(),
            probe_train: 400,
            probe_dev: 100,
            ig_steps: 512,
            ig_examples: 200,
        }
    }
}

/// Everything a run depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed; every stage draws from a named substream of it.
    pub seed: u64,
    /// Dataset generation.
    pub dataset: GeneratorConfig,
    /// Network.
    pub model: ModelConfig,
    /// Interchange sweep.
    pub sweep: SweepConfig,
    /// Clique scoring.
    pub analysis: CliqueConfig,
    /// Probes and attributions.
    pub baselines: BaselineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset: GeneratorConfig {
                count: 2_000,
                words_per_class: 4,
                ..GeneratorConfig::default()
            },
            model: ModelConfig::default(),
            sweep: SweepConfig::default(),
            analysis: CliqueConfig::default(),
            baselines: BaselineConfig::default(),
        }
    }
}

/// Pipeline stages whose outputs carry a hash.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Dataset generation.
    Dataset,
    /// Model training.
    Model,
    /// Interchange sweep.
    Sweep,
    /// Clique scoring.
    Cliques,
    /// Probes and attributions.
    Baselines,
    /// Merged report.
    Report,
}

impl RunConfig {
    /// Read a TOML (`.toml`) or JSON configuration.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }

    /// Canonical TOML rendering.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Seed of a named substream.
    pub fn stage_seed(&self, name: &str) -> u64 {
        let digest = Sha256::digest(format!("{}/{name}", self.seed).as_bytes());
        u64::from_be_bytes(digest[..8].try_into().expect("eight bytes"))
    }

    /// Hash of the configuration sections a stage depends on.
    pub fn stage_hash(&self, stage: Stage) -> String {
        let (s, d, m) = (self.seed, &self.dataset, &self.model);
        match stage {
            Stage::Dataset => digest(&(s, d)),
            Stage::Model => digest(&(s, d, m)),
            Stage::Sweep => digest(&(s, d, m, &self.sweep)),
            Stage::Cliques => digest(&(s, d, m, &self.sweep, &self.analysis)),
            Stage::Baselines => digest(&(s, d, m, &self.baselines)),
            Stage::Report => digest(self),
        }
    }

    fn nodes(names: &[String]) -> Result<Vec<Node>> {
        if names.is_empty() {
            return Ok(Node::intermediates().to_vec());
        }
        names
            .iter()
            .map(|n| {
                let node: Node = n.parse()?;
                if node == Node::Root {
                    return Err(Error::Config("the root node has no interchange location".into()));
                }
                Ok(node)
            })
            .collect()
    }

    /// Nodes the sweep covers.
    pub fn sweep_nodes(&self) -> Result<Vec<Node>> {
        Self::nodes(&self.sweep.nodes)
    }

    /// Nodes the probes cover.
    pub fn probe_nodes(&self) -> Result<Vec<Node>> {
        Self::nodes(&self.baselines.probe_nodes)
    }
}

fn check_hash(artifact: &Path, expected: &str, found: &str) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ConfigMismatch {
            artifact: artifact.display().to_string(),
            expected: expected.to_string(),
            found: found.to_string(),
        })
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Files of one run.
#[derive(Clone, Debug)]
pub struct Pipeline {
    /// Configuration.
    pub config: RunConfig,
    /// Output directory.
    pub out_dir: PathBuf,
    lib: &'static SignatureLibrary,
}

const HASH_PREFIX: &str = "# config ";

fn split_hash_line<'a>(path: &Path, text: &'a str) -> Result<(&'a str, &'a str)> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let hash = first
        .strip_prefix(HASH_PREFIX)
        .ok_or_else(|| Error::parse(path.display().to_string(), "missing config hash line"))?;
    Ok((hash, rest))
}

impl Pipeline {
    /// A run writing under `out_dir`.
    pub fn new(config: RunConfig, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            config,
            out_dir: out_dir.into(),
            lib: SignatureLibrary::golden(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Generate and save the dataset.
    pub fn gen(&self) -> Result<String> {
        let mut split = generate(&self.config.dataset, self.lib, self.config.stage_seed("dataset"))?;
        split.provenance.config_hash = self.config.stage_hash(Stage::Dataset);
        save_split(&split, &self.path("data"))?;
        Ok(format!(
            "generated {} train, {} dev, {} test examples",
            split.train.len(),
            split.dev.len(),
            split.test.len()
        ))
    }

    /// Load the dataset, checking it came from this configuration.
    pub fn dataset(&self) -> Result<DatasetSplit> {
        let dir = self.path("data");
        let split = load_split(&dir, self.lib, DEFAULT_VERIFY_SAMPLE)?;
        check_hash(
            &dir,
            &self.config.stage_hash(Stage::Dataset),
            &split.provenance.config_hash,
        )?;
        Ok(split)
    }

    fn vocabulary(&self) -> Vocabulary {
        Vocabulary::new(&self.config.dataset.lexicon())
    }

    fn train_items(&self, vocab: &Vocabulary, examples: &[Example], with_subphrases: bool) -> Result<Vec<TrainItem>> {
        let mut items = Vec::new();
        for e in examples {
            items.push(TrainItem {
                tokens: vocab.encode(&e.tokens())?,
                label: e.label_index(),
            });
            if with_subphrases {
                for sub in augment(self.lib, e) {
                    let tokens: Vec<&str> = sub.tokens.iter().map(String::as_str).collect();
                    items.push(TrainItem {
                        tokens: vocab.encode(&tokens)?,
                        label: sub.label_index(),
                    });
                }
            }
        }
        Ok(items)
    }

    /// Train and save the network.
    pub fn train(&self) -> Result<String> {
        let model = &self.config.model;
        if model.kind == ModelKind::Oracle {
            return Err(Error::Config("the oracle network is built, not trained".into()));
        }
        let split = self.dataset()?;
        let vocab = self.vocabulary();
        let items = self.train_items(&vocab, &split.train, model.augment)?;
        let dev = self.train_items(&vocab, &split.dev, false)?;
        let classes = if model.augment { TOTAL_LABELS } else { SENTENCE_LABELS };
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.stage_seed("init"));
        let net = TokenGridNetwork::random(&model.architecture, vocab.len(), SEQUENCE_LENGTH, classes, &mut rng);
        let state = train(net, &items, &dev, &model.training, self.config.stage_seed("train"))?;
        let meta = BTreeMap::from([("config_hash".to_string(), self.config.stage_hash(Stage::Model))]);
        checkpoint::save(&state, &meta, &self.path("model.ckpt"))?;
        Ok(format!(
            "trained {} steps: train accuracy {:.4}, dev accuracy {:.4}",
            state.step, state.train_accuracy, state.dev_accuracy
        ))
    }

    /// The network the analysis stages use, with its vocabulary.
    pub fn model(&self) -> Result<(TokenGridNetwork, Vocabulary)> {
        match self.config.model.kind {
            ModelKind::Oracle => {
                let oracle = OracleNetwork::build(&self.config.dataset.lexicon(), self.lib)?;
                Ok((oracle.net, oracle.vocabulary))
            }
            ModelKind::Trained => {
                let path = self.path("model.ckpt");
                let (state, meta) = checkpoint::load(&path)?;
                let found = meta.get("config_hash").map_or("", String::as_str);
                check_hash(&path, &self.config.stage_hash(Stage::Model), found)?;
                Ok((state.net, self.vocabulary()))
            }
        }
    }

    /// Up to `n` correctly classified examples in a seeded order.
    fn correct_sample(
        &self,
        net: &TokenGridNetwork,
        vocab: &Vocabulary,
        pool: &[Example],
        n: usize,
        stream: &str,
    ) -> Result<Vec<Example>> {
        let mut keep = correctly_classified(net, vocab, pool)?;
        keep.shuffle(&mut ChaCha8Rng::seed_from_u64(self.config.stage_seed(stream)));
        Ok(keep.into_iter().take(n).map(|i| pool[i].clone()).collect())
    }

    /// Interchange sweep over every candidate location of every configured node.
    pub fn sweep(&self) -> Result<String> {
        let split = self.dataset()?;
        let (net, vocab) = self.model()?;
        let sample = self.correct_sample(&net, &vocab, &split.test, self.config.sweep.sample, "sample")?;
        let nodes = self.config.sweep_nodes()?;
        let results = alignment_search(
            &net,
            self.lib,
            &vocab,
            &sample,
            &nodes,
            &self.config.sweep.policy,
            u128::from(self.config.sweep.max_interchanges),
        )?;
        let hash = self.config.stage_hash(Stage::Sweep);
        write_bitmatrices(&results, &format!("config={hash}"), &self.path("sweep.bits"))?;
        write(
            &self.path("sweep.tsv"),
            &format!("{HASH_PREFIX}{hash}\n{}", summary_tsv(&results)),
        )?;
        Ok(format!(
            "swept {} locations over {} examples",
            results.len(),
            sample.len()
        ))
    }

    /// Clique scores for every swept location.
    pub fn cliques(&self) -> Result<String> {
        let path = self.path("sweep.bits");
        let (header, results) = read_bitmatrices(&path)?;
        let found = header.strip_prefix("config=").unwrap_or(&header);
        check_hash(&path, &self.config.stage_hash(Stage::Sweep), found)?;
        let cliques = cliques_for(&results, &self.config.analysis)?;
        let summary = summarize(&cliques);
        for (node, _, loc) in &summary.per_node {
            let r = results
                .iter()
                .find(|r| r.node == *node && r.location == *loc)
                .expect("summary location comes from the sweep");
            let graph = build_graph(&r.success, &r.impactful)?;
            write(&self.path(&format!("graphs/{}.edges", node.name())), &graph.edge_list())?;
        }
        write(
            &self.path("cliques.tsv"),
            &write_cliques(&cliques, &self.config.stage_hash(Stage::Cliques)),
        )?;
        Ok(format!("scored {} locations", cliques.len()))
    }

    /// Probe every configured node at its candidate locations, at every configured rank.
    pub fn probe(&self) -> Result<String> {
        let split = self.dataset()?;
        let (net, vocab) = self.model()?;
        let b = &self.config.baselines;
        let train_x = self.correct_sample(&net, &vocab, &split.train, b.probe_train, "probe-train")?;
        let dev_x = self.correct_sample(&net, &vocab, &split.dev, b.probe_dev, "probe-dev")?;
        let mut jobs: Vec<(Node, GridLocation, usize)> = Vec::new();
        for node in self.config.probe_nodes()? {
            for loc in self.config.sweep.policy.locations(node, net.rows())? {
                for rank in &b.ranks {
                    jobs.push((node, loc.clone(), *rank));
                }
            }
        }
        let control_seed = self.config.stage_seed("control");
        let reports: Vec<ProbeReport> = jobs
            .par_iter()
            .map(|(node, loc, rank)| {
                let config = ProbeConfig {
                    rank: *rank,
                    ..b.probe.clone()
                };
                probe_location(&net, &vocab, &train_x, &dev_x, *node, loc, &config, control_seed)
            })
            .collect::<Result<_>>()?;
        let hash = self.config.stage_hash(Stage::Baselines);
        write(
            &self.path("probes.tsv"),
            &format!("{HASH_PREFIX}{hash}\n{}", probe_table(&reports)),
        )?;
        Ok(format!(
            "trained {} probe pairs on {} examples",
            reports.len(),
            train_x.len()
        ))
    }

    /// Integrated-gradients study on single-difference test examples.
    pub fn ig(&self) -> Result<String> {
        let split = self.dataset()?;
        let (net, vocab) = self.model()?;
        let b = &self.config.baselines;
        let examples: Vec<Example> = split
            .test
            .iter()
            .filter(|e| single_differing_slot(e).is_some())
            .take(b.ig_examples)
            .cloned()
            .collect();
        let study = matched_position_study(&net, &vocab, &examples, b.ig_steps, self.config.stage_seed("matched"))?;
        let hash = self.config.stage_hash(Stage::Baselines);
        write(
            &self.path("attribution.tsv"),
            &format!("{HASH_PREFIX}{hash}\n{}", study.table()),
        )?;
        write(
            &self.path("attribution_positions.tsv"),
            &format!("{HASH_PREFIX}{hash}\n{}", study.position_table()),
        )?;
        Ok(summarize_study(&study))
    }

    fn optional_table(&self, name: &str, stage: Stage) -> Result<Option<String>> {
        let path = self.path(name);
        if !path.exists() {
            return Ok(None);
        }
        let text = read(&path)?;
        let (hash, rest) = split_hash_line(&path, &text)?;
        check_hash(&path, &self.config.stage_hash(stage), hash)?;
        Ok(Some(rest.to_string()))
    }

    /// Merge clique, probe and attribution outputs into the report directory.
    pub fn report(&self) -> Result<String> {
        let path = self.path("cliques.tsv");
        let text = read(&path)?;
        let (hash, cliques) = parse_cliques(&path, &text)?;
        check_hash(&path, &self.config.stage_hash(Stage::Cliques), &hash)?;
        let summary = summarize(&cliques);
        let probes = self.optional_table("probes.tsv", Stage::Baselines)?;
        let attribution = self.optional_table("attribution.tsv", Stage::Baselines)?;
        let positions = self.optional_table("attribution_positions.tsv", Stage::Baselines)?;

        let dir = self.path("report");
        write(&dir.join("main.tsv"), &summary.main_table())?;
        write(&dir.join("locations.tsv"), &summary.location_table())?;
        write(&dir.join("heatmaps.tsv"), &summary.heatmaps(SEQUENCE_LENGTH))?;
        if let Some(t) = &probes {
            write(&dir.join("probes.tsv"), t)?;
        }
        if let Some(t) = &attribution {
            write(&dir.join("attribution.tsv"), t)?;
        }
        if let Some(t) = &positions {
            write(&dir.join("attribution_positions.tsv"), t)?;
        }
        let doc = ReportDocument {
            config_hash: self.config.stage_hash(Stage::Report),
            edge_rule: "an edge is impactful iff at least one of its ordered pairs is impactful".into(),
            attribution_baseline: "all-[PAD] embedding row; midpoint rule; predicted-class logit".into(),
            nodes: summary
                .per_node
                .iter()
                .map(|(n, s, l)| NodeRow {
                    node: n.name().to_string(),
                    max_clique: *s,
                    location: l.to_string(),
                })
                .collect(),
            locations: summary.per_location.len(),
            probe_rows: probes.as_ref().map_or(0, |t| t.lines().count().saturating_sub(1)),
            attribution: attribution.as_deref().map(parse_kv_table),
        };
        let json = serde_json::to_string_pretty(&doc).expect("report serializes");
        write(&dir.join("summary.json"), &(json + "\n"))?;
        Ok(summary.main_table())
    }
}

fn summarize_study(s: &MatchedStudy) -> String {
    format!(
        "{} pairs: differing mean {:.6}, matched mean {:.6}, wins {}, losses {}, ties {}, sign-test p {:.6}",
        s.pairs, s.differing_mean, s.matched_mean, s.wins, s.losses, s.ties, s.p_value
    )
}

fn parse_kv_table(text: &str) -> BTreeMap<String, String> {
    let mut lines = text.lines();
    let keys = lines.next().unwrap_or("").split('\t');
    let values = lines.next().unwrap_or("").split('\t');
    keys.zip(values).map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

#[derive(Serialize)]
struct NodeRow {
    node: String,
    max_clique: usize,
    location: String,
}

#[derive(Serialize)]
struct ReportDocument {
    config_hash: String,
    edge_rule: String,
    attribution_baseline: String,
    nodes: Vec<NodeRow>,
    locations: usize,
    probe_rows: usize,
    attribution: Option<BTreeMap<String, String>>,
}

const CLIQUE_COLUMNS: &str = "node\tlocation\tvertices\tsize\texact\twitness\tmembers";

/// Clique results as a hashed table, one row per location.
pub fn write_cliques(cliques: &[LocationClique], hash: &str) -> String {
    let mut out = format!("{HASH_PREFIX}{hash}\n{CLIQUE_COLUMNS}\n");
    for c in cliques {
        let witness = c.clique.witness.map_or("-".to_string(), |(a, b)| format!("{a},{b}"));
        let members: Vec<String> = c.clique.vertices.iter().map(usize::to_string).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{witness}\t{}",
            c.node,
            c.location,
            c.vertices,
            c.clique.size(),
            c.clique.exact,
            if members.is_empty() {
                "-".to_string()
            } else {
                members.join(",")
            }
        );
    }
    out
}

/// Inverse of [`write_cliques`]: the hash and the rows.
pub fn parse_cliques(path: &Path, text: &str) -> Result<(String, Vec<LocationClique>)> {
    let context = path.display().to_string();
    let (hash, rest) = split_hash_line(path, text)?;
    let mut lines = rest.lines();
    if lines.next() != Some(CLIQUE_COLUMNS) {
        return Err(Error::parse(&context, "unexpected column header"));
    }
    let bad = |i: usize, m: &str| Error::parse(&context, format!("row {}: {m}", i + 1));
    let numbers = |s: &str| -> std::result::Result<Vec<usize>, std::num::ParseIntError> {
        if s == "-" {
            Ok(Vec::new())
        } else {
            s.split(',').map(str::parse).collect()
        }
    };
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split('\t').collect();
        let [node, location, vertices, size, exact, witness, members] = cells[..] else {
            return Err(bad(i, "expected 7 columns"));
        };
        let vertices_list = numbers(members).map_err(|_| bad(i, "bad member list"))?;
        let witness = numbers(witness).map_err(|_| bad(i, "bad witness"))?;
        let witness = match witness[..] {
            [] => None,
            [a, b] => Some((a, b)),
            _ => return Err(bad(i, "witness needs two vertices")),
        };
        let clique = LocationClique {
            node: node.parse()?,
            location: location.parse()?,
            vertices: vertices.parse().map_err(|_| bad(i, "bad vertex count"))?,
            clique: CliqueResult {
                vertices: vertices_list,
                witness,
                exact: exact.parse().map_err(|_| bad(i, "bad exact flag"))?,
            },
        };
        if size.parse::<usize>().ok() != Some(clique.clique.size()) {
            return Err(bad(i, "size disagrees with member list"));
        }
        out.push(clique);
    }
    Ok((hash.to_string(), out))
}

/// Exhaustive abstraction check of the addition network under both alignments.
/// Returns the rendered reports and whether the corrected alignment passes
/// while the printed one fails.
pub fn verify_addition() -> Result<(String, bool)> {
    let corrected = addition::verify(AdditionAlignment::Corrected, CheckOptions::default())?;
    let printed = addition::verify(AdditionAlignment::Swapped, CheckOptions::default())?;
    let text = format!(
        "corrected alignment (S1 <-> H1, W <-> H2)\n{}\nprinted alignment (S1 <-> H3, W <-> H1)\n{}",
        corrected.to_text(),
        printed.to_text()
    );
    Ok((text, corrected.holds() && !printed.holds()))
}

/// Derive signatures at `size` and list differences from the built-in table.
pub fn derive_signatures(size: usize) -> Result<(SignatureLibrary, Vec<String>)> {
    let derived = SignatureLibrary::derive(size)?;
    let diff = SignatureLibrary::golden().diff(&derived);
    Ok((derived, diff))
}
