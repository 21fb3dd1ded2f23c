//! Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
//! if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use causabs::abstraction::CheckOptions;
use causabs::addition::{self, AdditionAlignment};
use causabs::analysis::{build_graph, max_clique_impactful, CliqueConfig, CliqueMode, SuccessGraph};
use causabs::baselines::{inert_branch_study, integrated_gradients, network_attribution, LinearFunction, ProbeConfig};
use causabs::interchange::{addition_agreement, all_digit_triples, impactful_matrix, sweep_location, AdditionVariable};
use causabs::mqnli::{generate_examples, GeneratorConfig};
use causabs::natlog::sampling::sample_pair;
use causabs::natlog::{derive, Node, SignatureLibrary};
use causabs::neural::{grad_check, Architecture, FixedAdditionNet, OracleNetwork, TokenGridNetwork, TrainItem};
use causabs::pipeline::{Pipeline, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const ADDITION_SECONDS: f64 = 60.0;
const SIGNATURE_SECONDS: f64 = 600.0;
const GRAD_TOLERANCE: f64 = 1e-4;
const IG_GAP: f64 = 0.01;
const IG_STEPS: usize = 512;
const LINEAR_TOLERANCE: f64 = 1e-10;

const MINI: &str = r#"seed = 7

[dataset]
count = 1500
words_per_class = 4

[model.training]
epochs = 10

[sweep]
sample = 40

[baselines]
ranks = [8]
probe_train = 200
probe_dev = 50
ig_examples = 30
ig_steps = 64

[baselines.probe]
epochs = 100
"#;

struct Outcome {
    pass: bool,
    detail: String,
}

fn lib() -> &'static SignatureLibrary {
    SignatureLibrary::golden()
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("pool")
        .install(f)
}

fn addition_check() -> Outcome {
    let start = Instant::now();
    let (corrected, printed) = single_threaded(|| {
        (
            addition::verify(AdditionAlignment::Corrected, CheckOptions::default()).expect("corrected check"),
            addition::verify(AdditionAlignment::Swapped, CheckOptions::default()).expect("printed check"),
        )
    });
    let seconds = start.elapsed().as_secs_f64();
    let pass = corrected.holds()
        && corrected.commutation_inputs_only.checked == 1000
        && !printed.commutation.holds
        && printed.commutation.counterexample.is_some()
        && seconds < ADDITION_SECONDS;
    Outcome {
        pass,
        detail: format!(
            "corrected {} ({} commutation checks, {} on inputs only); printed commutation fails {} times, first {}; {seconds:.1}s single-threaded",
            if corrected.holds() { "holds" } else { "fails" },
            corrected.commutation.checked,
            corrected.commutation_inputs_only.checked,
            printed.commutation.failures,
            printed.commutation.counterexample.as_deref().unwrap_or("none"),
        ),
    }
}

fn interchange_agreement() -> Outcome {
    let triples = all_digit_triples();
    let mut pass = true;
    let mut parts = Vec::new();
    for variable in [AdditionVariable::PartialSum, AdditionVariable::Carry] {
        let r = addition_agreement(AdditionAlignment::Corrected, variable, &triples, &triples).expect("agreement");
        pass &=
            r.pairs == 1_000_000 && r.successes == r.pairs && r.commuting == r.pairs && r.first_disagreement.is_none();
        parts.push(format!(
            "{}: {}/{} succeed, {} commute, disagreements {}",
            variable.name(),
            r.successes,
            r.pairs,
            r.commuting,
            if r.first_disagreement.is_none() { "none" } else { "some" }
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn inert_branch() -> Outcome {
    let config = ProbeConfig {
        epochs: 5_000,
        ..ProbeConfig::default()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (net, live) in [(FixedAdditionNet::ThreeUnit, 1), (FixedAdditionNet::OneHot, 0)] {
        let r = inert_branch_study(net, live, &config).expect("inert study");
        pass &= r.probe_accuracy == 1.0 && r.pairs == 1_000_000 && r.inert_changes == 0 && r.live_changes >= 1;
        parts.push(format!(
            "{net:?}: probe {:.4}, inert changes {}/{}, live changes {}",
            r.probe_accuracy, r.inert_changes, r.pairs, r.live_changes
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn signatures_and_sampling() -> Outcome {
    let start = Instant::now();
    let mut differences = 0;
    for size in [3, 4, 5] {
        let derived = SignatureLibrary::derive(size).expect("derivation");
        differences += lib().diff(&derived).len();
    }
    let config = GeneratorConfig {
        words_per_class: 4,
        count: 2_000,
        ..GeneratorConfig::default()
    };
    let examples = generate_examples(&config, lib(), 404).expect("examples");
    let violations: usize = examples
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let mut rng = ChaCha8Rng::seed_from_u64(404);
            rng.set_stream(i as u64);
            let report = sample_pair(&e.premise, &e.hypothesis, 2, 10_000, 10_000_000, &mut rng);
            let ok =
                report.accepted == 10_000 && report.consistent_with(derive(lib(), &e.premise, &e.hypothesis).root());
            usize::from(!ok)
        })
        .sum();
    let seconds = start.elapsed().as_secs_f64();
    Outcome {
        pass: differences == 0 && examples.len() == 2_000 && violations == 0 && seconds < SIGNATURE_SECONDS,
        detail: format!(
            "differences at sizes 3/4/5: {differences}; {} examples x 10000 models at size 2: {violations} violations; {seconds:.1}s",
            examples.len()
        ),
    }
}

fn oracle_control() -> Outcome {
    let config = GeneratorConfig {
        words_per_class: 4,
        count: 2_000,
        ..GeneratorConfig::default()
    };
    let oracle = OracleNetwork::build(&config.lexicon(), lib()).expect("oracle");
    let sample: Vec<_> = generate_examples(&config, lib(), 55)
        .expect("examples")
        .into_iter()
        .take(200)
        .collect();
    let tokens: Vec<Vec<usize>> = sample.iter().map(|e| oracle.encode(e).expect("encode")).collect();
    let mut pass = sample.len() == 200;
    let mut cells = Vec::new();
    for node in Node::intermediates() {
        let imp = impactful_matrix(lib(), &sample, *node);
        let loc = oracle.location(*node).expect("designated cell");
        let r = sweep_location(&oracle.net, lib(), &tokens, &sample, *node, &loc, &imp).expect("sweep");
        let graph = build_graph(&r.success, &r.impactful).expect("graph");
        let clique = max_clique_impactful(&graph, &CliqueConfig::default())
            .expect("clique")
            .size();
        let expected = if imp.count() > 0 { 200 } else { 0 };
        pass &= r.success.count() == 40_000 && clique == expected;
        cells.push(format!("{node} {}/40000 clique {clique}", r.success.count()));
    }
    Outcome {
        pass,
        detail: cells.join(", "),
    }
}

fn brute_force(n: usize, edges: &[(usize, usize)], imp: &[(usize, usize)]) -> Vec<usize> {
    let mut adj = vec![0u32; n];
    for &(a, b) in edges {
        adj[a] |= 1 << b;
        adj[b] |= 1 << a;
    }
    let mut best: Vec<usize> = Vec::new();
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|v| mask >> v & 1 == 1).collect();
        if members.len() < best.len().max(2)
            || !members.iter().all(|v| (adj[*v] | 1 << v) & mask == mask)
            || !imp.iter().any(|(a, b)| mask >> a & 1 == 1 && mask >> b & 1 == 1)
        {
            continue;
        }
        if members.len() > best.len() || members < best {
            best = members;
        }
    }
    best
}

fn clique_solver() -> Outcome {
    let exact = CliqueConfig {
        mode: CliqueMode::Exact,
        ..CliqueConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut matches = 0;
    for trial in 0..100 {
        let p = [0.3, 0.5, 0.7][trial % 3];
        let mut edges = Vec::new();
        let mut imp = Vec::new();
        for i in 0..18 {
            for j in i + 1..18 {
                if rng.random_bool(p) {
                    edges.push((i, j));
                    if rng.random_bool(0.2) {
                        imp.push((i, j));
                    }
                }
            }
        }
        let graph = SuccessGraph::from_edges(18, &edges, &imp).expect("graph");
        let found = max_clique_impactful(&graph, &exact).expect("clique");
        matches += usize::from(found.vertices == brute_force(18, &edges, &imp));
    }
    let mut edges = Vec::new();
    for (lo, hi) in [(0, 10), (10, 16)] {
        for i in lo..hi {
            for j in i + 1..hi {
                edges.push((i, j));
            }
        }
    }
    let planted = SuccessGraph::from_edges(16, &edges, &[(12, 14)]).expect("graph");
    let planted = max_clique_impactful(&planted, &exact).expect("clique").vertices;
    let planted_ok = planted == (10..16).collect::<Vec<_>>() && planted == brute_force(16, &edges, &[(12, 14)]);
    Outcome {
        pass: matches == 100 && planted_ok,
        detail: format!(
            "{matches}/100 random graphs match enumeration; planted constraint {}",
            if planted_ok { "ok" } else { "wrong" }
        ),
    }
}

fn gradients(run: &Path) -> Outcome {
    let mut worst_grad: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let arch = Architecture {
            width: 4,
            layers: 2,
            residual: seed % 2 == 0,
        };
        let net = TokenGridNetwork::random(&arch, 6, 5, 3, &mut rng);
        let item = TrainItem {
            tokens: (0..5).map(|_| rng.random_range(0..6)).collect(),
            label: rng.random_range(0..3),
        };
        worst_grad = worst_grad.max(
            grad_check(&net, &item, 1e-6, GRAD_TOLERANCE)
                .expect("grad check")
                .max_relative_error,
        );
    }

    let pipeline = Pipeline::new(RunConfig::load(&run.join("mini.toml")).expect("config"), run);
    let (net, vocab) = pipeline.model().expect("model");
    let dev = pipeline.dataset().expect("dataset").dev;
    let gaps: Vec<f64> = dev
        .iter()
        .take(50)
        .map(|e| {
            let tokens = vocab.encode(&e.tokens()).expect("encode");
            network_attribution(&net, &vocab, &tokens, IG_STEPS)
                .expect("attribution")
                .completeness_gap()
        })
        .collect();
    let below = gaps.iter().filter(|g| **g < IG_GAP).count();
    let worst_gap = gaps.iter().copied().fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst_linear: f64 = 0.0;
    for _ in 0..20 {
        let dim = rng.random_range(1..16);
        let f = LinearFunction {
            weights: (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect(),
            bias: rng.random_range(-1.0..1.0),
        };
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
        let a = integrated_gradients(&f, &x, &vec![0.0; dim], IG_STEPS).expect("linear attribution");
        for i in 0..dim {
            worst_linear = worst_linear.max((a.values[i] - f.weights[i] * x[i]).abs());
        }
    }
    Outcome {
        pass: worst_grad < GRAD_TOLERANCE && below == gaps.len() && gaps.len() == 50 && worst_linear < LINEAR_TOLERANCE,
        detail: format!(
            "grad max relative error {worst_grad:.2e} over 20 nets; IG at {IG_STEPS} steps: {below}/{} inputs below {IG_GAP}, worst gap {worst_gap:.4}; linear IG max error {worst_linear:.1e}",
            gaps.len()
        ),
    }
}

fn cli(out: &Path, workers: usize, command: &str) -> std::process::Output {
    let output = Command::new(env!("CARGO_BIN_EXE_causabs"))
        .arg("--config")
        .arg(out.join("mini.toml"))
        .args(["--workers", &workers.to_string(), "--out-dir"])
        .arg(out)
        .arg(command)
        .output()
        .expect("run causabs");
    assert!(
        output.status.success(),
        "{command}: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn run_pipeline(out: &Path, workers: usize) {
    std::fs::create_dir_all(out).expect("out dir");
    std::fs::write(out.join("mini.toml"), MINI).expect("config");
    for command in ["gen", "train", "sweep", "cliques", "probe", "ig", "report"] {
        cli(out, workers, command);
    }
}

fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).expect("read dir") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).expect("read file");
                files.insert(path.strip_prefix(root).expect("prefix").to_path_buf(), bytes);
            }
        }
    }
    files
}

fn determinism(one: &Path, eight: &Path) -> Outcome {
    let (a, b) = (read_tree(one), read_tree(eight));
    let differing: Vec<String> = a
        .keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    Outcome {
        pass: differing.is_empty() && a.keys().any(|k| k.starts_with("report")),
        detail: format!(
            "{} files compared at 1 and 8 workers, {} differ {:?}",
            a.len(),
            differing.len(),
            differing
        ),
    }
}

fn end_to_end(out: &Path) -> Outcome {
    let report = out.join("report");
    let read = |name: &str| std::fs::read_to_string(report.join(name)).unwrap_or_default();
    let main = read("main.tsv");
    let main_rows = main.lines().skip(1).count();
    let heatmap_blocks = read("heatmaps.tsv").lines().filter(|l| l.starts_with("# ")).count();
    let heatmap_columns_ok = read("heatmaps.tsv")
        .lines()
        .filter(|l| l.starts_with("layer"))
        .all(|l| l.split('\t').count() == 1 + causabs::mqnli::SEQUENCE_LENGTH);
    let locations = read("locations.tsv").lines().skip(1).count();
    let probes = read("probes.tsv").lines().skip(1).count();
    let attribution = read("attribution.tsv").lines().count();
    let summary = read("summary.json");
    let pass = main.starts_with("node\tmax_clique\tlocation")
        && main_rows == 14
        && heatmap_blocks == 14
        && heatmap_columns_ok
        && locations > 0
        && probes == locations
        && attribution == 2
        && summary.contains("\"nodes\"");
    Outcome {
        pass,
        detail: format!(
            "main table {main_rows} nodes, {heatmap_blocks} heatmaps, {locations} locations, {probes} probe rows; large-encoder clique sizes not reproduced at desk scale, the oracle control is the quantitative anchor"
        ),
    }
}

fn main() {
    let dir = tempfile::tempdir().expect("tempdir");
    let (one, eight) = (dir.path().join("w1"), dir.path().join("w8"));
    run_pipeline(&one, 1);
    run_pipeline(&eight, 8);

    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Outcome>)> = vec![
        (1, "addition abstraction", Box::new(addition_check)),
        (2, "interchange/abstraction agreement", Box::new(interchange_agreement)),
        (3, "inert-branch probing counterexample", Box::new(inert_branch)),
        (4, "natural-logic oracle stability", Box::new(signatures_and_sampling)),
        (5, "oracle-network positive control", Box::new(oracle_control)),
        (6, "clique solver correctness", Box::new(clique_solver)),
        (7, "gradient and IG checks", Box::new(|| gradients(&one))),
        (
            8,
            "determinism across worker counts",
            Box::new(|| determinism(&one, &eight)),
        ),
        (9, "mini end-to-end pipeline", Box::new(|| end_to_end(&one))),
    ];
    let mut failing = Vec::new();
    for (number, name, check) in &criteria {
        let start = Instant::now();
        let outcome = check();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {number} {verdict}: {name}: {} [{:.1}s]",
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
        if !outcome.pass {
            failing.push(*number);
        }
    }
    if !failing.is_empty() {
        eprintln!("failing criteria: {failing:?}");
        std::process::exit(1);
    }
}
