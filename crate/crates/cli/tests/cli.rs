use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"seed = 3

[dataset]
count = 600
words_per_class = 3

[model.training]
epochs = 3

[sweep]
sample = 12

[baselines]
ranks = [4]
probe_train = 60
probe_dev = 20
ig_examples = 10
ig_steps = 16

[baselines.probe]
epochs = 30
"#;

fn causabs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_causabs"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run causabs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let o = causabs(dir, args);
    assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    stdout(&o)
}

fn with_config(text: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), text).unwrap();
    dir
}

#[test]
fn verify_addition_reports_both_alignments() {
    let dir = tempfile::tempdir().unwrap();
    let text = run_ok(dir.path(), &["verify-addition"]);
    assert!(text.contains("verdict: ABSTRACTION"));
    assert!(text.contains("verdict: NOT AN ABSTRACTION"));
    assert!(text.contains("counterexample:"));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("out/addition.txt")).unwrap(),
        text
    );
}

#[test]
fn derived_signatures_match_the_built_in_table() {
    let dir = tempfile::tempdir().unwrap();
    let text = run_ok(dir.path(), &["derive-signatures", "--size", "3"]);
    assert!(text.contains("identical"), "{text}");
    assert!(dir.path().join("out/signatures-3.tsv").exists());
}

#[test]
fn small_pipeline_runs_end_to_end() {
    let dir = with_config(SMALL);
    for stage in ["gen", "train", "sweep", "cliques", "probe", "ig", "report"] {
        run_ok(dir.path(), &["--config", "run.toml", stage]);
    }
    let report = dir.path().join("out/report");
    let main = std::fs::read_to_string(report.join("main.tsv")).unwrap();
    assert_eq!(main.lines().next(), Some("node\tmax_clique\tlocation"));
    assert_eq!(main.lines().count(), 15);
    for name in [
        "locations.tsv",
        "heatmaps.tsv",
        "probes.tsv",
        "attribution.tsv",
        "attribution_positions.tsv",
        "summary.json",
    ] {
        assert!(report.join(name).exists(), "{name}");
    }
    assert!(dir.path().join("out/graphs").read_dir().unwrap().count() > 0);
}

#[test]
fn empty_location_policy_gives_empty_tables() {
    let config =
        format!("{SMALL}\n[sweep.policy]\nleaf_columns = false\nspan_columns = false\nspecial_columns = false\n");
    let dir = with_config(&config);
    for stage in ["gen", "train", "sweep", "cliques", "report"] {
        run_ok(dir.path(), &["--config", "run.toml", stage]);
    }
    let locations = std::fs::read_to_string(dir.path().join("out/report/locations.tsv")).unwrap();
    assert_eq!(locations.lines().count(), 1);
}

#[test]
fn oracle_model_reaches_the_whole_sample() {
    let config = r#"seed = 5

[dataset]
count = 600
words_per_class = 3

[model]
kind = "oracle"

[sweep]
nodes = ["V", "NegP"]
sample = 15
"#;
    let dir = with_config(config);
    for stage in ["gen", "sweep", "cliques", "report"] {
        run_ok(dir.path(), &["--config", "run.toml", stage]);
    }
    // The oracle succeeds everywhere at its designated cell, so the clique is
    // the whole sample whenever the node has an impactful pair at all.
    let sweep = std::fs::read_to_string(dir.path().join("out/sweep.tsv")).unwrap();
    let main = std::fs::read_to_string(dir.path().join("out/report/main.tsv")).unwrap();
    let mut seen_full = false;
    for line in main.lines().skip(1) {
        let cells: Vec<&str> = line.split('\t').collect();
        let impactful = sweep
            .lines()
            .filter(|l| l.starts_with(&format!("{}\t", cells[0])))
            .any(|l| l.split('\t').nth(4) != Some("0"));
        let expected = if impactful { "15" } else { "0" };
        assert_eq!(cells[1], expected, "{main}");
        seen_full |= impactful;
    }
    assert_eq!(main.lines().count(), 3);
    assert!(seen_full, "{sweep}");
    let o = causabs(dir.path(), &["--config", "run.toml", "train"]);
    assert!(!o.status.success());
}

#[test]
fn exit_codes_by_error_category() {
    let dir = with_config(SMALL);
    let missing = causabs(dir.path(), &["--config", "run.toml", "train"]);
    assert_eq!(missing.status.code(), Some(3), "{}", stderr(&missing));
    assert!(stderr(&missing).starts_with("error[missing-input]"));

    run_ok(dir.path(), &["--config", "run.toml", "gen"]);
    let reseeded = causabs(dir.path(), &["--config", "run.toml", "--seed", "4", "train"]);
    assert_eq!(reseeded.status.code(), Some(4), "{}", stderr(&reseeded));

    std::fs::write(dir.path().join("bad.toml"), "seed = 1\nunknown_section = 3\n").unwrap();
    let bad = causabs(dir.path(), &["--config", "bad.toml", "show-config"]);
    assert_eq!(bad.status.code(), Some(2), "{}", stderr(&bad));

    let absent = causabs(dir.path(), &["--config", "nowhere.toml", "show-config"]);
    assert_ne!(absent.status.code(), Some(0));
}

#[test]
fn show_config_round_trips() {
    let dir = with_config(SMALL);
    let shown = run_ok(dir.path(), &["--config", "run.toml", "--seed", "11", "show-config"]);
    std::fs::write(dir.path().join("shown.toml"), &shown).unwrap();
    assert_eq!(run_ok(dir.path(), &["--config", "shown.toml", "show-config"]), shown);
    assert!(shown.starts_with("seed = 11"));
}
