use std::path::PathBuf;
use std::process::ExitCode;

use causabs::pipeline::{derive_signatures, verify_addition, Pipeline, RunConfig};
use causabs::Error;
use clap::{Parser, Subcommand};

/// Causal abstraction analysis pipeline.
#[derive(Parser, Debug)]
#[command(name = "causabs", version, about)]
struct Cli {
    /// Run configuration (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configuration's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses one per core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the dataset splits.
    Gen,
    /// Train the token-grid network.
    Train,
    /// Run interchange interventions at every candidate location.
    Sweep,
    /// Score each swept location by its largest clique with an impactful edge.
    Cliques,
    /// Train node probes and control probes.
    Probe,
    /// Integrated-gradients study on single-difference examples.
    Ig,
    /// Exhaustively check the addition network against the sum model.
    VerifyAddition,
    /// Re-derive the projectivity signatures and compare with the built-in table.
    DeriveSignatures {
        /// Universe size for the derivation.
        #[arg(long, default_value_t = 4)]
        size: usize,
    },
    /// Merge clique, probe and attribution outputs into report tables.
    Report,
    /// Print the effective configuration.
    ShowConfig,
}

fn category(e: &Error) -> (&'static str, u8) {
    match e {
        Error::Config(_) | Error::Parse { .. } => ("config", 2),
        Error::Io { .. } => ("missing-input", 3),
        Error::ConfigMismatch { .. } => ("config-mismatch", 4),
        Error::BudgetExceeded { .. } | Error::Capacity { .. } => ("budget", 5),
        Error::Dataset { .. } => ("dataset", 6),
        _ => ("runtime", 1),
    }
}

fn run(cli: Cli) -> Result<(String, bool), Error> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let pipeline = Pipeline::new(config, cli.out_dir.clone());
    let ok = |s: String| Ok((s, true));
    match cli.command {
        Command::Gen => ok(pipeline.gen()?),
        Command::Train => ok(pipeline.train()?),
        Command::Sweep => ok(pipeline.sweep()?),
        Command::Cliques => ok(pipeline.cliques()?),
        Command::Probe => ok(pipeline.probe()?),
        Command::Ig => ok(pipeline.ig()?),
        Command::Report => ok(pipeline.report()?),
        Command::ShowConfig => ok(pipeline.config.to_toml()),
        Command::VerifyAddition => {
            let (text, passed) = verify_addition()?;
            let path = cli.out_dir.join("addition.txt");
            std::fs::create_dir_all(&cli.out_dir).map_err(|e| Error::Io {
                path: cli.out_dir.clone(),
                source: e,
            })?;
            std::fs::write(&path, &text).map_err(|e| Error::Io { path, source: e })?;
            Ok((text, passed))
        }
        Command::DeriveSignatures { size } => {
            let (derived, diff) = derive_signatures(size)?;
            let path = cli.out_dir.join(format!("signatures-{size}.tsv"));
            std::fs::create_dir_all(&cli.out_dir).map_err(|e| Error::Io {
                path: cli.out_dir.clone(),
                source: e,
            })?;
            std::fs::write(&path, derived.to_text()).map_err(|e| Error::Io { path, source: e })?;
            if diff.is_empty() {
                Ok((format!("universe size {size}: identical to the built-in table"), true))
            } else {
                Ok((
                    format!("universe size {size}: {} differences\n{}", diff.len(), diff.join("\n")),
                    false,
                ))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
            eprintln!("error[runtime]: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok((text, true)) => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Ok((text, false)) => {
            print!("{text}");
            eprintln!("error[verification]: check failed");
            ExitCode::from(7)
        }
        Err(e) => {
            let (name, code) = category(&e);
            eprintln!("error[{name}]: {e}");
            ExitCode::from(code)
        }
    }
}
