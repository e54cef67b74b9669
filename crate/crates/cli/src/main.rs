use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hgp_cli::{run, Command};

#[derive(Parser)]
#[command(name = "hgp", version, about = "Hausdorff-based Gaussian process models for areal and point data")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Pairwise distance matrix of the input geometries
    Distances(Args),
    /// Fit a model by MCMC and write draws, summary and WAIC
    Fit(Args),
    /// Rank earlier fits by WAIC
    Compare(Args),
    /// Predict at new geometries from an HGP fit
    Predict(Args),
    /// Simulate responses from a known HGP
    Simulate(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    /// JSON run configuration
    config: PathBuf,
    /// Worker threads for distance pairs and chains (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides every seed in the config
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (command, args) = match cli.command {
        Cmd::Distances(a) => (Command::Distances, a),
        Cmd::Fit(a) => (Command::Fit, a),
        Cmd::Compare(a) => (Command::Compare, a),
        Cmd::Predict(a) => (Command::Predict, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(command, &args.config, args.seed) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
