use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jcaudit::{commands, Scenario};

#[derive(Parser)]
#[command(
    name = "jcaudit",
    version,
    about = "Audit and evolve a damped driven Jaynes-Cummings master equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the generator identities and measure the dissipativity hypotheses.
    Certify(Common),
    /// Evolve the initial state and write the trajectory CSV and a summary.
    Evolve(Common),
    /// Compare cutoffs and measure generalised-solution residuals.
    Converge(Common),
    /// Time assembly and evolution across a cutoff sweep.
    Bench(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file, or `preset:NAME` for a shipped preset.
    #[arg(long)]
    config: PathBuf,
    /// Seed for every sampler the scenario does not seed itself.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; overrides `[outputs] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

type Runner = fn(&Scenario, &Path) -> anyhow::Result<commands::Outcome>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (run, common): (Runner, Common) = match cli.command {
        Command::Certify(c) => (commands::certify::run, c),
        Command::Evolve(c) => (commands::evolve::run, c),
        Command::Converge(c) => (commands::converge::run, c),
        Command::Bench(c) => (commands::bench::run, c),
    };
    let result = Scenario::load(&common.config, common.seed)
        .map_err(anyhow::Error::from)
        .and_then(|scenario| {
            let out = common
                .out
                .clone()
                .unwrap_or_else(|| scenario.outputs.dir.clone());
            run(&scenario, &out)
        });
    match result {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            if outcome.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
