use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mildflow::runner::{run, Command, RunConfig, SCHEMA};
use mildflow::Error;

#[derive(Parser)]
#[command(name = "mildflow", version, about = "Periodic mild solutions of the Boussinesq system on a periodic box")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, env = "BQ_CONFIG")]
    config: PathBuf,
    /// Output directory (default: the config's output_dir, else out/<command>).
    #[arg(long, env = "BQ_OUTPUT")]
    output: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, env = "BQ_SEED")]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "BQ_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Morrey-Lorentz norms of the initial data.
    Norms(Common),
    /// Integrate the mild formulation over [0, t_end].
    Evolve(Common),
    /// Periodic datum of the linear problem by Cesàro means and by the resolvent.
    PeriodicLinear(Common),
    /// Periodic solution of the nonlinear problem.
    PeriodicNonlinear(Common),
    /// Separation between the periodic solution and a perturbed run.
    Stability(Common),
    /// Empirical constants of the linear and bilinear estimates.
    VerifyEstimates(Common),
    /// Print the configuration schema.
    Schema,
}

fn execute(cmd: Command, c: Common) -> Result<(), Error> {
    if let Some(k) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let text = std::fs::read_to_string(&c.config)?;
    let mut cfg = RunConfig::from_json(&text)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let dir = c
        .output
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(cmd.name()));
    let report = run(cmd, &cfg, &dir)?;
    println!("{} -> {}", report.command, report.dir.display());
    for (k, v) in &report.summary {
        println!("  {k} = {v:e}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Cmd::Schema => {
            print!("{SCHEMA}");
            return ExitCode::SUCCESS;
        }
        Cmd::Norms(c) => (Command::Norms, c),
        Cmd::Evolve(c) => (Command::Evolve, c),
        Cmd::PeriodicLinear(c) => (Command::PeriodicLinear, c),
        Cmd::PeriodicNonlinear(c) => (Command::PeriodicNonlinear, c),
        Cmd::Stability(c) => (Command::Stability, c),
        Cmd::VerifyEstimates(c) => (Command::VerifyEstimates, c),
    };
    match execute(cmd, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
