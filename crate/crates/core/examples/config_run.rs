//! Drive every subcommand from a JSON config, as the CLI does.
//!
//! `cargo run --release --example config_run -- configs/small.json out`

use std::path::PathBuf;

use mildflow::runner::{run, Command, RunConfig};
use mildflow::Result;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/small.json").into());
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));
    let cfg = RunConfig::from_json(&std::fs::read_to_string(config)?)?;
    println!("config sha256 {}", cfg.hash());
    for cmd in Command::ALL {
        let report = run(cmd, &cfg, &out.join(cmd.name()))?;
        println!("{cmd}: {}", report.files.join(", "));
        for (k, v) in &report.summary {
            println!("  {k} = {v:e}");
        }
    }
    Ok(())
}
