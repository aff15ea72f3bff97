use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fdilab::cli::{execute, Command, Invocation, SEED_VAR};

/// Environment kernels, fluctuation-dissipation checks and Brownian-motion
/// steady states from an INI experiment spec.
#[derive(Debug, Parser)]
#[command(name = "fdilab", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Experiment spec file.
    #[arg(long)]
    spec: PathBuf,
    /// Override a spec entry, `section.key=value`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory for CSV tables and report.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let invocation = Invocation {
        command: args.command,
        spec_path: args.spec,
        overrides: args.overrides,
        out_dir: args.out,
        seed_override: std::env::var(SEED_VAR).ok(),
    };
    let (status, summary) = execute(&invocation);
    if status as u8 == 2 {
        eprintln!("{summary}");
    } else {
        println!("{summary}");
    }
    ExitCode::from(status as u8)
}
