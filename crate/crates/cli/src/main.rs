use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use steklov_trace_cli::{run, CommandName, RawConfig, RunConfig};

/// Sharp trace constants, expansion oracles and Steklov solvers as CSV.
#[derive(Debug, Parser)]
#[command(name = "steklov-trace", version)]
struct Cli {
    /// kp, verify-extremal, expand, oracle, steklov or shapeopt
    command: CommandName,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override one key, e.g. `--set p=1.5`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Shorthand for `--set seed=N`.
    #[arg(long)]
    seed: Option<u64>,
}

const EXIT_AUDIT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn resolve(cli: &Cli) -> Result<RunConfig, steklov_trace_cli::ConfigError> {
    let mut raw = match &cli.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    for pair in &cli.set {
        raw.set_pair(pair)?;
    }
    if let Some(seed) = cli.seed {
        raw.set("seed", seed.to_string());
    }
    RunConfig::resolve(cli.command, &raw)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let out = match run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &out.csv),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(out.csv.as_bytes())
        }
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    for a in &out.audits {
        eprintln!("{}: {}", a.name, if a.passed { "PASS" } else { "FAIL" });
    }
    if out.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_AUDIT)
    }
}
