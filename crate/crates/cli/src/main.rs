use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use agler_cli::commands::failure;
use agler_cli::{run, CliError, Command, InstanceDocument, Settings};
use clap::Parser;

/// Kernel-family multiplier norms and Pick interpolation on JSON instances.
#[derive(Debug, Parser)]
#[command(name = "agler", version)]
struct Args {
    command: Command,
    /// Instance file, or `-` for stdin.
    instance: String,
    /// Primary tolerance of the command.
    #[arg(long)]
    tol: Option<f64>,
    /// Grid size of `extend` and `region`.
    #[arg(long)]
    grid: Option<usize>,
    /// Slack factor of `extend`.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Seed of `verify-family`.
    #[arg(long)]
    seed: Option<u64>,
    /// θ grid size of annulus families and of `fit-compression`.
    #[arg(long)]
    theta_grid: Option<usize>,
    /// Series truncation of annulus kernels.
    #[arg(long)]
    truncation: Option<usize>,
    /// Write the result here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn read_instance(path: &str) -> Result<String, CliError> {
    if path == "-" {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::io(format!("stdin: {e}")))?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| CliError::io(format!("{path}: {e}")))
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let settings = Settings {
        tol: args.tol,
        grid: args.grid,
        epsilon: args.epsilon,
        seed: args.seed,
        theta_grid: args.theta_grid,
        truncation: args.truncation,
    };
    let result = match read_instance(&args.instance).and_then(|t| InstanceDocument::parse(&t)) {
        Ok(doc) => run(args.command, &doc, &settings),
        Err(e) => failure(args.command, e),
    };
    if let Some(e) = &result.error {
        eprintln!("agler {}: {}: {}", result.command, e.code, e.message);
    }
    let text = result.to_json() + "\n";
    let written = match &args.output {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("agler: cannot write result: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(result.exit_code() as u8)
}
