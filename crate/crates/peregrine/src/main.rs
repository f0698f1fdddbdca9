use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use peregrine::config::parse_config;
use peregrine::run::{run_subcommand, Overrides};

/// Fractional reaction-diffusion solver with periodic + decaying state
/// decomposition.
#[derive(Parser)]
#[command(name = "peregrine", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured initial state and write snapshots.
    Simulate(CommonArgs),
    /// Emit diffusion-kernel samples and a tail-exponent fit.
    Kernel(CommonArgs),
    /// Run the coupled background/perturbation solver against the
    /// monolithic one and report consistency diagnostics.
    Decompose(CommonArgs),
    /// Empirical convergence-order sweep against a fine-step reference.
    Converge(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir from the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Snapshot stride in steps (overrides output.stride).
    #[arg(long)]
    stride: Option<usize>,
}

fn configure_threads() {
    // PEREGRINE_THREADS caps the worker count; 0 or unset means automatic.
    if let Ok(raw) = std::env::var("PEREGRINE_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn execute(name: &str, args: &CommonArgs) -> peregrine::Result<()> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        peregrine::Error::Config(format!("cannot read {}: {e}", args.config.display()))
    })?;
    let cfg = parse_config(&text)?;
    let overrides = Overrides {
        out_dir: args.out.clone(),
        stride: args.stride,
    };
    let manifest = run_subcommand(name, &cfg, &overrides)?;
    println!(
        "{name}: status={} outputs={} wall={:.3}s",
        manifest.status,
        manifest.outputs.len(),
        manifest.wall_seconds
    );
    Ok(())
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Simulate(a) => ("simulate", a),
        Command::Kernel(a) => ("kernel", a),
        Command::Decompose(a) => ("decompose", a),
        Command::Converge(a) => ("converge", a),
    };
    match execute(name, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = if err.is_config() { "config" } else { "runtime" };
            eprintln!(
                "{}",
                serde_json::json!({ "error": kind, "message": err.to_string() })
            );
            ExitCode::from(if err.is_config() { 2 } else { 3 })
        }
    }
}
