use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use ngd_bench::{run_benchmark, verify, BenchmarkConfig};
use pullback_ngd::problems::mps::generate_target_data;

#[derive(Parser)]
#[command(version, about = "Natural gradient descent benchmarks with pullback metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method in a config and write traces and summaries.
    Run { config: PathBuf },
    /// Cross-check gradients and metrics of the configured problem against dense oracles.
    Verify { config: PathBuf },
    /// Write noisy Heisenberg-chain density matrices in the target data format.
    GenerateData {
        #[arg(long)]
        length: usize,
        #[arg(long)]
        noise: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { config } => {
            let cfg = BenchmarkConfig::load(&config)?;
            let summary = run_benchmark(&cfg).with_context(|| format!("running {}", config.display()))?;
            print!("{}", summary.to_text());
            println!("\nwrote results to {}", cfg.output_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { config } => {
            let cfg = BenchmarkConfig::load(&config)?;
            let report = verify(&cfg).with_context(|| format!("verifying {}", config.display()))?;
            print!("{}", report.to_text());
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::GenerateData {
            length,
            noise,
            seed,
            out,
        } => {
            let data = generate_target_data(length, noise, seed)?;
            std::fs::write(&out, data.to_text()).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} bonds to {}", data.targets.bonds(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
