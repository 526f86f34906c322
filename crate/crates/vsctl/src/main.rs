use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use vlasov_stokes::harness::{emit_outputs, reference_settings, region_of, run_scenario, run_suite, ScenarioConfig};
use vlasov_stokes::reference_trajectory::HighVelocityBasis;

/// Controllability runs for the Vlasov–Stokes system on the two-torus.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Size of the worker pool (defaults to the number of cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its output files.
    Run { config: PathBuf },
    /// Run a self-check suite: geometry, stokes, transport or smoke.
    Verify { suite: String },
    /// Fit a harmonic potential whose gradient approximates the direction `p,q`.
    FitHarmonic { direction: String, config: PathBuf },
}

fn run(config: PathBuf) -> Result<ExitCode> {
    let cfg = ScenarioConfig::from_file(&config).with_context(|| format!("reading {}", config.display()))?;
    let results = run_scenario(&cfg)?;
    let files = emit_outputs(&results, &cfg.output_dir).with_context(|| format!("writing to {}", cfg.output_dir.display()))?;
    print!("{}", results.summary.to_text());
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(if results.summary.ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn verify(suite: &str) -> Result<ExitCode> {
    let lines = run_suite(suite)?;
    for l in &lines {
        println!("{l}");
    }
    Ok(if lines.iter().all(|l| l.pass()) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn fit_harmonic(direction: &str, config: PathBuf) -> Result<ExitCode> {
    let (p, q) = direction.split_once(',').context("direction must read `p,q`")?;
    let (p, q): (f64, f64) = (p.trim().parse()?, q.trim().parse()?);
    let len = p.hypot(q);
    if len == 0.0 {
        bail!("direction must be nonzero");
    }
    let cfg = ScenarioConfig::from_file(&config)?;
    let settings = reference_settings(&cfg, cfg.t_final)?;
    let basis = HighVelocityBasis::new(&region_of(&cfg)?, settings.fit)?;
    let pot = basis.fit([p / len, q / len])?;
    let r = pot.fit_report;
    println!("direction = {},{}", p / len, q / len);
    println!("grad_target_error = {:e}", r.grad_target_error);
    println!("grad_sup_error = {:e}", r.grad_sup_error);
    println!("laplacian_leak = {:e}", r.laplacian_leak);
    println!("min_grad_outside = {:e}", r.min_grad_outside);
    println!("grad_sup = {:e}", pot.grad_sup);
    let ok = r.grad_target_error <= cfg.eps_fit;
    println!("fit = {}", if ok { "ok" } else { "above eps_fit" });
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Run { config } => run(config),
        Command::Verify { suite } => verify(&suite),
        Command::FitHarmonic { direction, config } => fit_harmonic(&direction, config),
    }
}
