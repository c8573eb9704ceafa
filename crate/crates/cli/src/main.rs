use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use rkadapt_cli::commands;
use rkadapt_cli::config::ExperimentConfig;
use rkadapt_cli::selftest;

#[derive(Parser)]
#[command(name = "rkadapt", version, about = "Bound-preserving Runge-Kutta experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one problem and write trace.csv, solution_<t>.csv and summary.json.
    Run,
    /// Sweep step sizes or tolerances and report errors against the reference.
    Convergence,
    /// Print the degrees-of-freedom table.
    DofTable,
    /// Sample |R(z)| on a grid and write stability.csv.
    Stability,
    /// Run the seeded property checks.
    Selftest,
}

#[derive(Args)]
struct Common {
    /// JSON configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    problem: Option<String>,
    #[arg(long, global = true)]
    method: Option<String>,
    /// Fixed step size.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Tolerance for adaptive stepping.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// off, free or convex.
    #[arg(long, global = true)]
    adaptation: Option<String>,
    #[arg(long, global = true)]
    p_start: Option<usize>,
    #[arg(long, global = true)]
    p_min: Option<usize>,
    #[arg(long, global = true)]
    tol_delta: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $(if self.$field.is_some() { cfg.$field = self.$field; })* };
        }
        set!(problem, method, adaptation, p_start, p_min, tol_delta, out, seed);
        // a step size on the command line replaces a tolerance from the file, and vice versa
        if self.dt.is_some() {
            cfg.dt = self.dt;
            cfg.tol = None;
        }
        if self.tol.is_some() {
            cfg.tol = self.tol;
            cfg.dt = None;
        }
        Ok(cfg)
    }
}

fn execute(command: Command, cfg: ExperimentConfig) -> Result<bool> {
    match command {
        Command::Run => {
            let out = commands::run(&cfg)?;
            let s = &out.summary;
            println!(
                "{} with {}: {} accepted, {} rejected, {} adapted; written to {}",
                s.problem,
                s.method,
                s.steps_accepted,
                s.steps_rejected,
                s.steps_adapted,
                out.dir.display()
            );
        }
        Command::Convergence => {
            let s = commands::convergence(&cfg)?;
            for p in &s.points {
                let x = p.dt.or(p.tol).unwrap_or(f64::NAN);
                match p.error {
                    Some(e) => println!("{x:.6e}  error {e:.6e}  adapted steps {}", p.steps_adapted),
                    None => println!("{x:.6e}  failed: {}", p.failure.as_deref().unwrap_or("")),
                }
            }
            match s.tail_slope {
                Some(k) => println!("slope over the unadapted tail ({} points): {k:.3}", s.tail_points),
                None => println!("unadapted tail too short for a slope ({} points)", s.tail_points),
            }
        }
        Command::DofTable => print!("{}", commands::dof(&cfg)?),
        Command::Stability => println!("wrote {}", commands::stability(&cfg)?.display()),
        Command::Selftest => {
            let results = selftest::run(cfg.seed.unwrap_or(0), cfg.draws.unwrap_or(10_000));
            for r in &results {
                let verdict = if r.passed() { "PASS" } else { "FAIL" };
                println!("{verdict} {}: {} draws, {} violations {}", r.name, r.draws, r.violations, r.detail);
            }
            return Ok(results.iter().all(|r| r.passed()));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.common.resolve().and_then(|cfg| execute(cli.command, cfg));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
