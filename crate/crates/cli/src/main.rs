use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::info;

use ncs_aloha::config::{load_config, ExperimentConfig, Mode};
use ncs_aloha::montecarlo::run_experiment;
use ncs_aloha::output::{burn_in, emit_results, EmitOptions, Results, MANIFEST};
use ncs_aloha::selftest::run_selftest;

/// Controllability of ALOHA-scheduled control loops in Poisson networks.
#[derive(Parser)]
#[command(name = "ncs-aloha", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Empirical block-controllability sweep over q.
    Simulate(RunArgs),
    /// Closed-form controllability probabilities and meta distributions.
    Analytic(RunArgs),
    /// Thompson-sampling runs on independent realizations.
    Ts(RunArgs),
    /// Empirical versus closed-form comparison.
    Compare(RunArgs),
    /// Averaged cumulative regret curves.
    Regret(RunArgs),
    /// Quick oracle checks; exits nonzero on any failure.
    Selftest {
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Config file, or a bundled preset name (fig2, fig3, fig4, fig5).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a config key, e.g. `--set lambda=1e-4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Replace existing output files.
    #[arg(long)]
    overwrite: bool,
}

fn init_threads(threads: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    }
    Ok(())
}

fn resolve(args: &RunArgs, mode: Mode) -> anyhow::Result<ExperimentConfig> {
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    let mut config = load_config(&args.config, &overrides)?;
    if config.mode != mode {
        info!("config mode {:?} replaced by subcommand {:?}", config.mode, mode);
        config.mode = mode;
    }
    Ok(config)
}

fn report(config: &ExperimentConfig, results: &Results) {
    match results {
        Results::Empty => {}
        Results::Sweep(sweep) => {
            for r in sweep {
                let analytic = r.analytic.map(|a| format!(" (closed form {a:.4})")).unwrap_or_default();
                println!("{} {} q={}: {:.4} +/- {:.4}{analytic}", r.protocol, r.system, r.q, r.estimate, r.half_width_95);
            }
        }
        Results::Analytic(rows) => println!("analytic: {} values", rows.len()),
        Results::Compare(rows) => {
            let passed = rows.iter().filter(|r| r.pass).count();
            println!("compare: {passed}/{} points within tolerance", rows.len());
        }
        Results::Ts(runs) => {
            let from = burn_in(config.num_blocks);
            for &lambda in &config.lambdas() {
                let subset: Vec<_> = runs.iter().filter(|r| r.lambda == lambda).collect();
                let hits = subset.iter().filter(|r| r.run.modal_arm(from) == r.run.trace.oracle_arm_index).count();
                println!("ts lambda={lambda}: modal arm equals oracle arm in {hits}/{} runs", subset.len());
            }
        }
        Results::Regret(curves) => {
            for c in curves {
                let last = c.mean_regret.last().copied().unwrap_or(0.0);
                println!("regret lambda={}: R(K)={last:.2}, below envelope: {}", c.lambda, c.below_envelope());
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let (args, mode) = match cli.command {
        Command::Selftest { threads } => {
            init_threads(threads)?;
            let checks = run_selftest();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            println!("selftest: {} passed, {failed} failed", checks.len() - failed);
            return Ok(failed == 0);
        }
        Command::Simulate(a) => (a, Mode::Simulate),
        Command::Analytic(a) => (a, Mode::Analytic),
        Command::Ts(a) => (a, Mode::Ts),
        Command::Compare(a) => (a, Mode::Compare),
        Command::Regret(a) => (a, Mode::Regret),
    };
    init_threads(args.threads)?;
    let config = resolve(&args, mode)?;
    let previous = args.out.join(MANIFEST);
    if !args.overwrite && previous.exists() {
        return Err(ncs_aloha::Error::WouldOverwrite { path: previous }.into());
    }
    let start = Instant::now();
    let results = run_experiment(&config)?;
    report(&config, &results);
    let opts = EmitOptions { overwrite: args.overwrite, wall_time_s: start.elapsed().as_secs_f64() };
    let written = emit_results(&results, &config, &args.out, opts)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
