use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use omac::checks::{run_suite, Suite};
use omac::{run_benchmark, write_outputs, CheckVerdict, ExperimentConfig};

#[derive(Parser)]
#[command(name = "omac", version, about = "Online meta-adaptive control benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark; the worker count comes from OMAC_WORKERS.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed list of the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run invariant check suites.
    Check {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
    },
    /// Write long-format curves.csv from a report directory.
    Export {
        #[arg(long)]
        report: PathBuf,
    },
}

fn print_verdicts(checks: &[CheckVerdict]) {
    for c in checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

fn run(config: PathBuf, seeds: Option<Vec<u64>>, out: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    let mut cfg = match ExperimentConfig::load(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return Ok(ExitCode::from(2));
        }
    };
    if let Some(s) = seeds {
        cfg.seeds = s;
        if let Err(e) = cfg.validate() {
            eprintln!("{e}");
            return Ok(ExitCode::from(2));
        }
    }
    let dir = out
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    let report = run_benchmark(&cfg)?;
    write_outputs(&report, &dir)?;
    println!("{:<20} {:>12} {:>12} {:>6} {:>8}", "controller", "ace_mean", "ace_std", "runs", "failed");
    for s in &report.summaries {
        println!(
            "{:<20} {:>12.6} {:>12.6} {:>6} {:>8}",
            s.controller, s.mean, s.std, s.runs, s.failures
        );
    }
    print_verdicts(&report.checks);
    for r in report.runs.iter().filter(|r| r.failure.is_some()) {
        println!("FAIL run {} seed {}: {}", r.controller, r.seed, r.failure.as_deref().unwrap_or(""));
    }
    println!("outputs written to {}", dir.display());
    Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seeds, out } => run(config, seeds, out),
        Command::Check { suite } => {
            let checks = run_suite(suite);
            print_verdicts(&checks);
            Ok(if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Export { report } => omac::export::export_dir(&report).map(|p| {
            println!("wrote {}", p.display());
            ExitCode::SUCCESS
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(1)
    })
}
