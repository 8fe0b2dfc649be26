//! Paired multi-seed benchmark: every controller of a seed consumes the same
//! wind and disturbance streams.

use std::fmt::Write as _;
use std::path::Path;

use omac_core::controller::{run_sequence_with, Estimator};
use omac_core::linalg::ls_slope;
use omac_core::metrics::{ace, eiss_bound, EpisodeLog};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ControllerKind, ExperimentConfig};
use crate::setup::{build_estimator, seed_setup, stream_hash};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "OMAC_WORKERS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub i: usize,
    pub mean_pred_err: f64,
    pub mean_ctrl_err: f64,
    pub lambda_min: Option<f64>,
}

/// One controller on one seed. `ace` is `None` for a failure row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub controller: String,
    pub seed: u64,
    pub ace: Option<f64>,
    pub failure: Option<String>,
    pub stream_hash: String,
    /// `(ace, bound)` when the plant has known e-ISS constants.
    pub eiss: Option<(f64, f64)>,
    pub iterations: Vec<IterationRow>,
    #[serde(skip)]
    pub log: Option<EpisodeLog>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerSummary {
    pub controller: String,
    /// Mean ACE over the successful runs.
    pub mean: f64,
    /// Sample standard deviation, `n − 1` denominator; `0` for a single run.
    pub std: f64,
    pub runs: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckVerdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckVerdict {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub name: String,
    pub seeds: Vec<u64>,
    pub controllers: Vec<String>,
    pub summaries: Vec<ControllerSummary>,
    /// Seed-major, controllers in config order.
    pub runs: Vec<RunRecord>,
    pub checks: Vec<CheckVerdict>,
}

impl BenchmarkReport {
    pub fn summary(&self, controller: &str) -> Option<&ControllerSummary> {
        self.summaries.iter().find(|s| s.controller == controller)
    }

    pub fn runs_of<'a>(&'a self, controller: &'a str) -> impl Iterator<Item = &'a RunRecord> {
        self.runs.iter().filter(move |r| r.controller == controller)
    }

    /// Per-seed least-squares slope of the per-iteration mean prediction error
    /// against `i`, successful runs only.
    pub fn pred_err_slopes(&self, controller: &str) -> Vec<f64> {
        self.runs_of(controller)
            .filter(|r| r.failure.is_none())
            .map(|r| {
                let xs: Vec<f64> = r.iterations.iter().map(|it| it.i as f64).collect();
                let ys: Vec<f64> = r.iterations.iter().map(|it| it.mean_pred_err).collect();
                ls_slope(&xs, &ys)
            })
            .collect()
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed) && self.runs.iter().all(|r| r.failure.is_none())
    }
}

/// Worker count from [`WORKERS_ENV`], else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn run_benchmark(cfg: &ExperimentConfig) -> anyhow::Result<BenchmarkReport> {
    run_benchmark_with_workers(cfg, default_workers())
}

/// Output is independent of `workers`.
pub fn run_benchmark_with_workers(cfg: &ExperimentConfig, workers: usize) -> anyhow::Result<BenchmarkReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
    let tasks: Vec<(u64, usize)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| (0..cfg.controllers.len()).map(move |k| (s, k)))
        .collect();
    let runs: Vec<RunRecord> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(seed, k)| run_one(cfg, seed, k))
            .collect::<anyhow::Result<Vec<_>>>()
    })?;
    let summaries = cfg
        .controllers
        .iter()
        .map(|c| summarize(&c.name, runs.iter().filter(|r| r.controller == c.name)))
        .collect();
    let checks = run_checks(cfg, &runs);
    Ok(BenchmarkReport {
        name: cfg.name.clone(),
        seeds: cfg.seeds.clone(),
        controllers: cfg.controllers.iter().map(|c| c.name.clone()).collect(),
        summaries,
        runs,
        checks,
    })
}

/// Each task builds its own streams and stack; nothing is shared between workers.
fn run_one(cfg: &ExperimentConfig, seed: u64, k: usize) -> anyhow::Result<RunRecord> {
    let ctrl = &cfg.controllers[k];
    let setup = seed_setup(cfg, seed)?;
    let mut estimator = build_estimator(cfg, &setup, ctrl)?;
    let mut lambdas: Vec<Option<f64>> = Vec::with_capacity(cfg.outer_iterations);
    let result = run_sequence_with(
        &mut estimator,
        setup.plant.as_ref(),
        setup.law.as_ref(),
        &setup.conditions,
        &setup.disturbances,
        setup.x0.clone(),
        |_, e: &Estimator| lambdas.push(e.controller().and_then(|c| c.lambda_min())),
    );
    let mut record = RunRecord {
        controller: ctrl.name.clone(),
        seed,
        ace: None,
        failure: None,
        stream_hash: stream_hash(&setup.conditions, &setup.disturbances),
        eiss: None,
        iterations: Vec::new(),
        log: None,
    };
    match result {
        Ok(log) => {
            let a = ace(&log)?;
            record.ace = Some(a);
            if let Some(k) = &setup.eiss {
                record.eiss = Some((a, eiss_bound(&log, k)?));
            }
            record.iterations = log
                .iteration_summaries()
                .iter()
                .zip(lambdas.iter().copied().chain(std::iter::repeat(None)))
                .map(|(s, lambda_min)| IterationRow {
                    i: s.outer,
                    mean_pred_err: s.mean_pred_err,
                    mean_ctrl_err: s.mean_ctrl_err,
                    lambda_min,
                })
                .collect();
            if cfg.persist_logs {
                record.log = Some(log);
            }
        }
        Err(e) => record.failure = Some(e.to_string()),
    }
    Ok(record)
}

/// Mean and `n − 1` standard deviation of the successful runs.
pub fn summarize<'a>(controller: &str, runs: impl Iterator<Item = &'a RunRecord>) -> ControllerSummary {
    let mut values = Vec::new();
    let mut failures = 0;
    for r in runs {
        match r.ace {
            Some(a) => values.push(a),
            None => failures += 1,
        }
    }
    let n = values.len();
    let mean = if n == 0 { f64::NAN } else { values.iter().sum::<f64>() / n as f64 };
    let std = if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    ControllerSummary {
        controller: controller.to_string(),
        mean,
        std,
        runs: n,
        failures,
    }
}

fn run_checks(cfg: &ExperimentConfig, runs: &[RunRecord]) -> Vec<CheckVerdict> {
    let mut out = Vec::new();
    if cfg.checks.eiss {
        let checked: Vec<_> = runs.iter().filter_map(|r| r.eiss).collect();
        let held = checked.iter().filter(|(a, b)| a <= b).count();
        let margin = checked.iter().map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
        out.push(CheckVerdict::new(
            "eiss",
            held == checked.len(),
            format!("{held}/{} runs within bound, min margin {margin:.3e}", checked.len()),
        ));
    }
    if cfg.checks.paired_streams {
        let mut mismatched = Vec::new();
        for &seed in &cfg.seeds {
            let mut hashes = runs.iter().filter(|r| r.seed == seed).map(|r| &r.stream_hash);
            let first = hashes.next();
            if hashes.any(|h| Some(h) != first) {
                mismatched.push(seed);
            }
        }
        out.push(CheckVerdict::new(
            "paired_streams",
            mismatched.is_empty(),
            if mismatched.is_empty() {
                format!("{} seeds share streams across controllers", cfg.seeds.len())
            } else {
                format!("stream mismatch on seeds {mismatched:?}")
            },
        ));
    }
    if cfg.checks.diversity {
        let ridge: Vec<&str> = cfg
            .controllers
            .iter()
            .filter(|c| matches!(c.kind, ControllerKind::BilinearRidge { .. }))
            .map(|c| c.name.as_str())
            .collect();
        // The Gram matrix only accumulates PSD terms, so λ_min never decreases.
        let bad = runs
            .iter()
            .filter(|r| ridge.contains(&r.controller.as_str()))
            .filter(|r| {
                let l: Vec<f64> = r.iterations.iter().filter_map(|it| it.lambda_min).collect();
                l.windows(2).any(|w| w[1] < w[0] - 1e-9 * w[0].abs().max(1.0))
            })
            .count();
        out.push(CheckVerdict::new(
            "diversity",
            bad == 0,
            format!("{} ridge controllers, {bad} runs with decreasing lambda_min", ridge.len()),
        ));
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// `ace.csv`, `metrics_seed{n}.csv`, `summary.json` and, with logs, `logs/`.
pub fn write_outputs(report: &BenchmarkReport, dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut ace_csv = String::from("controller,seed,ace,status\n");
    for r in &report.runs {
        let status = if r.failure.is_some() { "diverged" } else { "ok" };
        writeln!(ace_csv, "{},{},{},{status}", r.controller, r.seed, fmt_opt(r.ace))?;
    }
    std::fs::write(dir.join("ace.csv"), ace_csv)?;

    for &seed in &report.seeds {
        let mut m = String::from("i,controller,mean_pred_err,mean_ctrl_err,lambda_min\n");
        for r in report.runs.iter().filter(|r| r.seed == seed) {
            for it in &r.iterations {
                writeln!(
                    m,
                    "{},{},{},{},{}",
                    it.i,
                    r.controller,
                    it.mean_pred_err,
                    it.mean_ctrl_err,
                    fmt_opt(it.lambda_min)
                )?;
            }
        }
        std::fs::write(dir.join(format!("metrics_seed{seed}.csv")), m)?;
    }

    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(report)?)?;

    if report.runs.iter().any(|r| r.log.is_some()) {
        let logs = dir.join("logs");
        std::fs::create_dir_all(&logs)?;
        for r in &report.runs {
            if let Some(log) = &r.log {
                let mut s = String::new();
                log.write_csv(&mut s)?;
                std::fs::write(logs.join(format!("{}_seed{}.csv", r.controller, r.seed)), s)?;
            }
        }
    }
    Ok(())
}

/// Reads a report back from `summary.json` in `dir`.
pub fn read_report(dir: &Path) -> anyhow::Result<BenchmarkReport> {
    let text = std::fs::read_to_string(dir.join("summary.json"))?;
    Ok(serde_json::from_str(&text)?)
}
