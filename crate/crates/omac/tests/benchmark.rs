mod common;

use std::collections::BTreeMap;

use omac::benchmark::read_report;
use omac::export::export_dir;
use omac::{run_benchmark_with_workers, write_outputs, BenchmarkReport};

fn report() -> BenchmarkReport {
    run_benchmark_with_workers(&common::small_pendulum(), 2).unwrap()
}

fn parse_log(path: &std::path::Path) -> Vec<BTreeMap<String, f64>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    r.records()
        .map(|rec| {
            header
                .iter()
                .zip(rec.unwrap().iter())
                .map(|(k, v)| (k.clone(), v.parse().unwrap()))
                .collect()
        })
        .collect()
}

fn norm(row: &BTreeMap<String, f64>, prefix: &str) -> f64 {
    columns(row, prefix).iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn columns(row: &BTreeMap<String, f64>, prefix: &str) -> Vec<f64> {
    (0..)
        .map_while(|k| row.get(&format!("{prefix}{k}")).copied())
        .collect()
}

#[test]
fn every_controller_sees_the_same_streams_per_seed() {
    let r = report();
    for seed in &r.seeds {
        let hashes: Vec<&str> = r.runs.iter().filter(|x| x.seed == *seed).map(|x| x.stream_hash.as_str()).collect();
        assert_eq!(hashes.len(), r.controllers.len());
        assert!(hashes.windows(2).all(|w| w[0] == w[1]));
    }
    let per_seed: Vec<&str> = r.seeds.iter().map(|s| r.runs_of("no-adapt").find(|x| x.seed == *s).unwrap().stream_hash.as_str()).collect();
    assert_ne!(per_seed[0], per_seed[1]);
}

#[test]
fn worker_count_does_not_change_results() {
    let cfg = common::small_pendulum();
    let one = run_benchmark_with_workers(&cfg, 1).unwrap();
    let four = run_benchmark_with_workers(&cfg, 4).unwrap();
    let key = |r: &BenchmarkReport| r.runs.iter().map(|x| (x.controller.clone(), x.seed, x.ace)).collect::<Vec<_>>();
    assert_eq!(key(&one), key(&four));
}

#[test]
fn persisted_logs_reproduce_ace_and_curves() {
    let r = report();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&r, dir.path()).unwrap();
    let back = read_report(dir.path()).unwrap();
    let curves = export_dir(dir.path()).unwrap();

    let mut exported: BTreeMap<(String, u64, usize, String), f64> = BTreeMap::new();
    let mut rdr = csv::Reader::from_path(&curves).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        exported.insert(
            (rec[0].to_string(), rec[1].parse().unwrap(), rec[2].parse().unwrap(), rec[3].to_string()),
            rec[4].parse().unwrap(),
        );
    }

    for run in &back.runs {
        let rows = parse_log(&dir.path().join("logs").join(format!("{}_seed{}.csv", run.controller, run.seed)));
        let ace = rows.iter().map(|row| norm(row, "x")).sum::<f64>() / rows.len() as f64;
        let stored = run.ace.unwrap();
        assert!((ace - stored).abs() <= 1e-12 * stored, "{} seed {}", run.controller, run.seed);

        let mut by_iter: BTreeMap<usize, (f64, f64, usize)> = BTreeMap::new();
        for row in &rows {
            let f = columns(row, "f");
            let fhat = columns(row, "fhat");
            let pred: f64 = f.iter().zip(&fhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let e = by_iter.entry(row["i"] as usize).or_default();
            e.0 += norm(row, "x");
            e.1 += pred;
            e.2 += 1;
        }
        assert_eq!(by_iter.len(), run.iterations.len());
        for (i, (ctrl, pred, n)) in by_iter {
            let key = |m: &str| (run.controller.clone(), run.seed, i, m.to_string());
            assert!((exported[&key("ctrl_err")] - ctrl / n as f64).abs() < 1e-12);
            assert!((exported[&key("pred_err")] - pred / n as f64).abs() < 1e-12);
        }
    }

    let mut rdr = csv::Reader::from_path(dir.path().join("ace.csv")).unwrap();
    let mut seen = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let run = back.runs.iter().find(|x| x.controller == rec[0] && x.seed.to_string() == rec[1]).unwrap();
        assert_eq!(rec[2].parse::<f64>().unwrap(), run.ace.unwrap());
        seen += 1;
    }
    assert_eq!(seen, back.runs.len());
}

#[test]
fn summary_matches_recomputation_from_runs() {
    let r = report();
    for s in &r.summaries {
        let v: Vec<f64> = r.runs_of(&s.controller).filter_map(|x| x.ace).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        assert_eq!(s.runs, v.len());
        assert!((s.mean - mean).abs() <= 1e-15 * mean.abs().max(1.0));
        assert!((s.std - var.sqrt()).abs() <= 1e-12);
    }
}

#[test]
fn omniscient_tracks_better_than_no_adaptation() {
    let r = report();
    assert!(r.summary("omniscient").unwrap().mean < r.summary("no-adapt").unwrap().mean);
}
