//! Long-format curve data: `controller,seed,i,metric,value`.

use std::path::Path;

use crate::benchmark::{read_report, BenchmarkReport};

pub const HEADER: [&str; 5] = ["controller", "seed", "i", "metric", "value"];

/// Two rows per run and outer iteration: `ctrl_err` then `pred_err`.
pub fn export_plot_data<W: std::io::Write>(report: &BenchmarkReport, out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in &report.runs {
        for it in &r.iterations {
            for (metric, value) in [("ctrl_err", it.mean_ctrl_err), ("pred_err", it.mean_pred_err)] {
                w.write_record([
                    r.controller.as_str(),
                    &r.seed.to_string(),
                    &it.i.to_string(),
                    metric,
                    &value.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `summary.json` from `dir` and writes `dir/curves.csv`.
pub fn export_dir(dir: &Path) -> anyhow::Result<std::path::PathBuf> {
    let report = read_report(dir)?;
    let path = dir.join("curves.csv");
    export_plot_data(&report, std::fs::File::create(&path)?)?;
    Ok(path)
}
