use std::fs;
use std::path::{Path, PathBuf};

use super::run::ScenarioResult;
use crate::error::Result;

pub const TABLE_HEADER: &str = "scenario\tk\talpha\tverdict\tslope\tpassed";

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub scenario: String,
    pub k: usize,
    pub alpha: usize,
    pub verdict: String,
    pub slope: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub plot_files: Vec<PathBuf>,
}

impl Report {
    pub fn table(&self) -> String {
        let mut s = String::from(TABLE_HEADER);
        s.push('\n');
        for r in &self.rows {
            let slope = r.slope.map_or("-".to_string(), |v| format!("{v:.16e}"));
            s.push_str(&format!("{}\t{}\t{}\t{}\t{}\t{}\n", r.scenario, r.k, r.alpha, r.verdict, slope, r.passed));
        }
        s
    }
}

/// Every `result.json` at most one directory below `dir`, sorted by path.
pub fn find_results(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let top = dir.join("result.json");
    if top.is_file() {
        out.push(top);
    }
    for entry in fs::read_dir(dir)? {
        let p = entry?.path().join("result.json");
        if p.is_file() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Summary table over all results below `dir`, plus two-column
/// `log ε  log fraction` plot files written to `out/plot`.
pub fn report(dir: &Path, out: &Path) -> Result<Report> {
    let mut rows = Vec::new();
    let mut plot_files = Vec::new();
    let plot_dir = out.join("plot");
    fs::create_dir_all(&plot_dir)?;
    for path in find_results(dir)? {
        let result: ScenarioResult = serde_json::from_str(&fs::read_to_string(&path)?)?;
        for run in &result.runs {
            // The slope reported for rate runs is the one used for the verdict.
            let slope = run.metrics.get("slope").copied().or_else(|| run.small_delta_slope().map(|s| s.1));
            rows.push(ReportRow {
                scenario: result.id.to_string(),
                k: run.k,
                alpha: run.alpha_index,
                verdict: run.verdict.map_or("-".to_string(), |v| {
                    serde_json::to_value(v).ok().and_then(|j| j.as_str().map(String::from)).unwrap_or_default()
                }),
                slope,
                passed: run.passed,
            });
            for (j, c) in run.curves.iter().enumerate() {
                let mut body = String::from("# log_epsilon log_fraction\n");
                for (e, f) in c.epsilons.iter().zip(&c.fractions) {
                    if *f > 0.0 {
                        body.push_str(&format!("{:.16e} {:.16e}\n", e.ln(), f.ln()));
                    }
                }
                let p = plot_dir.join(format!("{}_k{}_a{}_d{}.dat", result.id, run.k, run.alpha_index, j));
                fs::write(&p, body)?;
                plot_files.push(p);
            }
        }
    }
    let report = Report { rows, plot_files };
    fs::write(out.join("summary.tsv"), report.table())?;
    Ok(report)
}
