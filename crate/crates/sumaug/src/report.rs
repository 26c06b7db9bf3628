//! Result files: `report.json` per run and the merged results table.

use std::fs;
use std::path::{Path, PathBuf};

use crate::pipeline::{EvalReport, SECTION_PLAIN, SECTION_PRETRAINED};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io { path: path.to_owned(), source }
}

pub fn to_json(report: &EvalReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<(), ReportError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, to_json(report)).map_err(io_err(path))
}

pub fn read_report(path: &Path) -> Result<EvalReport, ReportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| ReportError::Json { path: path.to_owned(), source })
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Renders test-split means as a markdown table: one row per report, grouped
/// by section and then by pretraining label (first appearance order). The
/// pretraining label is printed on the first row of its group only.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut out = String::from("| Pretraining | finetuning | R1 | R2 | RL |\n|---|---|---|---|---|\n");
    for section in [SECTION_PLAIN, SECTION_PRETRAINED] {
        let rows: Vec<&EvalReport> = reports.iter().filter(|r| r.section == section).collect();
        if rows.is_empty() {
            continue;
        }
        out.push_str(&format!("| *{section}* | | | | |\n"));
        let mut labels: Vec<&str> = Vec::new();
        for r in &rows {
            if !labels.contains(&r.pretraining.as_str()) {
                labels.push(&r.pretraining);
            }
        }
        for label in labels {
            for (i, r) in rows.iter().filter(|r| r.pretraining == label).enumerate() {
                let m = r.test.means;
                let shown = if i == 0 { label } else { "" };
                out.push_str(&format!(
                    "| {shown} | {} | {} | {} | {} |\n",
                    r.finetuning,
                    pct(m.r1),
                    pct(m.r2),
                    pct(m.rl)
                ));
            }
        }
    }
    out
}
