use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{summarize_rows, BenchmarkSummary, PolicyRow};
use crate::types::{format_ways, parse_ways};

pub const REPORT_HEADER: [&str; 6] = [
    "context_id",
    "policy",
    "allocation",
    "predicted_cpu",
    "true_cpu",
    "energy_j",
];
const BASELINES: [&str; 3] = ["random", "equal", "weighted"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Summary,
    Plotdata,
}

pub fn write_report_csv<W: Write>(rows: &[PolicyRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(REPORT_HEADER)?;
    for r in rows {
        out.write_record([
            r.context_id.to_string(),
            r.policy.clone(),
            format_ways(&r.ways),
            r.predicted_cpu.map_or_else(String::new, |v| v.to_string()),
            r.true_cpu.to_string(),
            r.energy_j.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_report_csv<R: Read>(r: R) -> Result<Vec<PolicyRow>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(r);
    let header = rdr.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != REPORT_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", REPORT_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |m: String| Error::Parse { line, message: m };
        if rec.len() != REPORT_HEADER.len() {
            return Err(bad(format!(
                "expected {} fields, found {}",
                REPORT_HEADER.len(),
                rec.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("{}: {e}", REPORT_HEADER[i])))
        };
        rows.push(PolicyRow {
            context_id: rec[0]
                .trim()
                .parse()
                .map_err(|e| bad(format!("context_id: {e}")))?,
            policy: rec[1].trim().to_string(),
            ways: parse_ways(&rec[2]).ok_or_else(|| bad(format!("bad allocation {:?}", &rec[2])))?,
            predicted_cpu: match rec[3].trim() {
                "" => None,
                _ => Some(num(3)?),
            },
            true_cpu: num(4)?,
            energy_j: num(5)?,
        });
    }
    Ok(rows)
}

/// Policies in order of first appearance, and the baselines among them.
fn policy_sets(rows: &[PolicyRow]) -> (Vec<String>, Vec<String>) {
    let mut policies: Vec<String> = Vec::new();
    for r in rows {
        if !policies.contains(&r.policy) {
            policies.push(r.policy.clone());
        }
    }
    let baselines = BASELINES
        .iter()
        .filter(|b| policies.iter().any(|p| p == *b))
        .map(|b| b.to_string())
        .collect();
    (policies, baselines)
}

pub fn summarize_report(rows: &[PolicyRow]) -> BenchmarkSummary {
    let (policies, baselines) = policy_sets(rows);
    summarize_rows(rows, &policies, &baselines, f64::NAN)
}

/// Bar-chart data: one row per (policy, baseline).
pub fn write_plotdata<W: Write>(summary: &BenchmarkSummary, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["policy", "baseline", "mean_savings_j", "max_savings_j"])?;
    for a in &summary.aggregates {
        out.write_record([
            a.policy.clone(),
            a.baseline.clone(),
            a.mean_savings_j.to_string(),
            a.max_savings_j.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn render_summary(summary: &BenchmarkSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "contexts: {}", summary.n_contexts);
    let _ = writeln!(s, "{:<10} {:>14} {:>10}", "policy", "mean_energy_j", "mean_cpu");
    for p in &summary.policies {
        let _ = writeln!(
            s,
            "{:<10} {:>14.1} {:>10.4}",
            p, summary.mean_energy_j[p], summary.mean_cpu[p]
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<10} {:<10} {:>15} {:>15}",
        "policy", "baseline", "mean_savings_j", "max_savings_j"
    );
    for a in &summary.aggregates {
        let _ = writeln!(
            s,
            "{:<10} {:<10} {:>15.2} {:>15.2}",
            a.policy, a.baseline, a.mean_savings_j, a.max_savings_j
        );
    }
    s
}

/// Render a per-context report CSV as a text summary or plot data.
pub fn cmd_report(report_path: &Path, format: ReportFormat) -> Result<String> {
    let file = std::fs::File::open(report_path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingArtifact {
                path: report_path.to_path_buf(),
                stage: "evaluate",
            }
        } else {
            Error::Io(e)
        }
    })?;
    let rows = read_report_csv(file)?;
    let summary = summarize_report(&rows);
    Ok(match format {
        ReportFormat::Summary => render_summary(&summary),
        ReportFormat::Plotdata => {
            let mut buf = Vec::new();
            write_plotdata(&summary, &mut buf)?;
            String::from_utf8(buf).expect("csv output is utf-8")
        }
    })
}
