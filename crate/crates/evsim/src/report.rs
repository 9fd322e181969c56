//! Report files: `summary.json`, `cdf.csv` and `trials.csv`.

use std::io::{Read, Write};
use std::path::Path;

use okra_core::adversary::Ratio;
use okra_core::io::to_canonical_json;
use okra_core::{OkraError, Result};

use crate::sim::ComparisonReport;

fn csv_err(e: csv::Error) -> OkraError {
    OkraError::Io(std::io::Error::new(std::io::ErrorKind::Other, e))
}

fn fmt_ratio(r: Ratio) -> String {
    match r {
        Ratio::Finite(v) => format!("{v}"),
        Ratio::Infinite => "inf".into(),
    }
}

fn parse_ratio(s: &str) -> Option<Ratio> {
    if s == "inf" {
        Some(Ratio::Infinite)
    } else {
        s.parse().ok().map(Ratio::Finite)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfRow {
    pub policy: String,
    pub ratio: Ratio,
    pub cumulative_fraction: f64,
}

/// Empirical CDF as a step function: for each sorted ratio, one row at
/// the level before the step and one after.
pub fn cdf_rows(report: &ComparisonReport) -> Vec<CdfRow> {
    let mut out = Vec::new();
    for p in &report.summary.policies {
        let mut rs = report.ratios(&p.policy);
        rs.sort_by(|a, b| a.value().total_cmp(&b.value()));
        let n = rs.len() as f64;
        for (i, r) in rs.into_iter().enumerate() {
            for k in [i, i + 1] {
                out.push(CdfRow { policy: p.policy.clone(), ratio: r, cumulative_fraction: k as f64 / n });
            }
        }
    }
    out
}

pub fn write_cdf<W: Write>(writer: W, rows: &[CdfRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["policy", "ratio", "cumulative_fraction"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.policy.clone(), fmt_ratio(r.ratio), format!("{}", r.cumulative_fraction)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cdf<R: Read>(reader: R) -> Result<Vec<CdfRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| OkraError::Row { row, message: e.to_string() })?;
        let bad = |what: &str| OkraError::Row { row, message: format!("bad {what}") };
        out.push(CdfRow {
            policy: rec.get(0).ok_or_else(|| bad("policy"))?.to_string(),
            ratio: rec.get(1).and_then(parse_ratio).ok_or_else(|| bad("ratio"))?,
            cumulative_fraction: rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(|| bad("fraction"))?,
        });
    }
    Ok(out)
}

pub fn write_trials<W: Write>(writer: W, report: &ComparisonReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let policies: Vec<&str> = report.summary.policies.iter().map(|p| p.policy.as_str()).collect();
    let mut header: Vec<String> = ["day", "trial", "sessions", "capacity_per_slot", "offline_value", "offline_gap", "excluded"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for p in &policies {
        header.push(format!("{p}_value"));
        header.push(format!("{p}_ratio"));
    }
    w.write_record(&header).map_err(csv_err)?;
    for t in &report.trials {
        let mut rec = vec![
            t.day.to_string(),
            t.trial.to_string(),
            t.sessions.to_string(),
            format!("{}", t.capacity_per_slot),
            format!("{}", t.offline_value),
            format!("{}", t.offline_gap),
            t.excluded.to_string(),
        ];
        for p in &policies {
            match t.outcomes.iter().find(|o| o.policy == *p) {
                Some(o) => {
                    rec.push(format!("{}", o.value));
                    rec.push(fmt_ratio(o.ratio));
                }
                None => rec.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the three report files into `dir`, creating it if needed.
pub fn emit(report: &ComparisonReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("summary.json"), to_canonical_json(&report.summary))?;
    write_cdf(std::fs::File::create(dir.join("cdf.csv"))?, &cdf_rows(report))?;
    write_trials(std::fs::File::create(dir.join("trials.csv"))?, report)?;
    Ok(())
}
