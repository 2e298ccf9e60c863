//! Plot-ready CSV outputs.
//!
//! | file | header |
//! |------|--------|
//! | violations | `model,realization_id,violations` |
//! | summary | `model,mean,max,p95,cost` |
//! | cdf | `model,violations,cdf` |
//! | sweep objectives | `delta_km,omega,model,objective,proven_optimal,sites_open,sessions` |
//! | sweep timings | `delta_km,omega,model,seconds,iterations,cuts` |

use std::fs::File;
use std::io::Write;
use std::path::Path;

use mmu_core::eval::{EvaluationReport, ViolationRow};
use serde::{Deserialize, Serialize};

pub const VIOLATIONS_HEADER: &str = "model,realization_id,violations";
pub const SUMMARY_HEADER: &str = "model,mean,max,p95,cost";
pub const CDF_HEADER: &str = "model,violations,cdf";

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected header `{found}` (expected `{expected}`)")]
    Header { found: String, expected: &'static str },
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
struct ViolationRecord {
    model: String,
    realization_id: usize,
    violations: u64,
}

fn writer(path: &Path) -> Result<csv::Writer<File>, ReportError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(csv::Writer::from_path(path)?)
}

pub fn write_violations(report: &EvaluationReport, path: &Path) -> Result<(), ReportError> {
    let mut w = writer(path)?;
    for r in &report.rows {
        w.serialize(ViolationRecord { model: r.model.clone(), realization_id: r.realization_id, violations: r.violations })?;
    }
    if report.rows.is_empty() {
        w.write_record(VIOLATIONS_HEADER.split(','))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_violations(path: &Path) -> Result<Vec<ViolationRow>, ReportError> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != VIOLATIONS_HEADER {
        return Err(ReportError::Header { found: header, expected: VIOLATIONS_HEADER });
    }
    r.deserialize::<ViolationRecord>()
        .map(|rec| {
            let rec = rec?;
            Ok(ViolationRow { model: rec.model, realization_id: rec.realization_id, violations: rec.violations })
        })
        .collect()
}

pub fn write_summary(report: &EvaluationReport, path: &Path) -> Result<(), ReportError> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_HEADER.split(','))?;
    for s in &report.summaries {
        w.write_record([s.model.clone(), format!("{:.6}", s.mean), s.max.to_string(), s.p95.to_string(), s.cost.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cdf(report: &EvaluationReport, path: &Path) -> Result<(), ReportError> {
    let mut w = writer(path)?;
    w.write_record(CDF_HEADER.split(','))?;
    for s in &report.summaries {
        for (x, p) in report.cdf(&s.model) {
            w.write_record([s.model.clone(), x.to_string(), format!("{:.6}", p)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One solved (Δ, ω, model) cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub delta_km: f64,
    pub omega: f64,
    pub model: String,
    /// `None` when the model is infeasible or the solve failed.
    pub objective: Option<u64>,
    pub proven_optimal: bool,
    pub sites_open: usize,
    pub sessions: u64,
    pub seconds: f64,
    pub iterations: usize,
    pub cuts: usize,
}

pub fn write_sweep(rows: &[SweepRow], objectives: &Path, timings: &Path) -> Result<(), ReportError> {
    let mut w = writer(objectives)?;
    w.write_record(["delta_km", "omega", "model", "objective", "proven_optimal", "sites_open", "sessions"])?;
    for r in rows {
        w.write_record([
            format!("{}", r.delta_km),
            format!("{}", r.omega),
            r.model.clone(),
            r.objective.map(|o| o.to_string()).unwrap_or_else(|| "infeasible".into()),
            r.proven_optimal.to_string(),
            r.sites_open.to_string(),
            r.sessions.to_string(),
        ])?;
    }
    w.flush()?;
    let mut t = writer(timings)?;
    t.write_record(["delta_km", "omega", "model", "seconds", "iterations", "cuts"])?;
    for r in rows {
        t.write_record([
            format!("{}", r.delta_km),
            format!("{}", r.omega),
            r.model.clone(),
            format!("{:.3}", r.seconds),
            r.iterations.to_string(),
            r.cuts.to_string(),
        ])?;
    }
    t.flush()?;
    Ok(())
}

/// Free-form lines next to the CSVs.
pub fn write_lines(lines: &[String], path: &Path) -> Result<(), ReportError> {
    let mut f = File::create(path)?;
    for l in lines {
        writeln!(f, "{l}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use mmu_core::eval::ModelSummary;

    fn sample() -> EvaluationReport {
        EvaluationReport {
            rows: vec![
                ViolationRow { model: "det".into(), realization_id: 0, violations: 20 },
                ViolationRow { model: "det".into(), realization_id: 1, violations: 0 },
                ViolationRow { model: "budgeted".into(), realization_id: 0, violations: 0 },
            ],
            summaries: vec![ModelSummary { model: "det".into(), mean: 10.0, max: 20, p95: 20, cost: 4 }],
        }
    }

    #[test]
    fn violations_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        write_violations(&sample(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("model,realization_id,violations\n"));
        assert_eq!(read_violations(&path).unwrap(), sample().rows);
    }

    #[test]
    fn summary_and_cdf_headers() {
        let dir = tempfile::tempdir().unwrap();
        write_summary(&sample(), &dir.path().join("s.csv")).unwrap();
        write_cdf(&sample(), &dir.path().join("c.csv")).unwrap();
        let s = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
        assert_eq!(s, "model,mean,max,p95,cost\ndet,10.000000,20,20,4\n");
        let c = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
        assert_eq!(c, "model,violations,cdf\ndet,0,0.500000\ndet,20,1.000000\n");
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b,c\nx,1,2\n").unwrap();
        assert!(matches!(read_violations(&path), Err(ReportError::Header { .. })));
    }
}
