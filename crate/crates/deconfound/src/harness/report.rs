//! Report persistence. One run writes a directory:
//!
//! * `report.json`: provenance, per-replication logs, aggregates.
//! * `metrics.csv`: the scheme aggregates, one row per scheme.
//! * `smd.csv`: balance aggregates, one row per (scheme, feature).
//! * `ecdf.csv`: first-replication distribution traces.
//!
//! Floats are written with the shortest round-trip representation, so
//! reading a report back reproduces the original values exactly.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::run::{EcdfRow, ExperimentOutput, RunReport};

/// Audit tolerance: aggregates recomputed from the replication logs
/// must match the stored aggregates to this bound.
const AUDIT_TOL: f64 = 1e-12;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the full output directory, creating it if needed.
pub fn write_report(dir: &Path, output: &ExperimentOutput) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let json_path = dir.join("report.json");
    let file = File::create(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, &output.report)
        .map_err(|e| Error::Schema(format!("serializing report: {e}")))?;
    writer
        .write_all(b"\n")
        .and_then(|_| writer.flush())
        .map_err(|e| Error::io(&json_path, e))?;

    write_metrics_csv(&dir.join("metrics.csv"), &output.report)?;
    write_smd_csv(&dir.join("smd.csv"), &output.report)?;
    write_ecdf_csv(&dir.join("ecdf.csv"), &output.ecdf)?;
    Ok(())
}

fn write_metrics_csv(path: &Path, report: &RunReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record([
        "scheme",
        "estimator",
        "ate_mean",
        "ate_std",
        "epsilon_ate_mean",
        "epsilon_ate_std",
        "pehe_mean",
        "pehe_std",
        "weight_cv_mean",
        "weight_cv_std",
    ])
    .map_err(|e| Error::csv(path, e))?;
    for a in &report.aggregates {
        w.write_record([
            a.scheme.to_string(),
            a.estimator.to_string(),
            a.ate_mean.to_string(),
            a.ate_std.to_string(),
            opt(a.epsilon_ate_mean),
            opt(a.epsilon_ate_std),
            opt(a.pehe_mean),
            opt(a.pehe_std),
            a.weight_cv_mean.to_string(),
            a.weight_cv_std.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_smd_csv(path: &Path, report: &RunReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record([
        "scheme",
        "feature",
        "smd_mean",
        "smd_lower",
        "smd_upper",
        "ks_mean",
        "ks_lower",
        "ks_upper",
    ])
    .map_err(|e| Error::csv(path, e))?;
    for b in &report.balance {
        w.write_record([
            b.scheme.clone(),
            b.feature.clone(),
            b.smd_mean.to_string(),
            b.smd_lower.to_string(),
            b.smd_upper.to_string(),
            b.ks_mean.to_string(),
            b.ks_lower.to_string(),
            b.ks_upper.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_ecdf_csv(path: &Path, rows: &[EcdfRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["feature", "scheme", "group", "value", "cumulative"])
        .map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.write_record([
            r.feature.clone(),
            r.scheme.clone(),
            r.group.clone(),
            r.value.to_string(),
            r.cumulative.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a previously written `report.json`.
pub fn read_report(path: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("parsing report: {e}")))
}

/// Reads a previously written `ecdf.csv`.
pub fn read_ecdf(path: &Path) -> Result<Vec<EcdfRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut rows = Vec::new();
    for record in reader.deserialize::<EcdfRow>() {
        rows.push(record.map_err(|e| Error::csv(path, e))?);
    }
    Ok(rows)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= AUDIT_TOL
}

fn close_opt(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => close(x, y),
        _ => false,
    }
}

/// Recomputes every aggregate from the stored replication logs and
/// checks it against the stored aggregates. A mismatch means the
/// report was corrupted or edited.
pub fn audit_report(report: &RunReport) -> Result<()> {
    let records = &report.replications;
    if records.is_empty() {
        return Err(Error::Schema("report holds no replications".into()));
    }
    for (idx, agg) in report.aggregates.iter().enumerate() {
        let per_rep: Vec<_> = records
            .iter()
            .map(|rec| {
                rec.schemes
                    .get(idx)
                    .filter(|s| s.scheme == agg.scheme)
                    .ok_or_else(|| {
                        Error::Schema(format!(
                            "replication logs disagree with aggregate order at {}",
                            agg.scheme
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let ate: Vec<f64> = per_rep.iter().map(|s| s.ate_hat).collect();
        let cv: Vec<f64> = per_rep.iter().map(|s| s.weight_cv).collect();
        let eps: Vec<Option<f64>> = per_rep.iter().map(|s| s.epsilon_ate).collect();
        let pehe: Vec<Option<f64>> = per_rep.iter().map(|s| s.pehe).collect();
        let (ate_mean, ate_std) = super::run::mean_std(&ate);
        let (cv_mean, cv_std) = super::run::mean_std(&cv);
        let (eps_mean, eps_std) = super::run::mean_std_optional(&eps);
        let (pehe_mean, pehe_std) = super::run::mean_std_optional(&pehe);
        let ok = close(ate_mean, agg.ate_mean)
            && close(ate_std, agg.ate_std)
            && close(cv_mean, agg.weight_cv_mean)
            && close(cv_std, agg.weight_cv_std)
            && close_opt(eps_mean, agg.epsilon_ate_mean)
            && close_opt(eps_std, agg.epsilon_ate_std)
            && close_opt(pehe_mean, agg.pehe_mean)
            && close_opt(pehe_std, agg.pehe_std);
        if !ok {
            return Err(Error::Schema(format!(
                "stored aggregates for {} do not match the replication logs",
                agg.scheme
            )));
        }
    }
    for cell in &report.balance {
        let values: Vec<(f64, f64)> = records
            .iter()
            .map(|rec| {
                let rows = if cell.scheme == super::run::UNWEIGHTED_LABEL {
                    &rec.unweighted_balance
                } else {
                    &rec.schemes
                        .iter()
                        .find(|s| s.scheme.as_str() == cell.scheme)
                        .ok_or_else(|| {
                            Error::Schema(format!("balance row for unknown scheme {}", cell.scheme))
                        })?
                        .balance
                };
                let row = rows
                    .iter()
                    .find(|b| b.feature == cell.feature)
                    .ok_or_else(|| {
                        Error::Schema(format!("balance row for unknown feature {}", cell.feature))
                    })?;
                Ok((row.smd, row.ks))
            })
            .collect::<Result<Vec<_>>>()?;
        let smd: Vec<f64> = values.iter().map(|v| v.0).collect();
        let ks: Vec<f64> = values.iter().map(|v| v.1).collect();
        let (smd_lower, smd_mean, smd_upper) = if smd.len() < 2 {
            (smd[0], smd[0], smd[0])
        } else {
            crate::balance::replication_ci(&smd, 0.95)?
        };
        let (ks_lower, ks_mean, ks_upper) = if ks.len() < 2 {
            (ks[0], ks[0], ks[0])
        } else {
            crate::balance::replication_ci(&ks, 0.95)?
        };
        let ok = close(smd_mean, cell.smd_mean)
            && close(smd_lower, cell.smd_lower)
            && close(smd_upper, cell.smd_upper)
            && close(ks_mean, cell.ks_mean)
            && close(ks_lower, cell.ks_lower)
            && close(ks_upper, cell.ks_upper);
        if !ok {
            return Err(Error::Schema(format!(
                "stored balance summary for ({}, {}) does not match the logs",
                cell.scheme, cell.feature
            )));
        }
    }
    Ok(())
}
