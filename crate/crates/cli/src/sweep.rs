//! Cartesian parameter sweeps over config fields.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use toml::Value;

use crate::config::{SimulationConfig, SweepConfig};
use crate::error::CliError;
use crate::run::{csv_err, num, simulate, write_manifest, Summary};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    /// `(key, value)` for each axis, in axis order.
    pub point: Vec<(String, Value)>,
    pub summary: Option<Summary>,
    pub error: Option<String>,
}

/// Grid points in row-major order, last axis fastest.
pub fn grid_points(sweep: &SweepConfig) -> Result<Vec<Vec<(String, Value)>>, CliError> {
    if sweep.axes.is_empty() {
        return Err(CliError::Config("sweep: no axes".into()));
    }
    let mut total: usize = 1;
    for a in &sweep.axes {
        if a.values.is_empty() {
            return Err(CliError::Config(format!("sweep: axis `{}` has no values", a.key)));
        }
        total = total.saturating_mul(a.values.len());
    }
    if total > sweep.max_points {
        return Err(CliError::Config(format!("sweep: {total} points exceed sweep.max_points = {}", sweep.max_points)));
    }
    let mut points = vec![Vec::new()];
    for a in &sweep.axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                a.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((a.key.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

fn evaluate(template: &SimulationConfig, point: &[(String, Value)], window: f64) -> Result<Summary, CliError> {
    let mut c = template.clone();
    c.sweep = None;
    for (k, v) in point {
        c = c.with_override(k, v.clone())?;
    }
    simulate(&c, true)?.summary(window).ok_or_else(|| CliError::Config("sweep: no coefficients".into()))
}

/// Evaluates every grid point on at most `workers` threads. Failures are kept
/// in their row.
pub fn sweep(template: &SimulationConfig, workers: usize) -> Result<Vec<SweepRow>, CliError> {
    let s = template.sweep.clone().ok_or_else(|| CliError::Config("sweep: config has no [sweep] table".into()))?;
    template.validate()?;
    let points = grid_points(&s)?;
    for (key, value) in &points[0] {
        template.with_override(key, value.clone())?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("sweep: thread pool: {e}")))?;
    let mut rows: Vec<SweepRow> = pool.install(|| {
        points
            .into_par_iter()
            .enumerate()
            .map(|(index, point)| {
                let (summary, error) = match evaluate(template, &point, s.window) {
                    Ok(v) => (Some(v), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                SweepRow { index, point, summary, error }
            })
            .collect()
    });
    rows.sort_by_key(|r| r.index);
    Ok(rows)
}

pub fn sweep_columns(template: &SimulationConfig) -> Vec<String> {
    let mut h = vec!["index".to_string()];
    if let Some(s) = &template.sweep {
        h.extend(s.axes.iter().map(|a| a.key.clone()));
    }
    h.extend(
        ["classification", "first_violation", "max_abs_eta", "mean_gamma1", "mean_gamma2", "error"].map(String::from),
    );
    h
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Float(x) => num(*x),
        other => other.to_string(),
    }
}

/// Writes `sweep.csv` and `manifest.json`.
pub fn write_sweep(template: &SimulationConfig, rows: &[SweepRow], out: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(out)?;
    let path = out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record(sweep_columns(template)).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.index.to_string()];
        rec.extend(r.point.iter().map(|(_, v)| cell(v)));
        match &r.summary {
            Some(s) => rec.extend([
                serde_json::to_value(s.classification).unwrap().as_str().unwrap().to_string(),
                s.first_violation.map(num).unwrap_or_default(),
                num(s.max_abs_eta),
                num(s.mean_gamma1),
                num(s.mean_gamma2),
                String::new(),
            ]),
            None => {
                rec.extend(std::iter::repeat_n(String::new(), 5));
                rec.push(r.error.clone().unwrap_or_default());
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    let files = vec![path];
    write_manifest(out, "sweep", template, f64::INFINITY, &files)?;
    Ok(vec![files[0].clone(), out.join("manifest.json")])
}
