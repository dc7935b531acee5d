//! CSV and JSON artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::rate::{RatePoint, RateReport};
use crate::driver::DriverMatrices;
use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::scheme::SchemePath;

/// 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn rate_csv(points: &[RatePoint], pick: fn(&RatePoint) -> (f64, f64)) -> String {
    let mut s = String::from("n,error,stderr\n");
    for p in points {
        let (e, se) = pick(p);
        let _ = writeln!(s, "{},{},{}", p.n, num(e), num(se));
    }
    s
}

/// Writes `rate_mean.csv` and `rate_end.csv` for the points computed so far.
pub fn write_rate_csvs(points: &[RatePoint], dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mean = dir.join("rate_mean.csv");
    let end = dir.join("rate_end.csv");
    write_file(&mean, &rate_csv(points, |p| (p.mean_error, p.mean_stderr)))?;
    write_file(&end, &rate_csv(points, |p| (p.end_error, p.end_stderr)))?;
    Ok(vec![mean, end])
}

/// Writes `rate_mean.csv`, `rate_end.csv` and `summary.json` into `dir`.
pub fn emit_report(
    report: &RateReport,
    config_echo: &serde_json::Value,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    if report.points.is_empty() {
        return Err(Error::invalid("rate report has no ladder entries"));
    }
    let mut files = write_rate_csvs(&report.points, dir)?;
    let summary = json!({
        "fitted_slope_mean": report.fit_mean.map(|f| f.slope),
        "fitted_slope_end": report.fit_end.map(|f| f.slope),
        "fit_mean": report.fit_mean,
        "fit_end": report.fit_end,
        "reference_slope": report.reference_slope,
        "flags": report.flags,
        "seed": report.seed,
        "mc_paths": report.mc_paths,
        "horizon": report.horizon,
        "points": report.points,
        "config": config_echo,
    });
    let path = dir.join("summary.json");
    write_file(&path, &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    files.push(path);
    Ok(files)
}

/// Writes `trajectories.csv` with header `t,path_0,...` and one row per node.
pub fn write_trajectories(paths: &[SchemePath], out: &Path) -> Result<()> {
    let first = paths
        .first()
        .ok_or_else(|| Error::invalid("no trajectories to write"))?;
    let grid = *first.grid();
    if paths.iter().any(|p| *p.grid() != grid) {
        return Err(Error::invalid("trajectories live on different grids"));
    }
    let mut s = String::from("t");
    for i in 0..paths.len() {
        let _ = write!(s, ",path_{i}");
    }
    s.push('\n');
    for (k, t) in grid.nodes().enumerate() {
        s.push_str(&num(t));
        for p in paths {
            s.push(',');
            s.push_str(&num(p.values()[k]));
        }
        s.push('\n');
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_file(out, &s)
}

fn matrix_csv(m: &SquareMatrix) -> String {
    let mut s = String::new();
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|&v| num(v)).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

/// Dumps `cov.csv`, `lambda.csv`, `chol_t.csv` and `chol_d.csv` (row-major).
pub fn dump_matrices(matrices: &DriverMatrices, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let d: Vec<String> = matrices.chol_d().iter().map(|&v| num(v)).collect();
    let entries = [
        ("cov.csv", matrix_csv(matrices.cov())),
        ("lambda.csv", matrix_csv(&matrices.lambda_matrix())),
        ("chol_t.csv", matrix_csv(matrices.chol_t())),
        ("chol_d.csv", d.join("\n") + "\n"),
    ];
    let mut files = Vec::new();
    for (name, body) in entries {
        let path = dir.join(name);
        write_file(&path, &body)?;
        files.push(path);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_digits() {
        let v = 0.1f64 + 0.2;
        let s = num(v);
        assert_eq!(s.parse::<f64>().unwrap(), v);
        assert_eq!(
            s.split('e').next().unwrap().replace(['.', '-'], "").len(),
            17
        );
    }
}
