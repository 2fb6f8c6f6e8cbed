//! CSV input/output for functional series and raw curve data.
//!
//! A [`FunctionalSeries`] is stored as a coefficient CSV (`t,c1,…,cp`)
//! plus a JSON sidecar holding the basis and label. Floats are written in
//! Rust's shortest round-trip form, so export followed by import restores
//! the coefficients bit for bit.
//!
//! Raw curve values (before basis projection) are accepted in two layouts:
//! wide, where the header row lists the grid points and each following row
//! is one curve, and long, with one `t,x,value` triplet per line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::series::FunctionalSeries;

#[derive(Serialize, Deserialize)]
struct SeriesMeta {
    basis: Basis,
    label: String,
    t_len: usize,
}

/// Sidecar location for a series CSV: `data.csv` ↦ `data.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Write `series` to `path` with its JSON sidecar.
pub fn write_series(series: &FunctionalSeries, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let p = series.dim();
    let mut out = String::from("t");
    for j in 1..=p {
        out.push_str(&format!(",c{j}"));
    }
    out.push('\n');
    for t in 0..series.len() {
        out.push_str(&format!("{}", t + 1));
        for j in 0..p {
            out.push_str(&format!(",{}", series.coeffs()[(t, j)]));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    let meta = SeriesMeta {
        basis: *series.basis(),
        label: series.label().to_string(),
        t_len: series.len(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

fn parse_cell(cell: &str, line_no: usize) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|_| {
        Error::Format(format!("line {line_no}: `{}` is not a number", cell.trim()))
    })
}

/// Read a series written by [`write_series`]; the sidecar must be present.
pub fn read_series(path: &Path) -> Result<FunctionalSeries> {
    let meta_path = sidecar_path(path);
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| {
        Error::Format(format!("missing sidecar {}: {e}", meta_path.display()))
    })?;
    let meta: SeriesMeta = serde_json::from_str(&meta_text)?;
    let p = meta.basis.size();

    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{} is empty", path.display())))?;
    let expected_header: String =
        std::iter::once("t".to_string()).chain((1..=p).map(|j| format!("c{j}"))).collect::<Vec<_>>().join(",");
    if header.trim() != expected_header {
        return Err(Error::Format(format!(
            "unexpected header `{}` (expected `{expected_header}`)",
            header.trim()
        )));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != p + 1 {
            return Err(Error::Format(format!(
                "line {line_no}: expected {} cells, got {}",
                p + 1,
                cells.len()
            )));
        }
        let t: usize = cells[0].trim().parse().map_err(|_| {
            Error::Format(format!("line {line_no}: bad time index `{}`", cells[0].trim()))
        })?;
        if t != rows.len() + 1 {
            return Err(Error::Format(format!(
                "line {line_no}: time index {t} out of order (expected {})",
                rows.len() + 1
            )));
        }
        let mut row = Vec::with_capacity(p);
        for cell in &cells[1..] {
            row.push(parse_cell(cell, line_no)?);
        }
        rows.push(row);
    }
    if rows.len() != meta.t_len {
        return Err(Error::Format(format!(
            "sidecar declares {} observations, file has {}",
            meta.t_len,
            rows.len()
        )));
    }
    let coeffs = DMatrix::from_fn(rows.len(), p, |t, j| rows[t][j]);
    FunctionalSeries::new(coeffs, meta.basis, meta.label)
}

/// Read raw curves in wide layout: header row = grid points, each
/// following row = one curve's values on that grid.
pub fn read_wide_csv(path: &Path) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{} is empty", path.display())))?;
    let grid: Vec<f64> = header
        .split(',')
        .enumerate()
        .map(|(_, cell)| parse_cell(cell, 1))
        .collect::<Result<_>>()?;
    if grid.is_empty() {
        return Err(Error::Format("wide CSV header has no grid points".to_string()));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != grid.len() {
            return Err(Error::Format(format!(
                "line {line_no}: expected {} values, got {}",
                grid.len(),
                cells.len()
            )));
        }
        let mut row = Vec::with_capacity(grid.len());
        for cell in cells {
            row.push(parse_cell(cell, line_no)?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("wide CSV curves"));
    }
    let raw = DMatrix::from_fn(rows.len(), grid.len(), |t, g| rows[t][g]);
    Ok((grid, raw))
}

/// Read raw curves in long layout (`t,x,value` per line, header required).
///
/// Time indices must be `1..=T` and every curve must be observed on the
/// same grid; rows may come in any order.
pub fn read_long_csv(path: &Path) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{} is empty", path.display())))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["t", "x", "value"] {
        return Err(Error::Format(format!(
            "unexpected long-format header `{}` (expected `t,x,value`)",
            header.trim()
        )));
    }
    let mut per_t: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 3 {
            return Err(Error::Format(format!(
                "line {line_no}: expected 3 cells, got {}",
                cells.len()
            )));
        }
        let t: usize = cells[0].trim().parse().map_err(|_| {
            Error::Format(format!("line {line_no}: bad time index `{}`", cells[0].trim()))
        })?;
        let x = parse_cell(cells[1], line_no)?;
        let value = parse_cell(cells[2], line_no)?;
        per_t.entry(t).or_default().push((x, value));
    }
    if per_t.is_empty() {
        return Err(Error::EmptyInput("long CSV rows"));
    }
    let t_len = *per_t.keys().next_back().unwrap();
    if *per_t.keys().next().unwrap() != 1 || per_t.len() != t_len {
        return Err(Error::Format(format!(
            "time indices must cover 1..={t_len} without gaps"
        )));
    }
    for obs in per_t.values_mut() {
        obs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite grid"));
    }
    let grid: Vec<f64> = per_t[&1].iter().map(|&(x, _)| x).collect();
    let mut raw = DMatrix::zeros(t_len, grid.len());
    for (&t, obs) in &per_t {
        if obs.len() != grid.len() || obs.iter().zip(&grid).any(|(&(x, _), &gx)| x != gx) {
            return Err(Error::Format(format!(
                "curve t={t} is not observed on the same grid as t=1"
            )));
        }
        for (g, &(_, v)) in obs.iter().enumerate() {
            raw[(t - 1, g)] = v;
        }
    }
    Ok((grid, raw))
}
