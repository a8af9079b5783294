//! Dataset CSV files and report documents.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{PipelineError, Result};

/// A sampled experiment record. Columns are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub t: Vec<f64>,
    /// `r × N`; zero rows when the input was not recorded.
    pub u: DMatrix<f64>,
    /// `m × N`.
    pub y: DMatrix<f64>,
    /// `n × N` effective input; zero rows when not recorded.
    pub fe: DMatrix<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Sampling time from the first two time stamps.
    pub fn t_s(&self) -> Option<f64> {
        (self.t.len() >= 2).then(|| self.t[1] - self.t[0])
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((1..=self.u.nrows()).map(|k| format!("u_{k}")));
        h.extend((1..=self.y.nrows()).map(|k| format!("y_{k}")));
        h.extend((1..=self.fe.nrows()).map(|k| format!("fe_{k}")));
        h
    }
}

/// Shortest representation that round-trips exactly (at most 17
/// significant digits).
fn fmt(v: f64) -> String {
    format!("{v:e}")
}

/// Writes `t,u_1..u_r,y_1..y_m,fe_1..fe_n`.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let n = ds.len();
    for (name, cols) in [("u", ds.u.ncols()), ("y", ds.y.ncols()), ("fe", ds.fe.ncols())] {
        if cols != n && !(cols == 0) {
            return Err(PipelineError::Config(format!("{name} has {cols} samples, t has {n}")));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", ds.header().join(","))?;
    let mut line = String::new();
    for k in 0..n {
        line.clear();
        line.push_str(&fmt(ds.t[k]));
        for m in [&ds.u, &ds.y, &ds.fe] {
            for r in 0..m.nrows() {
                line.push(',');
                line.push_str(&fmt(m[(r, k)]));
            }
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Column indices of `prefix_1, prefix_2, …`, requiring them to be
/// numbered consecutively from 1.
fn numbered(header: &[String], prefix: &str, path: &str) -> Result<Vec<usize>> {
    let mut found: Vec<(usize, usize)> = header
        .iter()
        .enumerate()
        .filter_map(|(c, h)| {
            h.strip_prefix(prefix)
                .and_then(|s| s.strip_prefix('_'))
                .and_then(|s| s.parse::<usize>().ok())
                .map(|k| (k, c))
        })
        .collect();
    found.sort();
    for (expect, &(k, _)) in (1..).zip(&found) {
        if k != expect {
            return Err(PipelineError::MissingColumn { path: path.into(), column: format!("{prefix}_{expect}") });
        }
    }
    Ok(found.into_iter().map(|(_, c)| c).collect())
}

/// Reads a dataset written by [`write_csv`] or by hand. `t` and `y_1` are
/// required; `u_*` and `fe_*` are optional.
pub fn ingest_csv(path: &Path) -> Result<Dataset> {
    let name = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(&name, e))?;
    let header: Vec<String> = rdr.headers().map_err(|e| csv_error(&name, e))?.iter().map(str::to_string).collect();
    let missing = |c: &str| PipelineError::MissingColumn { path: name.clone(), column: c.into() };
    let t_col = header.iter().position(|h| h == "t").ok_or_else(|| missing("t"))?;
    let u_cols = numbered(&header, "u", &name)?;
    let y_cols = numbered(&header, "y", &name)?;
    let fe_cols = numbered(&header, "fe", &name)?;
    if y_cols.is_empty() {
        return Err(missing("y_1"));
    }
    let width = header.len();

    let mut t = Vec::new();
    let mut u = Vec::new();
    let mut y = Vec::new();
    let mut fe = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(&name, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != width {
            return Err(PipelineError::Parse {
                path: name.clone(),
                line,
                msg: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let get = |c: usize| -> Result<f64> {
            rec[c].parse::<f64>().map_err(|e| PipelineError::Parse {
                path: name.clone(),
                line,
                msg: format!("column `{}`: {e}", header[c]),
            })
        };
        t.push(get(t_col)?);
        for &c in &u_cols {
            u.push(get(c)?);
        }
        for &c in &y_cols {
            y.push(get(c)?);
        }
        for &c in &fe_cols {
            fe.push(get(c)?);
        }
    }
    let n = t.len();
    Ok(Dataset {
        t,
        u: DMatrix::from_vec(u_cols.len(), n, u),
        y: DMatrix::from_vec(y_cols.len(), n, y),
        fe: DMatrix::from_vec(fe_cols.len(), n, fe),
    })
}

fn csv_error(path: &str, e: csv::Error) -> PipelineError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => PipelineError::Io(io),
        other => PipelineError::Parse { path: path.into(), line, msg: format!("{other:?}") },
    }
}

/// Pretty-printed JSON document.
pub fn emit_report<T: Serialize>(report: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Writes named columns of equal length as CSV.
pub fn write_columns(path: &Path, names: &[String], cols: &[Vec<f64>]) -> Result<()> {
    let len = cols.first().map_or(0, Vec::len);
    if names.len() != cols.len() || cols.iter().any(|c| c.len() != len) {
        return Err(PipelineError::Config("column names and lengths disagree".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", names.join(","))?;
    for k in 0..len {
        let row: Vec<String> = cols.iter().map(|c| fmt(c[k])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}
