//! CSV readers and writers for matrices, observations and traces.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a value
//! written and read back is bit-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use bmf_core::diagnostics::ChainTrace;
use bmf_core::{Observation, ObservationSet};
use nalgebra::DMatrix;

use crate::error::{CliError, CliResult};

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::usage(format!("{}:{line}: {msg}", path.display()))
}

pub fn format_matrix(x: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for row in x.row_iter() {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn write_matrix(path: &Path, x: &DMatrix<f64>) -> CliResult<()> {
    write_file(path, &format_matrix(x))
}

pub fn read_matrix(path: &Path) -> CliResult<DMatrix<f64>> {
    let text = read_file(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| parse_err(path, idx + 1, e))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    path,
                    idx + 1,
                    format!("expected {} values, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::usage(format!("{}: empty matrix", path.display())));
    }
    let cols = rows[0].len();
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

pub fn format_observations(obs: &ObservationSet) -> String {
    let mut s = String::from("row,col,value\n");
    for e in obs.entries() {
        let _ = writeln!(s, "{},{},{}", e.row, e.col, e.value);
    }
    s
}

pub fn write_observations(path: &Path, obs: &ObservationSet) -> CliResult<()> {
    write_file(path, &format_observations(obs))
}

/// Reads `row,col,value` lines into an `m x n` observation set.
pub fn read_observations(path: &Path, m: usize, n: usize) -> CliResult<ObservationSet> {
    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "row,col,value" => {}
        _ => return Err(parse_err(path, 1, "expected header `row,col,value`")),
    }
    let mut entries = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 3 {
            return Err(parse_err(path, idx + 1, "expected three fields"));
        }
        let row = cells[0].parse().map_err(|e| parse_err(path, idx + 1, e))?;
        let col = cells[1].parse().map_err(|e| parse_err(path, idx + 1, e))?;
        let value = cells[2].parse().map_err(|e| parse_err(path, idx + 1, e))?;
        entries.push(Observation { row, col, value });
    }
    ObservationSet::new(m, n, entries).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn format_trace(trace: &ChainTrace) -> String {
    let mut s = String::from("iter");
    for name in &trace.monitor_names {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for (row, iter) in trace.iterations.iter().enumerate() {
        let _ = write!(s, "{iter}");
        for series in &trace.samples {
            let _ = write!(s, ",{}", series[row]);
        }
        s.push('\n');
    }
    s
}

/// A trace as read back from disk: iterations and one series per monitor.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub monitor_names: Vec<String>,
    pub iterations: Vec<usize>,
    pub samples: Vec<Vec<f64>>,
}

impl TraceTable {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        let k = self.monitor_names.iter().position(|n| n == name)?;
        Some(&self.samples[k])
    }
}

pub fn read_trace(path: &Path) -> CliResult<TraceTable> {
    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, h)| h).unwrap_or("");
    let mut names = header.split(',');
    if names.next() != Some("iter") {
        return Err(parse_err(path, 1, "expected header starting with `iter`"));
    }
    let monitor_names: Vec<String> = names.map(str::to_string).collect();
    let mut iterations = Vec::new();
    let mut samples = vec![Vec::new(); monitor_names.len()];
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let iter = cells
            .next()
            .unwrap_or("")
            .parse()
            .map_err(|e| parse_err(path, idx + 1, e))?;
        iterations.push(iter);
        let mut count = 0;
        for (series, cell) in samples.iter_mut().zip(cells.by_ref()) {
            series.push(cell.parse::<f64>().map_err(|e| parse_err(path, idx + 1, e))?);
            count += 1;
        }
        if count != monitor_names.len() || cells.next().is_some() {
            return Err(parse_err(path, idx + 1, "wrong number of fields"));
        }
    }
    Ok(TraceTable {
        monitor_names,
        iterations,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_bit_exact() {
        let x = DMatrix::from_row_slice(2, 3, &[0.1, -1e-300, 1.0 / 3.0, 12345.678, f64::MIN_POSITIVE, -0.0]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_matrix(&p, &x).unwrap();
        let y = read_matrix(&p).unwrap();
        for (a, b) in x.iter().zip(y.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(y.shape(), (2, 3));
    }

    #[test]
    fn observation_round_trip() {
        let obs = ObservationSet::new(
            3,
            2,
            vec![
                Observation { row: 2, col: 1, value: 0.25 },
                Observation { row: 0, col: 0, value: -1.5 },
            ],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.csv");
        write_observations(&p, &obs).unwrap();
        assert_eq!(read_file(&p).unwrap(), "row,col,value\n0,0,-1.5\n2,1,0.25\n");
        assert_eq!(read_observations(&p, 3, 2).unwrap(), obs);
        assert!(read_observations(&p, 2, 2).is_err());
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_file(&p, "1,2\n3\n").unwrap();
        let err = read_matrix(&p).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");
    }
}
