use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DataMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Delimiter {
    Comma,
    Whitespace,
}

/// Whether each line of a dense file holds one point or one feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    PointsAsRows,
    PointsAsColumns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenseFormat {
    pub delimiter: Delimiter,
    pub orientation: Orientation,
    pub skip_header: usize,
}

impl Default for DenseFormat {
    fn default() -> Self {
        Self {
            delimiter: Delimiter::Comma,
            orientation: Orientation::PointsAsRows,
            skip_header: 0,
        }
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_num(path: &Path, line: usize, tok: &str) -> Result<f64> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("not a number: {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite value {tok:?}")));
    }
    Ok(v)
}

/// Reads a rectangular numeric table into a points-as-columns matrix.
pub fn load_dense(path: impl AsRef<Path>, format: &DenseFormat) -> Result<DataMatrix> {
    let path = path.as_ref();
    let mut table: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<(usize, usize)> = None;
    let mut push_row = |line: usize, row: Vec<f64>| -> Result<()> {
        match width {
            None => width = Some((row.len(), line)),
            Some((w, first)) if w != row.len() => {
                return Err(parse_err(
                    path,
                    line,
                    format!("ragged row: {} fields, line {first} had {w}", row.len()),
                ))
            }
            _ => {}
        }
        table.push(row);
        Ok(())
    };

    match format.delimiter {
        Delimiter::Comma => {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .trim(csv::Trim::All)
                .from_path(path)?;
            for rec in rdr.records() {
                let rec = rec?;
                let line = rec.position().map_or(0, |p| p.line() as usize);
                if line <= format.skip_header || rec.iter().all(|f| f.is_empty()) {
                    continue;
                }
                let row = rec
                    .iter()
                    .map(|tok| parse_num(path, line, tok))
                    .collect::<Result<Vec<_>>>()?;
                push_row(line, row)?;
            }
        }
        Delimiter::Whitespace => {
            let reader = BufReader::new(File::open(path)?);
            for (i, line) in reader.lines().enumerate() {
                let line_no = i + 1;
                let line = line?;
                if line_no <= format.skip_header || line.trim().is_empty() {
                    continue;
                }
                let row = line
                    .split_whitespace()
                    .map(|tok| parse_num(path, line_no, tok))
                    .collect::<Result<Vec<_>>>()?;
                push_row(line_no, row)?;
            }
        }
    }

    if table.is_empty() || table[0].is_empty() {
        return Err(parse_err(path, format.skip_header + 1, "no numeric data"));
    }
    match format.orientation {
        Orientation::PointsAsRows => DataMatrix::from_columns(&table),
        Orientation::PointsAsColumns => DataMatrix::from_rows(&table),
    }
}

/// Reads LIBSVM/SVMlight text (`label idx:val ...`, 1-based indices) densely.
/// Returns the matrix and the per-point labels.
pub fn load_libsvm(path: impl AsRef<Path>, dims: usize) -> Result<(DataMatrix, Vec<f64>)> {
    let path: PathBuf = path.as_ref().to_path_buf();
    if dims == 0 {
        return Err(Error::InvalidArgument("libsvm dims must be positive".into()));
    }
    let reader = BufReader::new(File::open(&path)?);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let label = parse_num(&path, line_no, toks.next().unwrap_or(""))?;
        let start = values.len();
        values.resize(start + dims, 0.0);
        for tok in toks {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(&path, line_no, format!("malformed pair {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(&path, line_no, format!("bad feature index {idx:?}")))?;
            if idx == 0 || idx > dims {
                return Err(parse_err(
                    &path,
                    line_no,
                    format!("feature index {idx} outside 1..={dims}"),
                ));
            }
            values[start + idx - 1] = parse_num(&path, line_no, val)?;
        }
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(parse_err(&path, 1, "no data lines"));
    }
    let n = labels.len();
    Ok((DataMatrix::new(dims, n, values)?, labels))
}

/// Writes one point per line, comma separated, shortest round-trip formatting.
pub fn write_dense_csv(path: impl AsRef<Path>, x: &DataMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for c in x.columns() {
        let mut first = true;
        for v in c {
            if !first {
                w.write_all(b",")?;
            }
            first = false;
            write!(w, "{v}")?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
