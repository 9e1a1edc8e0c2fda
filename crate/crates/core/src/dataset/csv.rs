//! CSV ingestion and export.
//!
//! Input is UTF-8, comma-delimited, with an optional header row. Lines whose
//! first character is `#` are skipped so that files written by this crate
//! (which carry a metadata preamble) read back unchanged.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    /// Zero-based column index.
    Index(usize),
    /// Header name; requires `has_header`.
    Name(String),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// Digits select by index, anything else by header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub has_header: bool,
    pub label_column: LabelColumn,
    /// Raw label value mapped to class 1; every other value maps to 0.
    pub positive_label: String,
}

impl CsvOptions {
    pub fn new(label_column: LabelColumn, positive_label: impl Into<String>) -> Self {
        CsvOptions {
            has_header: true,
            label_column,
            positive_label: positive_label.into(),
        }
    }

    pub fn without_header(mut self) -> Self {
        self.has_header = false;
        self
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn csv_error(err: csv::Error) -> Error {
    let row = err.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        row,
        column: 0,
        message: err.to_string(),
    }
}

fn parse_cell(cell: &str, row: usize, column: usize) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(Error::Parse {
            row,
            column,
            message: format!("non-finite value '{cell}'"),
        }),
        Err(_) => Err(Error::Parse {
            row,
            column,
            message: format!("cannot parse '{cell}' as a number"),
        }),
    }
}

/// Parse a labeled CSV from any reader. Rows and columns in errors are
/// 1-based file line numbers and column positions.
pub fn parse_csv<R: Read>(input: R, options: &CsvOptions) -> Result<LabeledDataset> {
    let mut rdr = reader(input);
    let mut records = rdr.records();
    let mut label_idx = match &options.label_column {
        LabelColumn::Index(i) => Some(*i),
        LabelColumn::Name(_) => None,
    };
    if options.has_header {
        let header = match records.next() {
            Some(r) => r.map_err(csv_error)?,
            None => return Err(Error::Format("missing header row".into())),
        };
        if let LabelColumn::Name(name) = &options.label_column {
            label_idx = header.iter().position(|h| h == name);
            if label_idx.is_none() {
                return Err(Error::Format(format!("label column '{name}' not found in header")));
            }
        }
        if let Some(i) = label_idx {
            if i >= header.len() {
                return Err(Error::Format(format!(
                    "label column {i} out of range for {} columns",
                    header.len()
                )));
            }
        }
    }
    let label_idx =
        label_idx.ok_or_else(|| Error::Format("label column selected by name but the file has no header".into()))?;

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut negative_value: Option<String> = None;
    let mut width: Option<usize> = None;
    for record in records {
        let record = record.map_err(csv_error)?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Parse {
                row,
                column: record.len().min(w) + 1,
                message: format!("expected {w} columns, found {}", record.len()),
            });
        }
        if label_idx >= w {
            return Err(Error::Format(format!(
                "label column {label_idx} out of range for {w} columns"
            )));
        }
        let mut values = Vec::with_capacity(w - 1);
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                continue;
            }
            values.push(parse_cell(cell, row, j + 1)?);
        }
        let raw = &record[label_idx];
        let label = if raw == options.positive_label {
            1
        } else {
            match &negative_value {
                None => {
                    negative_value = Some(raw.to_string());
                    0
                }
                Some(v) if v == raw => 0,
                Some(v) => {
                    return Err(Error::Parse {
                        row,
                        column: label_idx + 1,
                        message: format!("more than two classes: '{}', '{v}' and '{raw}'", options.positive_label),
                    })
                }
            }
        };
        features.push(values);
        labels.push(label);
    }
    let d = width.map_or(0, |w| w.saturating_sub(1));
    LabeledDataset::with_dim(features, labels, d)
}

pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(std::io::BufReader::new(file), options)
}

/// Parse an unlabeled CSV where every column is a feature.
pub fn parse_features_csv<R: Read>(input: R, has_header: bool) -> Result<Vec<Vec<f64>>> {
    let mut rdr = reader(input);
    let mut rows = Vec::new();
    let mut width: Option<usize> = None;
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        if i == 0 && has_header {
            continue;
        }
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let row = record.position().map_or(0, |p| p.line() as usize);
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Parse {
                row,
                column: record.len().min(w) + 1,
                message: format!("expected {w} columns, found {}", record.len()),
            });
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(j, c)| parse_cell(c, row, j + 1))
            .collect::<Result<Vec<_>>>()?;
        rows.push(values);
    }
    Ok(rows)
}

pub fn load_features_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_features_csv(std::io::BufReader::new(file), has_header)
}

/// Write feature rows (and optionally a `label` column holding 0/1).
///
/// `preamble` lines are emitted first, each prefixed with `# `. Values use
/// the shortest representation that round-trips exactly.
pub fn write_vectors_csv<W: Write>(
    mut out: W,
    rows: &[Vec<f64>],
    labels: Option<&[u8]>,
    preamble: &[String],
) -> std::io::Result<()> {
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    let d = rows.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    writeln!(out, "{}", header.join(","))?;
    let mut line = String::new();
    for (i, row) in rows.iter().enumerate() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        if let Some(labels) = labels {
            line.push(',');
            line.push_str(&labels[i].to_string());
        }
        writeln!(out, "{line}")?;
    }
    out.flush()
}

/// Write a labeled dataset with header `f0,..,f{d-1},label`. Reading it back
/// with `CsvOptions::new(LabelColumn::Name("label".into()), "1")` reproduces
/// the dataset exactly.
pub fn write_csv<W: Write>(out: W, data: &LabeledDataset, preamble: &[String]) -> std::io::Result<()> {
    write_vectors_csv(out, data.features(), Some(data.labels()), preamble)
}
