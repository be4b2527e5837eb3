use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::dataset::{Dataset, FeatureTable};
use crate::cost_model::CostMatrix;
use crate::label::Label;
use crate::{Error, Result};

/// Non-fatal observations made while loading a data set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LoadWarning {
    /// A class in `1..=k` has no samples.
    AbsentClass { class: usize, k: usize, inferred: bool },
}

impl fmt::Display for LoadWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadWarning::AbsentClass {
                class,
                k,
                inferred: true,
            } => write!(
                f,
                "class {class} has no samples (k = {k} inferred from the largest label)"
            ),
            LoadWarning::AbsentClass {
                class,
                k,
                inferred: false,
            } => write!(f, "class {class} has no samples (k = {k})"),
        }
    }
}

fn parse_error(path: &Path, row: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row,
        column,
        message: message.into(),
    }
}

struct RawTable {
    headers: Vec<String>,
    records: Vec<csv::StringRecord>,
}

fn read_raw(path: &Path) -> Result<RawTable> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "missing header row".into(),
        });
    }
    let records = reader.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(RawTable { headers, records })
}

fn parse_feature(path: &Path, row: usize, column: usize, cell: Option<&str>) -> Result<f64> {
    match cell {
        None | Some("") => Err(parse_error(path, row, column, "missing value")),
        Some(s) => match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(parse_error(
                path,
                row,
                column,
                format!("'{s}' is not a finite number"),
            )),
        },
    }
}

fn parse_label(path: &Path, row: usize, column: usize, cell: Option<&str>) -> Result<usize> {
    let s = match cell {
        None | Some("") => return Err(parse_error(path, row, column, "missing label")),
        Some(s) => s,
    };
    let value = s
        .parse::<i64>()
        .ok()
        .or_else(|| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0 && v.abs() < 1e15)
                .map(|v| v as i64)
        })
        .ok_or_else(|| parse_error(path, row, column, format!("label '{s}' is not an integer")))?;
    if value < 1 {
        return Err(parse_error(
            path,
            row,
            column,
            format!("label {value} is not in 1..K (labels are one-based)"),
        ));
    }
    Ok(value as usize)
}

/// Parses every column except `skip` as numeric features.
///
/// Rows and columns in diagnostics are one-based; row 1 is the first record
/// after the header.
fn parse_features(path: &Path, raw: &RawTable, skip: Option<usize>) -> Result<FeatureTable> {
    let names: Vec<String> = raw
        .headers
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != skip)
        .map(|(_, h)| h.clone())
        .collect();
    let mut values = Vec::with_capacity(raw.records.len() * names.len());
    for (r, record) in raw.records.iter().enumerate() {
        if record.len() > raw.headers.len() {
            return Err(parse_error(
                path,
                r + 1,
                raw.headers.len() + 1,
                format!(
                    "record has {} fields but the header has {}",
                    record.len(),
                    raw.headers.len()
                ),
            ));
        }
        for j in (0..raw.headers.len()).filter(|j| Some(*j) != skip) {
            values.push(parse_feature(path, r + 1, j + 1, record.get(j))?);
        }
    }
    FeatureTable::new(names, values)
}

/// Loads a labelled data set from a headed CSV file.
///
/// Every column other than `label_column` is a numeric feature. When `k` is
/// `None` it is inferred as the largest label, and classes without samples
/// are reported as warnings.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    k: Option<usize>,
) -> Result<(Dataset, Vec<LoadWarning>)> {
    let path = path.as_ref();
    let raw = read_raw(path)?;
    let label_idx = raw
        .headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            message: format!("no column named '{label_column}'"),
        })?;
    if raw.records.is_empty() {
        return Err(Error::EmptyData);
    }
    let features = parse_features(path, &raw, Some(label_idx))?;
    let labels = raw
        .records
        .iter()
        .enumerate()
        .map(|(r, rec)| parse_label(path, r + 1, label_idx + 1, rec.get(label_idx)))
        .collect::<Result<Vec<_>>>()?;

    let max_label = labels.iter().copied().max().unwrap_or(1);
    let k_final = match k {
        Some(k) => {
            if let Some((r, &l)) = labels.iter().enumerate().find(|(_, &l)| l > k) {
                return Err(parse_error(
                    path,
                    r + 1,
                    label_idx + 1,
                    format!("label {l} exceeds k = {k}"),
                ));
            }
            k
        }
        None => max_label.max(2),
    };
    let labels: Vec<Label> = labels.into_iter().map(|v| Label::from_index(v - 1)).collect();
    let dataset = Dataset::new(features, label_column, labels, k_final)?;
    let warnings = dataset
        .class_counts()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 0)
        .map(|(i, _)| LoadWarning::AbsentClass {
            class: i + 1,
            k: k_final,
            inferred: k.is_none(),
        })
        .collect();
    Ok((dataset, warnings))
}

/// Loads features only. A column named `drop_column`, if present, is ignored.
pub fn load_features(path: impl AsRef<Path>, drop_column: Option<&str>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let raw = read_raw(path)?;
    let skip = drop_column.and_then(|name| raw.headers.iter().position(|h| h == name));
    parse_features(path, &raw, skip)
}

/// Writes features followed by the label column. Reals use the shortest
/// representation that parses back to the same value.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = dataset.features().names().iter().map(String::as_str).collect();
    header.push(dataset.label_name());
    w.write_record(&header)?;
    for i in 0..dataset.n() {
        let mut rec: Vec<String> = dataset.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(dataset.label(i).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a cost matrix: K lines of K comma-separated values, no header.
pub fn read_cost_matrix(path: impl AsRef<Path>) -> Result<CostMatrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut rows = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, cell)| parse_feature(path, r + 1, c + 1, Some(cell)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    CostMatrix::from_rows(&rows)
}

pub fn cost_matrix_to_csv(cost: &CostMatrix) -> String {
    let mut out = String::new();
    for row in cost.rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_cost_matrix(cost: &CostMatrix, path: impl AsRef<Path>) -> Result<()> {
    File::create(path)?.write_all(cost_matrix_to_csv(cost).as_bytes())?;
    Ok(())
}
