//! CSV/TSV ingestion and emission.
//!
//! Matrices are rows of '.'-decimal numbers separated by commas or tabs
//! (sniffed from the first data line), with an optional header row of part
//! labels. Covariance files carry a one-line metadata comment
//! `# repr=ALR ref=<k>` / `# repr=CLR` / `# repr=BASIS` ahead of the rows.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::composition::{CompositionMatrix, CountMatrix};
use crate::covariance::{CovMatrix, Representation};
use crate::error::{Error, Result};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn split_line(line: &str, delim: char) -> Vec<String> {
    line.split(delim).map(|f| f.trim().to_string()).collect()
}

fn sniff_delim(line: &str) -> char {
    if line.contains('\t') { '\t' } else { ',' }
}

struct RawTable {
    header: Option<Vec<String>>,
    rows: Vec<Vec<f64>>,
    comments: Vec<String>,
}

fn read_table(path: &Path, has_header: bool) -> Result<RawTable> {
    let content = fs::read_to_string(path)?;
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut comments = Vec::new();
    let mut delim = None;
    let mut want_header = has_header;
    for (lineno, line) in content.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            comments.push(trimmed.trim_start_matches('#').trim().to_string());
            continue;
        }
        let d = *delim.get_or_insert_with(|| sniff_delim(trimmed));
        let fields = split_line(trimmed, d);
        if want_header {
            header = Some(fields);
            want_header = false;
            continue;
        }
        let mut row = Vec::with_capacity(fields.len());
        for (col, f) in fields.iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| {
                parse_err(
                    path,
                    lineno + 1,
                    format!("column {}: bad number {f:?}", col + 1),
                )
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first()
            && row.len() != first.len()
        {
            return Err(parse_err(
                path,
                lineno + 1,
                format!("expected {} fields, got {}", first.len(), row.len()),
            ));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 0, "no data rows"));
    }
    Ok(RawTable {
        header,
        rows,
        comments,
    })
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

/// Read a plain numeric matrix (values and optional label header).
pub fn read_matrix(path: &Path, has_header: bool) -> Result<(DMatrix<f64>, Option<Vec<String>>)> {
    let table = read_table(path, has_header)?;
    Ok((to_matrix(&table.rows), table.header))
}

/// Read a counts file; every entry must be a nonnegative integer.
pub fn read_counts(path: &Path, has_header: bool) -> Result<CountMatrix> {
    let table = read_table(path, has_header)?;
    let n = table.rows.len();
    let d = table.rows[0].len();
    let mut values = DMatrix::zeros(n, d);
    for (i, row) in table.rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
                return Err(parse_err(
                    path,
                    0,
                    format!(
                        "row {}, column {}: {v} is not a nonnegative integer",
                        i + 1,
                        j + 1
                    ),
                ));
            }
            values[(i, j)] = v as u64;
        }
    }
    CountMatrix::new(values, table.header)
}

/// Read a compositions file (rows renormalized within the unit-sum tolerance).
pub fn read_compositions(path: &Path, has_header: bool) -> Result<CompositionMatrix> {
    let (values, header) = read_matrix(path, has_header)?;
    CompositionMatrix::new(values, header)
}

/// Read a vector: every numeric field in the file, row or column layout.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let table = read_table(path, false)?;
    Ok(table.rows.into_iter().flatten().collect())
}

fn format_row(fields: impl Iterator<Item = String>) -> String {
    fields.collect::<Vec<_>>().join(",")
}

/// Write a numeric matrix as CSV with an optional label header.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>, labels: Option<&[String]>) -> Result<()> {
    let mut out = String::new();
    if let Some(l) = labels {
        out.push_str(&format_row(l.iter().cloned()));
        out.push('\n');
    }
    for i in 0..m.nrows() {
        out.push_str(&format_row(m.row(i).iter().map(|v| format!("{v}"))));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn repr_comment(repr: Representation) -> String {
    match repr {
        Representation::Alr { ref_index } => format!("# repr=ALR ref={ref_index}"),
        Representation::Clr => "# repr=CLR".to_string(),
        Representation::Basis => "# repr=BASIS".to_string(),
    }
}

/// Write a covariance matrix with its metadata comment line.
pub fn write_covariance(path: &Path, cov: &CovMatrix) -> Result<()> {
    let mut out = repr_comment(cov.representation());
    out.push('\n');
    if let Some(l) = cov.part_labels() {
        out.push_str(&format_row(l.iter().cloned()));
        out.push('\n');
    }
    for i in 0..cov.dim() {
        out.push_str(&format_row(
            cov.values().row(i).iter().map(|v| format!("{v}")),
        ));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn parse_repr(comment: &str) -> Option<Representation> {
    let fields: Vec<&str> = comment.split_whitespace().collect();
    let repr = fields.iter().find_map(|f| f.strip_prefix("repr="))?;
    match repr {
        "ALR" => {
            let r = fields.iter().find_map(|f| f.strip_prefix("ref="))?;
            Some(Representation::Alr {
                ref_index: r.parse().ok()?,
            })
        }
        "CLR" => Some(Representation::Clr),
        "BASIS" => Some(Representation::Basis),
        _ => None,
    }
}

/// Read a covariance matrix, taking the representation from the metadata
/// comment. A file with a label header is detected by its first data line
/// failing to parse as numbers.
pub fn read_covariance(path: &Path) -> Result<CovMatrix> {
    // Try without a header first; fall back to header mode.
    let table = match read_table(path, false) {
        Ok(t) => t,
        Err(_) => read_table(path, true)?,
    };
    let repr = table
        .comments
        .iter()
        .find_map(|c| parse_repr(c))
        .ok_or_else(|| parse_err(path, 1, "missing `# repr=...` metadata comment"))?;
    CovMatrix::new(to_matrix(&table.rows), repr)?.with_labels(table.header)
}
