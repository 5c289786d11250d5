//! CSV and JSON artifacts.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// A rectangular table of preformatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Writes `table` with `\n` line endings; an empty table is header-only.
pub fn emit_csv(table: &Table, path: &Path) -> CliResult<()> {
    if let Some((i, row)) = table.rows.iter().enumerate().find(|(_, r)| r.len() != table.header.len()) {
        return Err(CliError::Config(format!(
            "table for {} is not rectangular: row {i} has {} cells, header has {}",
            path.display(),
            row.len(),
            table.header.len()
        )));
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// `chain,dim_0..dim_{d-1}`, one row per sample.
pub fn samples_table(samples: &[f64], dim: usize) -> Table {
    let mut t = Table::new(std::iter::once("chain".to_string()).chain((0..dim).map(|j| format!("dim_{j}"))));
    for (i, row) in samples.chunks_exact(dim).enumerate() {
        t.push(std::iter::once(i.to_string()).chain(row.iter().map(|v| fmt_f64(*v))).collect());
    }
    t
}

/// Equal-width density histogram over the data range (`bin_left,bin_right,density`).
pub fn histogram(values: &[f64], bins: usize) -> Table {
    let mut t = Table::new(["bin_left", "bin_right", "density"]);
    if values.is_empty() || bins == 0 {
        return t;
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = values.len() as f64;
    for (k, c) in counts.iter().enumerate() {
        let left = lo + k as f64 * width;
        let right = if k + 1 == bins { hi } else { lo + (k + 1) as f64 * width };
        t.push(vec![fmt_f64(left), fmt_f64(right), fmt_f64(*c as f64 / (n * width))]);
    }
    t
}

/// Reads a numeric CSV. A non-numeric first row is a header, and a leading
/// `chain` column is dropped. Returns `(dim, row-major samples)`.
pub fn read_samples_csv(path: &Path) -> CliResult<(usize, Vec<f64>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut records = r.records().peekable();
    let mut skip_first_col = false;
    if let Some(Ok(first)) = records.peek() {
        if first.iter().any(|f| f.trim().parse::<f64>().is_err()) {
            skip_first_col = first.get(0).map(str::trim) == Some("chain");
            records.next();
        }
    }
    let mut dim = None;
    let mut out = Vec::new();
    for (line, rec) in records.enumerate() {
        let rec = rec.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let fields: Vec<&str> = rec.iter().skip(usize::from(skip_first_col)).collect();
        match dim {
            None => dim = Some(fields.len()),
            Some(d) if d != fields.len() => {
                return Err(CliError::Config(format!(
                    "{}: row {line} has {} values, expected {d}",
                    path.display(),
                    fields.len()
                )))
            }
            _ => {}
        }
        for f in fields {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{}: row {line}: `{f}` is not a number", path.display())))?;
            out.push(v);
        }
    }
    match dim {
        Some(d) if d > 0 => Ok((d, out)),
        _ => Err(CliError::Config(format!("{}: no samples", path.display()))),
    }
}
