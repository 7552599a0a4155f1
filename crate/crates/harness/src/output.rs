//! CSV persistence of Monte Carlo summaries.

use std::io::Write;
use std::path::Path;

use lcshift::McSummary;

use crate::error::{HarnessError, Result};

pub const HEADER: [&str; 12] = [
    "scheme",
    "m",
    "n",
    "estimator",
    "eta",
    "replications",
    "failures",
    "variance",
    "scaled_mse",
    "coverage",
    "mean_ci_width",
    "efficiency",
];

/// Ten significant digits.
fn float(v: f64) -> String {
    format!("{v:.9e}")
}

fn record(row: &McSummary) -> [String; 12] {
    [
        row.scheme.clone(),
        row.m.to_string(),
        row.n.to_string(),
        row.estimator.clone(),
        row.eta.map(float).unwrap_or_default(),
        row.replications.to_string(),
        row.failures.to_string(),
        float(row.variance),
        float(row.scaled_mse),
        float(row.coverage),
        float(row.mean_ci_width),
        float(row.efficiency),
    ]
}

/// Writes a header line and one line per row, LF-terminated.
pub fn write_csv<W: Write>(rows: &[McSummary], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(HEADER)?;
    for row in rows {
        w.write_record(record(row))?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(rows: &[McSummary]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

pub fn emit_csv(rows: &[McSummary], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(path, to_csv_string(rows)).map_err(|e| HarnessError::io(path, e))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| HarnessError::MalformedCsv(format!("line {line}: bad `{}` value `{raw}`", HEADER[i])))
}

pub fn parse_csv(text: &str) -> Result<Vec<McSummary>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| HarnessError::MalformedCsv(e.to_string()))?
        .clone();
    if header.iter().ne(HEADER) {
        return Err(HarnessError::MalformedCsv(format!(
            "unexpected header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| HarnessError::MalformedCsv(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let eta = match rec.get(4) {
            Some("") => None,
            _ => Some(field(&rec, 4, line)?),
        };
        rows.push(McSummary {
            scheme: field(&rec, 0, line)?,
            m: field(&rec, 1, line)?,
            n: field(&rec, 2, line)?,
            estimator: field(&rec, 3, line)?,
            eta,
            replications: field(&rec, 5, line)?,
            failures: field(&rec, 6, line)?,
            variance: field(&rec, 7, line)?,
            scaled_mse: field(&rec, 8, line)?,
            coverage: field(&rec, 9, line)?,
            mean_ci_width: field(&rec, 10, line)?,
            efficiency: field(&rec, 11, line)?,
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<McSummary>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_csv(&text)
}
