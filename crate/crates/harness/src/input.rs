//! Plain-text sample files: one number per line, `#` comments allowed.

use std::path::Path;

use crate::error::{HarnessError, Result};

pub fn parse_sample(text: &str, path: &Path) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| HarnessError::MalformedInput {
            path: path.to_path_buf(),
            message: format!("line {}: `{line}` is not a number", i + 1),
        })?;
        if !v.is_finite() {
            return Err(HarnessError::MalformedInput {
                path: path.to_path_buf(),
                message: format!("line {}: non-finite value", i + 1),
            });
        }
        values.push(v);
    }
    Ok(values)
}

pub fn read_sample(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_sample(&text, path)
}
