//! Deterministic artifact writers. CSV cells carry 17 significant digits so
//! values round-trip through text exactly; JSON is pretty-printed with a
//! trailing newline. Reruns with identical inputs produce byte-identical
//! files.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::Result;

/// Render one value for CSV. Finite values use scientific notation with 17
/// significant digits; infinities and NaN get fixed spellings so a dropped
/// sweep point stays visible in the artifact.
pub fn csv_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Write `header` and numeric rows to `path`.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| csv_value(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Serialize `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}
