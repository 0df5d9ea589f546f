//! Reproducible text output: every float is written with 17 significant digits.

use std::path::Path;

use num_complex::Complex64;
use serde_json::Value;

use crate::error::Result;
use crate::operators::CMatrix;

/// `x` in scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// JSON number carrying exactly the digits of [`fmt_f64`]; non-finite values become strings.
pub fn json_f64(x: f64) -> Value {
    if !x.is_finite() {
        return Value::String(x.to_string());
    }
    let n: serde_json::Number = serde_json::from_str(&fmt_f64(x)).expect("formatted float is valid JSON");
    Value::Number(n)
}

pub fn json_complex(z: Complex64) -> Value {
    Value::Array(vec![json_f64(z.re), json_f64(z.im)])
}

/// Row-major `[[[re, im], …], …]`.
pub fn json_matrix(m: &CMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json_complex(m[(i, j)])).collect()))
            .collect(),
    )
}

/// Writes CSV rows; numeric columns are expected pre-formatted with [`fmt_f64`].
pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
