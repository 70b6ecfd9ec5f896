//! CSV emission with locale-independent, fixed-width float formatting.
//!
//! Every float is written with 17 significant digits in scientific notation
//! ('.' decimal separator), which round-trips f64 exactly and keeps repeated
//! runs byte-identical. Unavailable values are written as `NaN`.

use std::fmt::Write as _;

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// One CSV line from mixed-format cells.
pub fn line(cells: &[String]) -> String {
    let mut out = String::new();
    for (i, c) in cells.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{c}");
    }
    out.push('\n');
    out
}
