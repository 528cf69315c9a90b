//! Deterministic text formatting shared by every CSV writer.

/// Format a value with 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0.00000000000e0"
        return "0.00000000000e0".to_string();
    }
    format!("{x:.11e}")
}

/// Comma-separated row terminated by LF.
pub fn csv_row(values: &[f64]) -> String {
    let mut row = values.iter().map(|&v| fmt_num(v)).collect::<Vec<_>>().join(",");
    row.push('\n');
    row
}

/// Filesystem-friendly token for a parameter value (`0.177` -> `0p177`).
pub fn slug_value(x: f64) -> String {
    let s = format!("{x}");
    s.replace('-', "m").replace('.', "p")
}
