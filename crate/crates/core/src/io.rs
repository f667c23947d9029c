//! Number formatting shared by every CSV writer.

/// Scientific notation with 9 significant digits, e.g. `1.20000000e2`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.8e}")
}

/// Like [`fmt_num`], with `None` written as an empty field.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}
