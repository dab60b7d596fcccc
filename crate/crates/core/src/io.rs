//! Number formatting shared by the CSV and JSON writers.

/// Significant digits written for every real number in an artifact.
pub const SIGNIFICANT_DIGITS: i32 = 15;

/// Fixed-point decimal rendering with [`SIGNIFICANT_DIGITS`] significant digits.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return format!("{:.*}", (SIGNIFICANT_DIGITS - 1) as usize, 0.0);
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (SIGNIFICANT_DIGITS - 1 - magnitude).clamp(0, 340) as usize;
    format!("{x:.decimals$}")
}

/// Rounds to [`SIGNIFICANT_DIGITS`] so JSON output matches the CSV precision.
pub fn round_sig(x: f64) -> f64 {
    fmt_num(x).parse().unwrap_or(x)
}
