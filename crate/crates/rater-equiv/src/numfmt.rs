//! Numeric formatting shared by reports and replay: fixed-decimal rounding
//! half away from zero, and two-digit-mantissa scientific notation for
//! p-values.

/// Round `x` to `decimals` places, rounding halves away from zero
/// (0.125 -> 0.13, -0.125 -> -0.13), matching the published tables.
pub(crate) fn round_half_away(x: f64, decimals: u32) -> f64 {
    let factor = 10f64.powi(decimals as i32);
    (x * factor).round() / factor
}

/// Fixed-point display with half-away-from-zero rounding.
pub(crate) fn fmt_fixed(x: f64, decimals: usize) -> String {
    format!(
        "{:.decimals$}",
        round_half_away(x, decimals as u32),
        decimals = decimals
    )
}

/// Scientific notation with a two-digit mantissa, e.g. 2.11e-09. Values
/// at or below zero print as 0.00e+00. A mantissa that rounds up to 10
/// renormalizes into the next exponent.
pub(crate) fn fmt_scientific2(x: f64) -> String {
    if x <= 0.0 || !x.is_finite() {
        return "0.00e+00".to_string();
    }
    let mut exponent = x.log10().floor() as i32;
    let mut mantissa = x / 10f64.powi(exponent);
    // Guard against log/pow edge cases putting the mantissa out of range.
    if mantissa < 1.0 {
        mantissa *= 10.0;
        exponent -= 1;
    } else if mantissa >= 10.0 {
        mantissa /= 10.0;
        exponent += 1;
    }
    if mantissa >= 9.995 {
        mantissa = 1.0;
        exponent += 1;
    }
    format!("{:.2}e{:+03}", mantissa, exponent)
}
