//! Fixed-precision number formatting for reports.

/// Significant digits used in every report.
pub const SIG_DIGITS: usize = 12;

/// `x` rounded to [`SIG_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Shortest decimal text of `x` rounded to [`SIG_DIGITS`] significant digits.
pub fn sig(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        "0".to_string()
    } else {
        format!("{r}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig(2.0), "2");
        assert_eq!(sig(-0.0), "0");
        assert_eq!(sig(123456789.123456789), "123456789.123");
    }
}
