//! Fixed-precision number formatting for CSV output.

/// Nine significant digits; plain decimal for exponents in [-5, 9), scientific otherwise.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // Let the formatter do the rounding, then read back the decimal exponent.
    let sci = format!("{x:.8e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..9).contains(&exp) {
        format!("{:.*}", (8 - exp) as usize, x)
    } else {
        sci
    }
}

/// Empty field for absent values.
pub fn sig9_opt(x: Option<f64>) -> String {
    x.map(sig9).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(1.0), "1.00000000");
        assert_eq!(sig9(0.268941421369995), "0.268941421");
        assert_eq!(sig9(0.18393972058572117), "0.183939721");
        assert_eq!(sig9(12.5), "12.5000000");
        assert_eq!(sig9(-0.5), "-0.500000000");
        assert_eq!(sig9(9.9999999999), "10.0000000");
        assert_eq!(sig9(1.5e-7), "1.50000000e-7");
        assert_eq!(sig9(3.0e10), "3.00000000e10");
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9_opt(None), "");
    }
}
