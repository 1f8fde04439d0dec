//! Locale-free number formatting for CSV output.

/// `printf("%.{sig}g")`: `sig` significant digits, trailing zeros removed,
/// scientific notation outside `1e-4 <= |x| < 10^sig`.
pub fn fmt_g(x: f64, sig: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sig = sig.max(1);
    // Rounding to `sig` digits can carry into the next decade, so take the
    // exponent from the rounded scientific form.
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if exp < -4 || exp >= sig as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV field with 12 significant digits.
pub fn num(x: f64) -> String {
    fmt_g(x, 12)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf() {
        // Expected strings from C printf("%.12g").
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (0.1 + 0.2, "0.3"),
            (1.0 / 3.0, "0.333333333333"),
            (123_456.789, "123456.789"),
            (1e-5, "1e-05"),
            (1.5e-5, "1.5e-05"),
            (0.000_123, "0.000123"),
            (1e12, "1e+12"),
            (999_999_999_999.0, "999999999999"),
            (9_999_999_999_999.0, "1e+13"),
            (0.999_999_999_999_9, "1"),
            (3.104_171_415_810_486_7e-5, "3.10417141581e-05"),
            (1.982_495_371_831_252_4, "1.98249537183"),
            (f64::NAN, "nan"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g(x, 12), want, "{x:e}");
        }
        assert_eq!(fmt_g(2.0 / 3.0, 3), "0.667");
        assert_eq!(fmt_g(1234.0, 2), "1.2e+03");
    }
}
