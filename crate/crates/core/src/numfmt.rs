//! Decimal text formatting for CSV output.

/// Formats `x` with at most 12 significant digits, trailing zeros trimmed.
///
/// Uses plain notation for decimal exponents in `[-5, 15)` and scientific
/// notation otherwise. Parsing the output and formatting again yields the
/// same text, which is what makes CSV round trips stable.
pub fn fmt_sig12(x: f64) -> String {
    if x.is_nan() {
        return String::new();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let rounded: f64 = sci.parse().expect("valid float text");
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, rounded))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".into()
    } else {
        t.to_string()
    }
}
