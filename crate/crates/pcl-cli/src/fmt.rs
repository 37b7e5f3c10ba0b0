//! Fixed float formatting for reporting artifacts. Summary CSV and SVG
//! floats go through `g6` (printf %.6g conventions) so repeated runs
//! produce byte-identical files; interchange files (results.csv, model
//! JSON, truth CSV) keep full round-trip precision instead, which the
//! pipeline self-consistency checks rely on.

/// Format with 6 significant digits, %.6g style: fixed notation while the
/// decimal exponent is in [-4, 6), scientific otherwise, trailing zeros
/// trimmed, exponent written with sign and two digits.
pub fn g6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".to_string() } else { "-inf".to_string() };
    }
    // {:.5e} rounds to 6 significant digits and reports the exponent of
    // the rounded value, which is what decides the notation.
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("{:.5e} always contains an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_trailing(mantissa);
        return format!("{}e{}{:02}", mantissa, if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_trailing(&format!("{:.*}", decimals, x))
}

fn trim_trailing(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}
