//! Deterministic number formatting for tables, CSV and JSON.

/// `%.12g`-style formatting: 12 significant digits, trailing zeros trimmed,
/// scientific notation outside `[1e-5, 1e12)`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    const DIGITS: i32 = 12;
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mant.to_string()))
    }
}

fn trim(s: String) -> String {
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

/// Rounds to 12 significant digits, for embedding in JSON numbers.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    fmt_num(x).parse().unwrap_or(x)
}

/// Integer order display: exact below `10⁴`, `1e<exp>` otherwise.
pub fn fmt_order(n: f64) -> String {
    if !n.is_finite() {
        return "inf".into();
    }
    if n < 1e4 {
        format!("{}", n as u64)
    } else {
        format!("1e{}", n.log10().floor() as i64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn general_format() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(0.5773502691896258), "0.57735026919");
        assert_eq!(fmt_num(-2.5), "-2.5");
        assert_eq!(fmt_num(1234567.0), "1234567");
        assert_eq!(fmt_num(1.5e-7), "1.5e-7");
        assert_eq!(fmt_num(3.0e15), "3e15");
        assert_eq!(fmt_num(0.0001), "0.0001");
    }

    #[test]
    fn order_format() {
        assert_eq!(fmt_order(75.0), "75");
        assert_eq!(fmt_order(9999.0), "9999");
        assert_eq!(fmt_order(3.6e6), "1e6");
        assert_eq!(fmt_order(2.5e12), "1e12");
    }
}
