//! CSV rendering. Numbers carry 17 significant digits with a `.` decimal
//! point, so every double round-trips and output is the same on every
//! platform.

/// Formats like C's `%.17g`.
pub fn number(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').unwrap_or((&sci, "0"));
    let exp: i32 = exp.parse().unwrap_or(0);
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let mantissa = trim_zeros(mantissa.to_string());
        format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn optional(x: Option<f64>) -> String {
    x.map(number).unwrap_or_default()
}

/// Writes a header and rows of unquoted fields; quoting is left to the
/// writer.
pub fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    writer.write_record(header).expect("in-memory write");
    for row in rows {
        writer.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("fields are UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(number(0.1), "0.10000000000000001");
        assert_eq!(number(0.4), "0.40000000000000002");
        assert_eq!(number(1.0), "1");
        assert_eq!(number(0.343), "0.34300000000000003");
        assert_eq!(number(1e-7), "9.9999999999999995e-08");
        assert_eq!(number(123456.5), "123456.5");
        assert_eq!(number(-2.5e20), "-2.5e+20");
        assert_eq!(number(0.0), "0");
    }

    #[test]
    fn round_trips() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, 6.02e23, -0.7] {
            assert_eq!(number(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn quoting() {
        let rows = vec![vec!["P(A=1|B=2,C=1)".into(), "theta1".into()], vec!["1".into(), "2".into()]];
        assert_eq!(table(&["a", "b"], rows), "a,b\n\"P(A=1|B=2,C=1)\",theta1\n1,2\n");
    }
}
