//! CSV text with `#` comment lines and `%.15g`-style numbers.

/// Formats `x` like C's `%.15g`.
pub fn g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    // Round to 15 significant digits first; the exponent decides the layout.
    let sci = format!("{:.14e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..15).contains(&exp) {
        let decimals = (14 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x))
    } else {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Quotes a field when it contains a separator, quote or newline.
pub fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Default, Clone)]
pub struct CsvDoc {
    text: String,
}

impl CsvDoc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn comment(&mut self, line: impl AsRef<str>) {
        for l in line.as_ref().lines() {
            self.text.push_str("# ");
            self.text.push_str(l);
            self.text.push('\n');
        }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let line: Vec<String> = cells.into_iter().map(|c| field(c.as_ref())).collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(g(1.0), "1");
        assert_eq!(g(0.1), "0.1");
        assert_eq!(g(std::f64::consts::PI), "3.14159265358979");
        assert_eq!(g(1.7724538509055159), "1.77245385090552");
        assert_eq!(g(1e-3), "0.001");
        assert_eq!(g(1.5e-5), "1.5e-05");
        assert_eq!(g(-2.5e20), "-2.5e+20");
        assert_eq!(g(123456789012345.0), "123456789012345");
        assert_eq!(g(1234567890123456.0), "1.23456789012346e+15");
        assert_eq!(g(0.0001), "0.0001");
        assert_eq!(g(0.99999999999999999), "1");
        assert_eq!(g(9.999999999999999e-5), "0.0001");
        assert_eq!(g(f64::NAN), "nan");
    }

    #[test]
    fn fields_with_commas_are_quoted() {
        let mut doc = CsvDoc::new();
        doc.row(["a", "b,c", "say \"hi\""]);
        doc.comment("two\nlines");
        assert_eq!(doc.into_string(), "a,\"b,c\",\"say \"\"hi\"\"\"\n# two\n# lines\n");
    }
}
