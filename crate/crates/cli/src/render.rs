//! Output helpers. Text rounds to six significant digits; JSON and CSV
//! carry full precision.

use std::io::Write;

use serde::Serialize;

use crate::error::CliError;

/// `x` with six significant digits, trailing zeros dropped. Plain notation
/// for magnitudes in `[1e-5, 1e6)`, scientific otherwise.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

pub fn opt6(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_else(|| "-".into())
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

/// Left-aligned columns separated by two spaces.
#[derive(Debug, Default)]
pub struct Table {
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            rows: vec![header.into_iter().map(Into::into).collect()],
        }
    }

    pub fn row<S: Into<String>>(&mut self, cells: impl IntoIterator<Item = S>) {
        self.rows.push(cells.into_iter().map(Into::into).collect());
    }

    pub fn write(&self, out: &mut dyn Write, indent: &str) -> std::io::Result<()> {
        let cols = self.rows.iter().map(Vec::len).max().unwrap_or(0);
        let widths: Vec<usize> = (0..cols)
            .map(|c| {
                self.rows
                    .iter()
                    .filter_map(|r| r.get(c))
                    .map(|s| s.chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        for r in &self.rows {
            let mut line = String::from(indent);
            for (i, cell) in r.iter().enumerate() {
                if i + 1 == r.len() {
                    line.push_str(cell);
                } else {
                    line.push_str(&format!("{cell:<w$}  ", w = widths[i]));
                }
            }
            writeln!(out, "{}", line.trim_end())?;
        }
        Ok(())
    }
}

pub fn json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn csv_rows<T: Serialize>(out: &mut dyn Write, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_file<T: Serialize>(path: &std::path::Path, rows: &[T]) -> Result<(), CliError> {
    let mut f = std::fs::File::create(path)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    csv_rows(&mut f, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_digits() {
        assert_eq!(sig6(2046.0), "2046");
        assert_eq!(sig6(0.123456789), "0.123457");
        assert_eq!(sig6(1.28e8), "1.28e8");
        assert_eq!(sig6(999999.7), "1e6");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(-2.5e-7), "-2.5e-7");
        assert_eq!(sig6(1e-5), "0.00001");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(-0.0), "0");
        assert_eq!(sig6(f64::INFINITY), "inf");
    }
}
