//! Structured text reports: `key = value` lines grouped in `[section]`
//! blocks, matrices as row-major blocks. Doubles are written with 17
//! significant digits so they read back bit-exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{FqheError, Result};

/// `x` with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// `x+yi` with 17 significant digits in each part.
pub fn fmt_complex(z: Complex64) -> String {
    let im = fmt_real(z.im);
    if im.starts_with('-') {
        format!("{}{}i", fmt_real(z.re), im)
    } else {
        format!("{}+{}i", fmt_real(z.re), im)
    }
}

/// Parses `x+yi`, `x-yi`, `x`, `yi` (and `i`, `-i`).
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let bad = || FqheError::InvalidInput(format!("cannot parse complex number {s:?}"));
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(bad());
    }
    let Some(body) = s.strip_suffix('i').or_else(|| s.strip_suffix('j')) else {
        return s.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad());
    };
    // Split at the last sign that is not the leading one or an exponent sign.
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let parse_im = |t: &str| -> Result<f64> {
        match t {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => t.parse::<f64>().map_err(|_| bad()),
        }
    };
    match split {
        Some(k) => {
            let re = body[..k].parse::<f64>().map_err(|_| bad())?;
            Ok(Complex64::new(re, parse_im(&body[k..])?))
        }
        None => Ok(Complex64::new(0.0, parse_im(body)?)),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Item {
    Section(String),
    Value(String, String),
    Matrix(String, DMatrix<Complex64>),
    RealMatrix(String, DMatrix<f64>),
}

/// A report under construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    command: String,
    items: Vec<Item>,
    verdicts: Vec<(String, bool, String)>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self { command: command.to_string(), items: Vec::new(), verdicts: Vec::new() }
    }

    pub fn section(&mut self, name: &str) -> &mut Self {
        self.items.push(Item::Section(name.to_string()));
        self
    }

    pub fn text(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.items.push(Item::Value(key.to_string(), value.to_string()));
        self
    }

    pub fn real(&mut self, key: &str, value: f64) -> &mut Self {
        self.text(key, fmt_real(value))
    }

    pub fn complex(&mut self, key: &str, value: Complex64) -> &mut Self {
        self.text(key, fmt_complex(value))
    }

    pub fn reals(&mut self, key: &str, values: &[f64]) -> &mut Self {
        self.text(key, values.iter().map(|x| fmt_real(*x)).collect::<Vec<_>>().join(" "))
    }

    pub fn matrix(&mut self, name: &str, m: &DMatrix<Complex64>) -> &mut Self {
        self.items.push(Item::Matrix(name.to_string(), m.clone()));
        self
    }

    pub fn real_matrix(&mut self, name: &str, m: &DMatrix<f64>) -> &mut Self {
        self.items.push(Item::RealMatrix(name.to_string(), m.clone()));
        self
    }

    pub fn verdict(&mut self, name: &str, passed: bool, detail: impl ToString) -> &mut Self {
        self.verdicts.push((name.to_string(), passed, detail.to_string()));
        self
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|(_, p, _)| *p)
    }

    /// The report text. The `timing` line is the only field that varies
    /// between identical runs.
    pub fn render(&self, wall: Duration) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# fqhe report");
        let _ = writeln!(out, "command = {}", self.command);
        let started = SystemTime::now().checked_sub(wall).unwrap_or(UNIX_EPOCH);
        let unix = started.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
        let _ = writeln!(out, "timing = started {unix:.3} unix, wall {:.3} s", wall.as_secs_f64());
        for item in &self.items {
            match item {
                Item::Section(name) => {
                    let _ = writeln!(out, "\n[{name}]");
                }
                Item::Value(k, v) => {
                    let _ = writeln!(out, "{k} = {v}");
                }
                Item::Matrix(name, m) => {
                    let _ = writeln!(out, "matrix {name} {}x{}", m.nrows(), m.ncols());
                    for r in 0..m.nrows() {
                        let row: Vec<String> = (0..m.ncols()).map(|c| fmt_complex(m[(r, c)])).collect();
                        let _ = writeln!(out, "  {}", row.join(" "));
                    }
                }
                Item::RealMatrix(name, m) => {
                    let _ = writeln!(out, "matrix {name} {}x{}", m.nrows(), m.ncols());
                    for r in 0..m.nrows() {
                        let row: Vec<String> = (0..m.ncols()).map(|c| fmt_real(m[(r, c)])).collect();
                        let _ = writeln!(out, "  {}", row.join(" "));
                    }
                }
            }
        }
        let _ = writeln!(out, "\n[verdicts]");
        for (name, passed, detail) in &self.verdicts {
            let _ = writeln!(out, "{name} = {} ({detail})", if *passed { "PASS" } else { "FAIL" });
        }
        let _ = writeln!(out, "overall = {}", if self.passed() { "PASS" } else { "FAIL" });
        out
    }
}

/// Scalar fields of a rendered report keyed `section.key` (top-level keys
/// have no prefix), and matrices keyed by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedReport {
    pub values: BTreeMap<String, String>,
    pub matrices: BTreeMap<String, DMatrix<Complex64>>,
}

impl ParsedReport {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn real(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }
}

pub fn parse_report(text: &str) -> Result<ParsedReport> {
    let mut out = ParsedReport::default();
    let mut section = String::new();
    let mut lines = text.lines().peekable();
    while let Some(line) = lines.next() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.to_string();
        } else if let Some(rest) = trimmed.strip_prefix("matrix ") {
            let (name, dims) = rest.rsplit_once(' ').ok_or_else(|| FqheError::InvalidInput(format!("bad matrix header {line:?}")))?;
            let (r, c) = dims.split_once('x').ok_or_else(|| FqheError::InvalidInput(format!("bad matrix header {line:?}")))?;
            let (r, c): (usize, usize) = (r.parse().unwrap_or(0), c.parse().unwrap_or(0));
            let mut entries = Vec::with_capacity(r * c);
            for _ in 0..r {
                let row = lines.next().ok_or_else(|| FqheError::InvalidInput("truncated matrix".into()))?;
                for tok in row.split_whitespace() {
                    entries.push(parse_complex(tok)?);
                }
            }
            if entries.len() != r * c {
                return Err(FqheError::InvalidInput(format!("matrix {name} has {} entries, expected {}", entries.len(), r * c)));
            }
            out.matrices.insert(name.to_string(), DMatrix::from_row_slice(r, c, &entries));
        } else if let Some((k, v)) = trimmed.split_once(" = ") {
            let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
            out.values.insert(key, v.to_string());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn complex_parsing() {
        let c = Complex64::new;
        assert_eq!(parse_complex("0+1i").unwrap(), c(0.0, 1.0));
        assert_eq!(parse_complex("0.3+0.8i").unwrap(), c(0.3, 0.8));
        assert_eq!(parse_complex("-1e-3-2.5E+1i").unwrap(), c(-1e-3, -25.0));
        assert_eq!(parse_complex("2").unwrap(), c(2.0, 0.0));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("1.5i").unwrap(), c(0.0, 1.5));
        assert!(parse_complex("1+").is_err());
        assert!(parse_complex("abc").is_err());
    }

    proptest! {
        #[test]
        fn doubles_round_trip(re in proptest::num::f64::NORMAL | proptest::num::f64::ZERO, im in proptest::num::f64::NORMAL) {
            let z = Complex64::new(re, im);
            prop_assert_eq!(parse_complex(&fmt_complex(z)).unwrap(), z);
            prop_assert_eq!(fmt_real(re).parse::<f64>().unwrap(), re);
        }
    }

    #[test]
    fn render_and_parse() {
        let mut r = Report::new("gram");
        r.section("inputs").complex("tau", Complex64::new(0.0, 1.0)).text("k", 3);
        r.section("results").real("value", 0.1).matrix("gram", &DMatrix::from_element(2, 2, Complex64::new(0.5, -0.25)));
        r.verdict("scalar", true, "ok");
        let text = r.render(Duration::from_millis(5));
        let p = parse_report(&text).unwrap();
        assert_eq!(p.get("command"), Some("gram"));
        assert_eq!(p.get("inputs.k"), Some("3"));
        assert_eq!(p.real("results.value"), Some(0.1));
        assert_eq!(p.matrices["gram"][(1, 0)], Complex64::new(0.5, -0.25));
        assert_eq!(p.get("verdicts.overall"), Some("PASS"));
    }
}
