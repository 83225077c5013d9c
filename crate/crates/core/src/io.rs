//! Shared matrix text format.
//!
//! First line `rows cols`, then one row per line with entries written as
//! `re,im` and separated by single spaces. Values are printed with 17
//! significant digits so that parsing round-trips `f64` exactly.

use crate::error::{CoreError, Result};
use crate::C64;
use ndarray::Array2;
use std::fmt::Write as _;
use std::path::Path;

pub fn format_matrix(m: &Array2<C64>) -> String {
    let (rows, cols) = m.dim();
    let mut out = String::new();
    let _ = writeln!(out, "{rows} {cols}");
    for r in 0..rows {
        for c in 0..cols {
            if c > 0 {
                out.push(' ');
            }
            let z = m[[r, c]];
            let _ = write!(out, "{:.16e},{:.16e}", z.re, z.im);
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<Array2<C64>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| CoreError::Parse("empty matrix file".into()))?;
    let mut dims = header.split_whitespace();
    let rows: usize = dims
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| CoreError::Parse("bad header: expected `rows cols`".into()))?;
    let cols: usize = dims
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| CoreError::Parse("bad header: expected `rows cols`".into()))?;
    let mut m = Array2::zeros((rows, cols));
    for r in 0..rows {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| CoreError::Parse(format!("missing row {r}")))?;
        let mut entries = line.split_whitespace();
        for c in 0..cols {
            let tok = entries.next().ok_or_else(|| {
                CoreError::Parse(format!("line {}: missing entry {}", lineno + 1, c))
            })?;
            let (re, im) = tok.split_once(',').ok_or_else(|| {
                CoreError::Parse(format!("line {}: entry `{tok}` is not `re,im`", lineno + 1))
            })?;
            let re: f64 = re.parse().map_err(|_| {
                CoreError::Parse(format!("line {}: bad real part `{re}`", lineno + 1))
            })?;
            let im: f64 = im.parse().map_err(|_| {
                CoreError::Parse(format!("line {}: bad imaginary part `{im}`", lineno + 1))
            })?;
            m[[r, c]] = C64::new(re, im);
        }
        if entries.next().is_some() {
            return Err(CoreError::Parse(format!(
                "line {}: extra entries beyond {cols} columns",
                lineno + 1
            )));
        }
    }
    Ok(m)
}

pub fn write_matrix(path: &Path, m: &Array2<C64>) -> Result<()> {
    std::fs::write(path, format_matrix(m))?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<Array2<C64>> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix(&text)
}
