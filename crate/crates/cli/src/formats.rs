//! On-disk matrix formats.
//!
//! * CSV: one row per line, comma-separated real numbers, blank lines
//!   ignored. Written with the shortest decimal that round-trips.
//! * CDM: `b"CDM1"`, then `rows` and `cols` as little-endian `u64`, then
//!   row-major `(re, im)` pairs of little-endian `f64`. Exact.
//! * PGM (P2): plain-text grayscale, used for heatmaps.
//!
//! Readers sniff the CDM magic and otherwise treat the file as CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use convdistill::{Complex, ComplexMatrix, RealMatrix};

use crate::error::{CliError, CliResult};

pub const CDM_MAGIC: &[u8; 4] = b"CDM1";
pub const CDM_HEADER_LEN: usize = 20;

pub fn read_matrix(path: &Path) -> CliResult<ComplexMatrix> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    if bytes.starts_with(CDM_MAGIC) {
        decode_cdm(&bytes).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|_| CliError::Parse {
            path: path.into(),
            line: 0,
            msg: "not UTF-8 text and no CDM header".into(),
        })?;
        parse_csv(text).map_err(|(line, msg)| CliError::Parse {
            path: path.into(),
            line,
            msg,
        })
    }
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Parses CSV text. Errors carry the 1-based line number.
pub fn parse_csv(text: &str) -> Result<ComplexMatrix, (usize, String)> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    let mut last_line = 0;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                let field = field.trim();
                match field.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    Ok(_) => Err((line_no, format!("non-finite value {field:?}"))),
                    Err(_) => Err((line_no, format!("invalid number {field:?}"))),
                }
            })
            .collect::<Result<Vec<f64>, _>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err((line_no, format!("expected {w} fields, found {}", row.len())));
            }
            Some(_) => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err((last_line, "no data rows".into()));
    }
    ComplexMatrix::from_real_rows(&rows).map_err(|e| (last_line, e.to_string()))
}

/// Emits the real parts as CSV; fails if any entry has a nonzero imaginary part.
pub fn format_csv(m: &ComplexMatrix) -> CliResult<String> {
    if m.as_slice().iter().any(|z| z.im != 0.0) {
        return Err(CliError::Format(
            "matrix has imaginary parts; CSV holds reals only, use CDM".into(),
        ));
    }
    let mut out = String::new();
    for r in 0..m.rows() {
        for (c, z) in m.row(r).iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{}", z.re).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn encode_cdm(m: &ComplexMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(CDM_HEADER_LEN + 16 * m.as_slice().len());
    out.extend_from_slice(CDM_MAGIC);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for z in m.as_slice() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn decode_cdm(bytes: &[u8]) -> Result<ComplexMatrix, String> {
    if bytes.len() < CDM_HEADER_LEN || &bytes[..4] != CDM_MAGIC {
        return Err("truncated or missing CDM header".into());
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let (rows, cols) = (word(4), word(12));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(16))
        .ok_or_else(|| format!("dimensions {rows}x{cols} overflow"))?;
    let payload = &bytes[CDM_HEADER_LEN..];
    if payload.len() as u64 != expected {
        return Err(format!(
            "payload is {} bytes, expected {expected} for {rows}x{cols}",
            payload.len()
        ));
    }
    let data = payload
        .chunks_exact(16)
        .map(|c| {
            Complex::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    ComplexMatrix::new(rows as usize, cols as usize, data).map_err(|e| e.to_string())
}

/// Plain PGM with values `round(255·v)` for `v` in `[0, 1]`.
pub fn format_pgm(m: &RealMatrix) -> String {
    let mut out = format!("P2\n{} {}\n255\n", m.cols(), m.rows());
    for r in 0..m.rows() {
        let line: Vec<String> = m
            .row(r)
            .iter()
            .map(|v| ((v.clamp(0.0, 1.0) * 255.0).round() as u8).to_string())
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}
