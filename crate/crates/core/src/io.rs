//! Readers and writers for the on-disk formats: single-column series CSV,
//! image CSV, binary/ASCII PGM, and JSON documents.
//!
//! Parse errors carry the byte offset of the offending token.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::model::ObservationSequence;
use crate::preprocessing::ImageGrid;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: byte offset {offset}: {message}", path.display())]
    Parse {
        path: PathBuf,
        offset: usize,
        message: String,
    },
}

impl InputError {
    fn parse(path: &Path, offset: usize, message: impl Into<String>) -> Self {
        InputError::Parse {
            path: path.to_path_buf(),
            offset,
            message: message.into(),
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, InputError> {
    fs::read(path).map_err(|source| InputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn utf8<'a>(path: &Path, bytes: &'a [u8]) -> Result<&'a str, InputError> {
    std::str::from_utf8(bytes).map_err(|e| InputError::parse(path, e.valid_up_to(), "invalid UTF-8"))
}

/// Comma-separated fields of every nonblank line, with their byte offsets.
fn csv_fields(text: &str) -> Vec<Vec<(usize, &str)>> {
    let mut rows = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        let body = line.trim_end_matches(['\n', '\r']);
        if body.trim().is_empty() || body.trim_start().starts_with('#') {
            continue;
        }
        let mut fields = Vec::new();
        let mut pos = start;
        for field in body.split(',') {
            let lead = field.len() - field.trim_start().len();
            fields.push((pos + lead, field.trim()));
            pos += field.len() + 1;
        }
        rows.push(fields);
    }
    rows
}

fn parse_real(path: &Path, offset: usize, field: &str) -> Result<f64, InputError> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(InputError::parse(path, offset, format!("non-finite value {v}"))),
        Err(_) => Err(InputError::parse(
            path,
            offset,
            format!("cannot parse '{field}' as a number"),
        )),
    }
}

/// Parses a one-value-per-line series. A non-numeric first line is treated
/// as a header.
pub fn parse_series(path: &Path, text: &str) -> Result<Vec<f64>, InputError> {
    let rows = csv_fields(text);
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        if row.len() != 1 {
            return Err(InputError::parse(path, row[1].0, "expected a single column"));
        }
        let (off, field) = row[0];
        if i == 0 && field.parse::<f64>().is_err() {
            continue;
        }
        out.push(parse_real(path, off, field)?);
    }
    if out.is_empty() {
        return Err(InputError::parse(path, text.len(), "series is empty"));
    }
    Ok(out)
}

pub fn read_series(path: &Path) -> Result<Vec<f64>, InputError> {
    let bytes = read_bytes(path)?;
    parse_series(path, utf8(path, &bytes)?)
}

/// Reads a series as discrete symbols: every value must be a nonnegative integer.
pub fn read_symbols(path: &Path) -> Result<Vec<usize>, InputError> {
    let bytes = read_bytes(path)?;
    let text = utf8(path, &bytes)?;
    let rows = csv_fields(text);
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let (off, field) = row[0];
        if row.len() != 1 {
            return Err(InputError::parse(path, row[1].0, "expected a single column"));
        }
        match field.parse::<usize>() {
            Ok(k) => out.push(k),
            Err(_) if i == 0 && field.parse::<f64>().is_err() => continue,
            Err(_) => {
                return Err(InputError::parse(
                    path,
                    off,
                    format!("'{field}' is not a nonnegative integer symbol"),
                ))
            }
        }
    }
    if out.is_empty() {
        return Err(InputError::parse(path, text.len(), "series is empty"));
    }
    Ok(out)
}

/// One value per line, shortest round-trip formatting.
pub fn series_to_csv(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 20);
    for v in values {
        s.push_str(&format!("{v}\n"));
    }
    s
}

pub fn sequence_to_csv(seq: &ObservationSequence) -> String {
    match seq {
        ObservationSequence::Continuous(v) => series_to_csv(v),
        ObservationSequence::Discrete(v) => v.iter().map(|k| format!("{k}\n")).collect(),
    }
}

pub fn parse_image_csv(path: &Path, text: &str) -> Result<ImageGrid, InputError> {
    let rows = csv_fields(text);
    let Some(first) = rows.first() else {
        return Err(InputError::parse(path, 0, "image has no rows"));
    };
    let cols = first.len();
    let mut values = Vec::with_capacity(rows.len() * cols);
    for row in &rows {
        if row.len() != cols {
            return Err(InputError::parse(
                path,
                row[0].0,
                format!("row has {} columns, expected {cols}", row.len()),
            ));
        }
        for &(off, field) in row {
            values.push(parse_real(path, off, field)?);
        }
    }
    ImageGrid::new(rows.len(), cols, values).map_err(|e| InputError::parse(path, 0, e.to_string()))
}

/// Parses binary (`P5`, 8- or 16-bit big-endian) or ASCII (`P2`) PGM.
pub fn parse_pgm(path: &Path, bytes: &[u8]) -> Result<ImageGrid, InputError> {
    let mut pos = 0usize;

    fn skip_ws(bytes: &[u8], pos: &mut usize) {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            } else {
                return;
            }
        }
    }

    let read_uint = |pos: &mut usize, what: &str| -> Result<usize, InputError> {
        skip_ws(bytes, pos);
        let start = *pos;
        while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
            *pos += 1;
        }
        if start == *pos {
            return Err(InputError::parse(path, start, format!("expected {what}")));
        }
        std::str::from_utf8(&bytes[start..*pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| InputError::parse(path, start, format!("{what} out of range")))
    };

    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'5' || bytes[1] == b'2') {
        return Err(InputError::parse(path, 0, "not a PGM file (expected P5 or P2 magic)"));
    }
    let binary = bytes[1] == b'5';
    pos += 2;
    let width = read_uint(&mut pos, "width")?;
    let height = read_uint(&mut pos, "height")?;
    let maxval_at = pos;
    let maxval = read_uint(&mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(InputError::parse(path, 2, "zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(InputError::parse(
            path,
            maxval_at,
            format!("maxval {maxval} outside 1..=65535"),
        ));
    }
    let n = width * height;
    let mut values = Vec::with_capacity(n);
    if binary {
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(InputError::parse(path, pos, "expected whitespace after header"));
        }
        pos += 1;
        let bps = if maxval < 256 { 1 } else { 2 };
        let need = n * bps;
        if bytes.len() - pos < need {
            return Err(InputError::parse(
                path,
                bytes.len(),
                format!("truncated pixel data: need {need} bytes, found {}", bytes.len() - pos),
            ));
        }
        for i in 0..n {
            let off = pos + i * bps;
            let v = if bps == 1 {
                u16::from(bytes[off])
            } else {
                u16::from_be_bytes([bytes[off], bytes[off + 1]])
            };
            values.push(f64::from(v));
        }
    } else {
        for _ in 0..n {
            skip_ws(bytes, &mut pos);
            let at = pos;
            let v = read_uint(&mut pos, "pixel value")?;
            if v > maxval {
                return Err(InputError::parse(
                    path,
                    at,
                    format!("pixel {v} exceeds maxval {maxval}"),
                ));
            }
            values.push(v as f64);
        }
    }
    ImageGrid::new(height, width, values).map_err(|e| InputError::parse(path, 0, e.to_string()))
}

/// Reads a PGM (by magic number) or CSV image.
pub fn read_image(path: &Path) -> Result<ImageGrid, InputError> {
    let bytes = read_bytes(path)?;
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        parse_pgm(path, &bytes)
    } else {
        parse_image_csv(path, utf8(path, &bytes)?)
    }
}

/// Writes via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, InputError> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| {
        // serde_json reports line/column; convert to a byte offset
        let offset = utf8(path, &bytes)
            .ok()
            .map(|t| {
                t.split_inclusive('\n')
                    .take(e.line().saturating_sub(1))
                    .map(str::len)
                    .sum::<usize>()
                    + e.column().saturating_sub(1)
            })
            .unwrap_or(0);
        InputError::parse(path, offset, e.to_string())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn series_parsing() {
        assert_eq!(parse_series(p(), "1\n2.5\n\n-3e2\n").unwrap(), vec![1.0, 2.5, -300.0]);
        assert_eq!(parse_series(p(), "value\n1\n").unwrap(), vec![1.0]);
        match parse_series(p(), "1\n2\nabc\n").unwrap_err() {
            InputError::Parse { offset, .. } => assert_eq!(offset, 4),
            e => panic!("{e}"),
        }
        assert!(parse_series(p(), "1,2\n").is_err());
        assert!(parse_series(p(), "").is_err());
        assert!(parse_series(p(), "1\nNaN\n").is_err());
    }

    #[test]
    fn series_roundtrip_is_bit_exact() {
        let v = vec![0.1, -1.0 / 3.0, 1e-300, 123456789.12345679, std::f64::consts::PI];
        assert_eq!(parse_series(p(), &series_to_csv(&v)).unwrap(), v);
    }

    #[test]
    fn image_csv() {
        let g = parse_image_csv(p(), "1, 2,3\n4,5,6\n").unwrap();
        assert_eq!((g.rows(), g.cols()), (2, 3));
        assert_eq!(g.get(1, 0), 4.0);
        match parse_image_csv(p(), "1,2\n3\n").unwrap_err() {
            InputError::Parse { offset, .. } => assert_eq!(offset, 4),
            e => panic!("{e}"),
        }
        match parse_image_csv(p(), "1,x\n").unwrap_err() {
            InputError::Parse { offset, .. } => assert_eq!(offset, 2),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn pgm_formats() {
        let mut b = b"P5\n# comment\n3 2\n255\n".to_vec();
        b.extend([0u8, 10, 20, 30, 40, 255]);
        let g = parse_pgm(p(), &b).unwrap();
        assert_eq!((g.rows(), g.cols()), (2, 3));
        assert_eq!(g.get(1, 2), 255.0);

        let mut b16 = b"P5 2 1 65535\n".to_vec();
        b16.extend([0x01, 0x00, 0xff, 0xff]);
        let g = parse_pgm(p(), &b16).unwrap();
        assert_eq!(g.get(0, 0), 256.0);
        assert_eq!(g.get(0, 1), 65535.0);

        let g = parse_pgm(p(), b"P2\n2 2\n15\n0 5\n10 15\n").unwrap();
        assert_eq!(g.get(1, 1), 15.0);

        match parse_pgm(p(), b"P5\n4 4\n255\n\x01\x02").unwrap_err() {
            InputError::Parse { message, .. } => assert!(message.contains("truncated")),
            e => panic!("{e}"),
        }
        assert!(parse_pgm(p(), b"P6\n1 1\n255\n\x00").is_err());
        match parse_pgm(p(), b"P2\n1 1\n9\n12\n").unwrap_err() {
            InputError::Parse { offset, .. } => assert_eq!(offset, 9),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_series(Path::new("/nonexistent/x.csv")),
            Err(InputError::Io { .. })
        ));
    }
}
