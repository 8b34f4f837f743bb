//! Field snapshots: one line of JSON header followed by little-endian `f64`
//! arrays, one per named field, each holding the interior cells with x
//! varying fastest.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{Field, Shape};

pub const FORMAT: &str = "thinlayer-snapshot";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("field `{name}` has shape {got:?}, header says {expected:?}")]
    Shape {
        name: String,
        got: Shape,
        expected: Shape,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format: String,
    pub version: u32,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub time: f64,
    /// Absent for planar snapshots.
    pub eps: Option<f64>,
    pub fields: Vec<String>,
}

impl SnapshotHeader {
    pub fn new(shape: Shape, time: f64, eps: Option<f64>, fields: Vec<String>) -> Self {
        Self {
            format: FORMAT.to_string(),
            version: VERSION,
            nx: shape.nx,
            ny: shape.ny,
            nz: shape.nz,
            time,
            eps,
            fields,
        }
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.nx, self.ny, self.nz)
    }
}

pub fn write_snapshot<W: Write>(
    mut out: W,
    header: &SnapshotHeader,
    fields: &[&Field],
) -> Result<(), SnapshotError> {
    if fields.len() != header.fields.len() {
        return Err(SnapshotError::Header(format!(
            "{} names for {} fields",
            header.fields.len(),
            fields.len()
        )));
    }
    let expected = header.shape();
    for (f, name) in fields.iter().zip(&header.fields) {
        if f.shape() != expected {
            return Err(SnapshotError::Shape {
                name: name.clone(),
                got: f.shape(),
                expected,
            });
        }
    }
    let line = serde_json::to_string(header).map_err(|e| SnapshotError::Header(e.to_string()))?;
    out.write_all(line.as_bytes())?;
    out.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(expected.cells() * 8);
    for f in fields {
        buf.clear();
        for v in f.interior_values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_snapshot<R: BufRead>(mut input: R) -> Result<(SnapshotHeader, Vec<Field>), SnapshotError> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    let header: SnapshotHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| SnapshotError::Header(e.to_string()))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(SnapshotError::Header(format!(
            "unsupported format {} v{}",
            header.format, header.version
        )));
    }
    let s = header.shape();
    let mut fields = Vec::with_capacity(header.fields.len());
    let mut bytes = vec![0u8; s.cells() * 8];
    for _ in &header.fields {
        input.read_exact(&mut bytes)?;
        let mut vals = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        fields.push(Field::from_fn(s, |_, _, _| vals.next().unwrap()));
    }
    Ok((header, fields))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let s = Shape::new(3, 2, 2);
        let a = Field::from_fn(s, |i, j, k| (i + 3 * j + 6 * k) as f64 * 0.5);
        let b = Field::constant(s, -1.25);
        let h = SnapshotHeader::new(s, 0.125, Some(0.1), vec!["rho".into(), "theta".into()]);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &h, &[&a, &b]).unwrap();
        let first_line = buf.split(|c| *c == b'\n').next().unwrap();
        assert!(serde_json::from_slice::<serde_json::Value>(first_line).is_ok());
        assert_eq!(buf.len(), first_line.len() + 1 + 2 * 12 * 8);
        let (h2, f) = read_snapshot(io::Cursor::new(buf)).unwrap();
        assert_eq!(h2, h);
        assert_eq!(f[0].interior_values().collect::<Vec<_>>(), a.interior_values().collect::<Vec<_>>());
        assert_eq!(f[1].get(2, 1, 1), -1.25);
    }

    #[test]
    fn garbage_header_is_reported() {
        let err = read_snapshot(io::Cursor::new(b"not json\n".to_vec())).unwrap_err();
        assert!(matches!(err, SnapshotError::Header(_)));
    }
}
