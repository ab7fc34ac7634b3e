//! Binary field snapshots and a CSV slice export.
//!
//! Layout (little-endian): the 5 magic bytes `SPSF1`, `n` as `u64`, `L`
//! as `f64`, then `n³` samples as `(re, im)` pairs of `f64`, x-fastest.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;

pub const MAGIC: &[u8; 5] = b"SPSF1";
const HEADER_LEN: usize = 5 + 8 + 8;

pub fn encode(field: &Field) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.n() as u64).to_le_bytes());
    out.extend_from_slice(&g.box_length().to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Field> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Parse(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if &bytes[..5] != MAGIC {
        return Err(Error::Parse("bad magic, expected SPSF1".into()));
    }
    let n = u64::from_le_bytes(bytes[5..13].try_into().unwrap());
    let l = f64::from_le_bytes(bytes[13..21].try_into().unwrap());
    let n = usize::try_from(n).map_err(|_| Error::Parse(format!("grid size {n} out of range")))?;
    let grid = Grid::new(n, l).map_err(|e| Error::Parse(format!("invalid header: {e}")))?;
    let expected = HEADER_LEN + 16 * grid.len();
    if bytes.len() != expected {
        return Err(Error::Parse(format!(
            "expected {expected} bytes for n = {n}, found {}",
            bytes.len()
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Field::from_values(&grid, values).map_err(|e| Error::Parse(e.to_string()))
}

/// Writes atomically: a sibling temporary file is renamed into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = BufWriter::new(fs::File::create(&tmp)?);
        f.write_all(bytes)?;
        f.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_snapshot(path: &Path, field: &Field) -> Result<()> {
    write_atomic(path, &encode(field))
}

pub fn read_snapshot(path: &Path) -> Result<Field> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

/// Which axis the slice line runs along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// CSV of `|u|` along a line through the box center parallel to `axis`.
pub fn slice_csv(field: &Field, axis: Axis) -> String {
    let g = field.grid();
    let n = g.n();
    let c = n / 2;
    let mut s = String::from("coordinate,abs_u\n");
    for j in 0..n {
        let idx = match axis {
            Axis::X => g.flatten(j, c, c),
            Axis::Y => g.flatten(c, j, c),
            Axis::Z => g.flatten(c, c, j),
        };
        s.push_str(&format!(
            "{:.17e},{:.17e}\n",
            g.coordinate(j),
            field.values()[idx].norm()
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_and_corrupt_inputs_are_rejected() {
        let g = Grid::new(8, 4.0).unwrap();
        let f = Field::random_smooth(&g, 1.0, 1);
        let bytes = encode(&f);
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(Error::Parse(_))));
        assert!(matches!(decode(&bytes[..10]), Err(Error::Parse(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Parse(_))));
        let mut bad_n = bytes.clone();
        bad_n[5..13].copy_from_slice(&10u64.to_le_bytes());
        assert!(matches!(decode(&bad_n), Err(Error::Parse(_))));
        let back = decode(&bytes).unwrap();
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn header_layout() {
        let g = Grid::new(8, 2.5).unwrap();
        let bytes = encode(&Field::zeros(&g));
        assert_eq!(&bytes[..5], b"SPSF1");
        assert_eq!(u64::from_le_bytes(bytes[5..13].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(bytes[13..21].try_into().unwrap()), 2.5);
        assert_eq!(bytes.len(), 21 + 16 * 512);
    }

    #[test]
    fn slice_has_one_row_per_point() {
        let g = Grid::new(8, 4.0).unwrap();
        let f = Field::gaussian(&g, 1.0, 1.0, [0.0; 3]);
        let csv = slice_csv(&f, Axis::Z);
        assert_eq!(csv.lines().count(), 9);
        assert!(csv.lines().nth(5).unwrap().starts_with("0.0"));
    }
}
