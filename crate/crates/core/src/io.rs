//! FLD/1 text format.
//!
//! Line 1 is `FLD/1 ` followed by a JSON header
//! `{"nx", "ny", "x0", "y0", "h", "kind"}` with `kind` either `scalar` or
//! `vector2`. Each following line is one grid row, bottom row first, with
//! space-separated values written to 17 significant digits; `nan` marks an
//! unmasked cell. A `vector2` file holds the `ny` rows of the first
//! component followed by the `ny` rows of the second.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldError, Grid, ScalarField, VectorField};

const MAGIC: &str = "FLD/1";

#[derive(Debug, Error)]
pub enum FieldIoError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("dimension mismatch: expected {expected} values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-numeric token {token:?} on line {line}")]
    NonNumeric { line: usize, token: String },
    #[error("expected a {expected} field, found {found}")]
    KindMismatch { expected: FieldKind, found: FieldKind },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Scalar,
    Vector2,
}

impl std::fmt::Display for FieldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FieldKind::Scalar => "scalar",
            FieldKind::Vector2 => "vector2",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub kind: FieldKind,
}

impl Header {
    fn grid(&self) -> Result<Grid, FieldIoError> {
        Ok(Grid::new(self.x0, self.y0, self.h, self.nx, self.ny)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldData {
    Scalar(ScalarField),
    Vector(VectorField),
}

fn write_header(w: &mut impl Write, grid: &Grid, kind: FieldKind) -> Result<(), FieldIoError> {
    let header = Header { nx: grid.nx, ny: grid.ny, x0: grid.x0, y0: grid.y0, h: grid.h, kind };
    let json = serde_json::to_string(&header).map_err(|e| FieldIoError::MalformedHeader(e.to_string()))?;
    writeln!(w, "{MAGIC} {json}")?;
    Ok(())
}

fn write_rows(w: &mut impl Write, field: &ScalarField) -> Result<(), FieldIoError> {
    let g = field.grid;
    let mut line = String::with_capacity(g.nx * 24);
    for j in 0..g.ny {
        line.clear();
        for i in 0..g.nx {
            if i > 0 {
                line.push(' ');
            }
            match field.get(i, j) {
                Some(v) => {
                    use std::fmt::Write as _;
                    write!(line, "{v:.16e}").expect("string write");
                }
                None => line.push_str("nan"),
            }
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn write_scalar(mut w: impl Write, field: &ScalarField) -> Result<(), FieldIoError> {
    write_header(&mut w, &field.grid, FieldKind::Scalar)?;
    write_rows(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn write_vector(mut w: impl Write, field: &VectorField) -> Result<(), FieldIoError> {
    write_header(&mut w, &field.grid(), FieldKind::Vector2)?;
    write_rows(&mut w, &field.u1)?;
    write_rows(&mut w, &field.u2)?;
    w.flush()?;
    Ok(())
}

fn parse_header(line: &str) -> Result<Header, FieldIoError> {
    let rest =
        line.strip_prefix(MAGIC).ok_or_else(|| FieldIoError::MalformedHeader(format!("missing {MAGIC} prefix")))?;
    let header: Header = serde_json::from_str(rest.trim()).map_err(|e| FieldIoError::MalformedHeader(e.to_string()))?;
    header.grid().map_err(|_| FieldIoError::MalformedHeader("non-positive grid dimensions".into()))?;
    Ok(header)
}

/// Reads a scalar or vector field.
pub fn read_field(r: impl BufRead) -> Result<FieldData, FieldIoError> {
    let mut lines = r.lines();
    let first = lines.next().ok_or_else(|| FieldIoError::MalformedHeader("empty input".into()))??;
    let header = parse_header(&first)?;
    let grid = header.grid()?;
    let blocks = match header.kind {
        FieldKind::Scalar => 1,
        FieldKind::Vector2 => 2,
    };
    let expected = blocks * grid.len();
    let mut values = Vec::with_capacity(expected);
    for (n, line) in lines.enumerate() {
        let line = line?;
        let line_no = n + 2;
        let start = values.len();
        for token in line.split_whitespace() {
            let v = if token.eq_ignore_ascii_case("nan") {
                f64::NAN
            } else {
                token.parse::<f64>().map_err(|_| FieldIoError::NonNumeric { line: line_no, token: token.to_owned() })?
            };
            values.push(v);
        }
        let row_len = values.len() - start;
        if row_len != 0 && row_len != grid.nx {
            return Err(FieldIoError::DimensionMismatch { expected: grid.nx, found: row_len });
        }
    }
    if values.len() != expected {
        return Err(FieldIoError::DimensionMismatch { expected, found: values.len() });
    }
    Ok(match header.kind {
        FieldKind::Scalar => FieldData::Scalar(ScalarField::from_values(grid, values)?),
        FieldKind::Vector2 => {
            let second = values.split_off(grid.len());
            let u1 = ScalarField::from_values(grid, values)?;
            let u2 = ScalarField::from_values(grid, second)?;
            FieldData::Vector(VectorField::new(u1, u2)?)
        }
    })
}

pub fn read_scalar(r: impl BufRead) -> Result<ScalarField, FieldIoError> {
    match read_field(r)? {
        FieldData::Scalar(f) => Ok(f),
        FieldData::Vector(_) => {
            Err(FieldIoError::KindMismatch { expected: FieldKind::Scalar, found: FieldKind::Vector2 })
        }
    }
}

pub fn read_vector(r: impl BufRead) -> Result<VectorField, FieldIoError> {
    match read_field(r)? {
        FieldData::Vector(f) => Ok(f),
        FieldData::Scalar(_) => {
            Err(FieldIoError::KindMismatch { expected: FieldKind::Vector2, found: FieldKind::Scalar })
        }
    }
}

pub fn load_scalar(path: &Path) -> Result<ScalarField, FieldIoError> {
    read_scalar(BufReader::new(File::open(path)?))
}

pub fn load_vector(path: &Path) -> Result<VectorField, FieldIoError> {
    read_vector(BufReader::new(File::open(path)?))
}

pub fn save_scalar(path: &Path, field: &ScalarField) -> Result<(), FieldIoError> {
    write_scalar(BufWriter::new(File::create(path)?), field)
}

pub fn save_vector(path: &Path, field: &VectorField) -> Result<(), FieldIoError> {
    write_vector(BufWriter::new(File::create(path)?), field)
}
