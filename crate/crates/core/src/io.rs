//! `.gkwf` field files: one UTF-8 JSON header line with keys `m`, `N`, `L`,
//! `n`, then raw little-endian `f64` values, node-major (row-major over the
//! grid) then component.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, PeriodicGrid};

pub const FIELD_EXTENSION: &str = "gkwf";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    m: usize,
    #[serde(rename = "N")]
    points: Vec<usize>,
    #[serde(rename = "L")]
    lengths: Vec<f64>,
    n: usize,
}

pub fn write_field<W: Write>(mut out: W, field: &Field) -> Result<()> {
    let grid = field.grid();
    let header = Header {
        m: grid.dim(),
        points: grid.points().to_vec(),
        lengths: grid.lengths().to_vec(),
        n: field.n(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    let mut bytes = Vec::with_capacity(field.data().len() * 8);
    for v in field.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

pub fn read_field<R: Read>(input: R) -> Result<Field> {
    let mut reader = BufReader::new(input);
    let mut line = Vec::new();
    reader.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Format("missing header line".into()));
    }
    let header: Header = serde_json::from_slice(&line[..line.len() - 1])?;
    if header.m != header.points.len() {
        return Err(Error::Format(format!(
            "header m = {} but N has {} entries",
            header.m,
            header.points.len()
        )));
    }
    let grid = PeriodicGrid::new(header.points, header.lengths)?;
    let count = header.n * grid.node_count();
    let mut bytes = Vec::with_capacity(count * 8);
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            count * 8,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Field::from_vec(&grid, header.n, data)
}

pub fn save_field(path: &Path, field: &Field) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_field(std::io::BufWriter::new(file), field)
}

pub fn load_field(path: &Path) -> Result<Field> {
    read_field(std::fs::File::open(path)?)
}
