//! Plain-text coordinate format.
//!
//! ```text
//! # shape 2 2
//! 1 2 2.0
//! 2 1 3.0
//! ```
//!
//! One known entry per line: 1-based indices then the value. The first
//! `# shape` line fixes the extents; every other `#` line is a comment.
//! Gzip-compressed files are detected by their magic bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::tensor::{Coord, Shape, SparseTensor};

/// Opens a file for buffered reading, decompressing gzip transparently.
pub fn open_text(path: &Path) -> Result<Box<dyn BufRead>> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic).map_err(|e| Error::io(path, e))?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(GzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

pub fn read_coo(path: &Path) -> Result<SparseTensor> {
    parse_coo(open_text(path)?, &path.display().to_string())
}

/// Parses COO text; `origin` names the source in error messages.
pub fn parse_coo(reader: impl BufRead, origin: &str) -> Result<SparseTensor> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut shape: Option<Shape> = None;
    let mut entries = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let lineno = n + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let mut words = comment.split_whitespace();
            if shape.is_none() && words.next() == Some("shape") {
                let extents = words
                    .map(|w| w.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| parse_err(lineno, format!("bad shape extent: {e}")))?;
                shape = Some(Shape::new(extents).map_err(|e| parse_err(lineno, e.to_string()))?);
            }
            continue;
        }
        let shape = shape
            .as_ref()
            .ok_or_else(|| parse_err(lineno, "entry before the '# shape' header".into()))?;
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != shape.ndim() + 1 {
            return Err(parse_err(
                lineno,
                format!("expected {} fields, found {}", shape.ndim() + 1, fields.len()),
            ));
        }
        let mut indices = Vec::with_capacity(shape.ndim());
        for (j, f) in fields[..shape.ndim()].iter().enumerate() {
            let a = f
                .parse::<usize>()
                .map_err(|_| parse_err(lineno, format!("index {} is not a positive integer: {f:?}", j + 1)))?;
            indices.push(a);
        }
        let value_field = fields[shape.ndim()];
        let value = value_field
            .parse::<f64>()
            .map_err(|_| parse_err(lineno, format!("value is not a number: {value_field:?}")))?;
        let coord = Coord(indices);
        if !shape.contains(&coord) {
            return Err(parse_err(lineno, format!("coordinate {coord} outside shape {shape}")));
        }
        entries.push((coord, value));
    }
    let shape = shape.ok_or_else(|| parse_err(0, "missing '# shape' header".into()))?;
    SparseTensor::from_entries(shape, entries)
}

/// Writes `t` in COO text form; values use Rust's shortest round-trip
/// formatting so that reading them back is exact.
pub fn write_coo(t: &SparseTensor, mut out: impl Write) -> std::io::Result<()> {
    let extents: Vec<String> = t.shape().extents().iter().map(|n| n.to_string()).collect();
    writeln!(out, "# shape {}", extents.join(" "))?;
    for (coord, value) in t.iter() {
        for a in &coord.0 {
            write!(out, "{a} ")?;
        }
        writeln!(out, "{value:?}")?;
    }
    Ok(())
}

pub fn save_coo(t: &SparseTensor, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_coo(t, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
