//! Matrix Market coordinate format.
//!
//! Values are written in shortest round-trip scientific notation, so a
//! read → write → read cycle reproduces every stored value bit-for-bit.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{DdError, Result};
use crate::linalg::SparseMat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<SparseMat> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or(DdError::Parse { line: 1, msg: "empty file".into() })?;
    let header = header?;
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(DdError::Parse { line: 1, msg: "missing %%MatrixMarket matrix header".into() });
    }
    if fields[2] != "coordinate" {
        return Err(DdError::Parse { line: 1, msg: format!("unsupported format {}", fields[2]) });
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(DdError::Parse { line: 1, msg: format!("unsupported field {}", fields[3]) });
    }
    let sym = match fields[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        s => return Err(DdError::Parse { line: 1, msg: format!("unsupported symmetry {s}") }),
    };

    let mut dims: Option<(usize, usize, usize)> = None;
    let mut trip = Vec::new();
    for (ln, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let lineno = ln + 1;
        let perr = |msg: &str| DdError::Parse { line: lineno, msg: msg.to_string() };
        let mut it = t.split_whitespace();
        match dims {
            None => {
                let mut next = || -> Result<usize> {
                    it.next()
                        .ok_or_else(|| perr("short size line"))?
                        .parse()
                        .map_err(|_| perr("bad size"))
                };
                dims = Some((next()?, next()?, next()?));
                trip.reserve(dims.unwrap().2);
            }
            Some((nr, nc, _)) => {
                let i: usize = it.next().ok_or_else(|| perr("missing row"))?.parse().map_err(|_| perr("bad row"))?;
                let j: usize = it.next().ok_or_else(|| perr("missing col"))?.parse().map_err(|_| perr("bad col"))?;
                let v: f64 = it.next().ok_or_else(|| perr("missing value"))?.parse().map_err(|_| perr("bad value"))?;
                if i == 0 || j == 0 || i > nr || j > nc {
                    return Err(perr("index out of range"));
                }
                trip.push((i - 1, j - 1, v));
                if sym == Symmetry::Symmetric && i != j {
                    trip.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (nr, nc, nnz) = dims.ok_or(DdError::Parse { line: 0, msg: "missing size line".into() })?;
    let expected = match sym {
        Symmetry::General => nnz,
        Symmetry::Symmetric => trip.iter().filter(|t| t.0 >= t.1).count(),
    };
    if expected != nnz {
        return Err(DdError::Parse { line: 0, msg: format!("expected {nnz} entries, found {expected}") });
    }
    SparseMat::from_triplets(nr, nc, &trip)
}

pub fn write_matrix_market<W: Write>(m: &SparseMat, mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (i, j, v) in m.triplets() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

pub fn read_matrix_market_file(path: impl AsRef<Path>) -> Result<SparseMat> {
    let f = std::fs::File::open(path)?;
    read_matrix_market(std::io::BufReader::new(f))
}

pub fn write_matrix_market_file(m: &SparseMat, path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_matrix_market(m, &mut w)?;
    w.flush()?;
    Ok(())
}
