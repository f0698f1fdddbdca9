//! Snapshot serialization.
//!
//! Binary layout (all little-endian): magic `PGRN`, version byte `1`,
//! `n_points: u32`, `components: u32`, `spacing: f64`, `time: f64`, then
//! `n_points * components` IEEE-754 doubles, point-major. The reader
//! reconstructs the box length as `spacing * n_points`, which is exact on
//! the dyadic grids every shipped fixture uses.
//!
//! CSV snapshots carry a `time` header comment and one row per point with
//! 18 significant digits, enough for value-exact round trips.
//!
//! All writes go through a temp file in the target directory followed by a
//! rename.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};

pub const MAGIC: &[u8; 4] = b"PGRN";
pub const VERSION: u8 = 1;

/// Atomically writes `bytes` to `path` (temp file + rename).
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        path.file_name()
            .map(|n| n.to_string_lossy())
            .unwrap_or_default(),
        std::process::id()
    ));
    {
        let file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut writer = BufWriter::new(file);
        writer.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        writer.flush().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_binary(field: &Field, path: &Path) -> Result<()> {
    let grid = field.grid();
    let mut bytes = Vec::with_capacity(29 + 8 * field.values().len());
    bytes.extend_from_slice(MAGIC);
    bytes.push(VERSION);
    bytes.extend_from_slice(&(grid.n_points() as u32).to_le_bytes());
    bytes.extend_from_slice(&(grid.components() as u32).to_le_bytes());
    bytes.extend_from_slice(&grid.spacing().to_le_bytes());
    bytes.extend_from_slice(&field.time().to_le_bytes());
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &bytes)
}

pub fn read_binary(path: &Path) -> Result<Field> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 29 {
        return Err(Error::SnapshotFormat("truncated header".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::SnapshotFormat("bad magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::SnapshotFormat(format!(
            "unsupported version {}",
            bytes[4]
        )));
    }
    let n_points = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let components = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let spacing = f64::from_le_bytes(bytes[13..21].try_into().unwrap());
    let time = f64::from_le_bytes(bytes[21..29].try_into().unwrap());
    let expected = 29 + 8 * n_points * components;
    if bytes.len() != expected {
        return Err(Error::SnapshotFormat(format!(
            "expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    let grid = GridSpec::new(n_points, spacing * n_points as f64, components)?;
    let values = bytes[29..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Field::new(grid, time, values)
}

pub fn write_csv(field: &Field, path: &Path) -> Result<()> {
    let grid = field.grid();
    let m = grid.components();
    let mut out = String::new();
    out.push_str(&format!("# time = {:.17e}\n", field.time()));
    out.push('x');
    for c in 0..m {
        out.push_str(&format!(",u{c}"));
    }
    out.push('\n');
    for k in 0..grid.n_points() {
        out.push_str(&format!("{:.17e}", grid.point(k)));
        for v in field.point_values(k) {
            out.push_str(&format!(",{v:.17e}"));
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Reads a CSV snapshot written by [`write_csv`]. The box length is
/// reconstructed from the spacing of the first two rows.
pub fn read_csv(path: &Path) -> Result<Field> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut time = 0.0;
    let mut xs: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# time =") {
            time = rest
                .trim()
                .parse()
                .map_err(|_| Error::SnapshotFormat("bad time header".into()))?;
            continue;
        }
        if line.starts_with('x') || line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let x: f64 = cols
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::SnapshotFormat("bad x column".into()))?;
        let vals: std::result::Result<Vec<f64>, _> = cols.map(|s| s.parse::<f64>()).collect();
        xs.push(x);
        rows.push(vals.map_err(|_| Error::SnapshotFormat("bad value column".into()))?);
    }
    if rows.len() < 8 {
        return Err(Error::SnapshotFormat("too few rows".into()));
    }
    let m = rows[0].len();
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::SnapshotFormat("ragged rows".into()));
    }
    let spacing = xs[1] - xs[0];
    let grid = GridSpec::new(rows.len(), spacing * rows.len() as f64, m)?;
    let values = rows.into_iter().flatten().collect();
    Field::new(grid, time, values)
}
