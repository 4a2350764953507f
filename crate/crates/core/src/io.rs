//! Field persistence.
//!
//! Binary layout, all little-endian: a 32-byte header holding `d: u64`,
//! `N: u64`, `L: f64`, `time: f64`, followed by the `N^d` values as `f64`
//! in row-major order.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::atoms::{Atom, AtomParams};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Point, ScalarField};
use crate::solver::Trajectory;

pub const HEADER_BYTES: usize = 32;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn encode_field(field: &ScalarField, time: f64) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(HEADER_BYTES + 8 * field.len());
    out.extend_from_slice(&(g.dimension() as u64).to_le_bytes());
    out.extend_from_slice(&(g.points() as u64).to_le_bytes());
    out.extend_from_slice(&g.length().to_le_bytes());
    out.extend_from_slice(&time.to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<(ScalarField, f64)> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Malformed(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().expect("8 bytes") };
    let d = u64::from_le_bytes(word(0)) as usize;
    let n = u64::from_le_bytes(word(1)) as usize;
    let l = f64::from_le_bytes(word(2));
    let time = f64::from_le_bytes(word(3));
    let grid = GridSpec::new(d, n, l)?;
    let payload = &bytes[HEADER_BYTES..];
    if payload.len() != 8 * grid.len() {
        return Err(Error::SizeMismatch {
            expected: 8 * grid.len(),
            actual: payload.len(),
        });
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((ScalarField::new(grid, values)?, time))
}

pub fn write_field(path: &Path, field: &ScalarField, time: f64) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, encode_field(field, time)).map_err(io_err(path))
}

pub fn read_field(path: &Path) -> Result<(ScalarField, f64)> {
    decode_field(&fs::read(path).map_err(io_err(path))?)
}

/// Two-column `x,value` table; one-dimensional fields only.
pub fn write_field_csv(path: &Path, field: &ScalarField) -> Result<()> {
    let g = field.grid();
    if g.dimension() != 1 {
        return Err(Error::KindDimension {
            kind: "csv export",
            dimension: g.dimension(),
        });
    }
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(w, "x,value")?;
        for (i, v) in field.values().iter().enumerate() {
            writeln!(w, "{},{}", g.position(i)[0], v)?;
        }
        w.flush()
    };
    write(&mut w).map_err(io_err(path))
}

/// Writes `snapshot_<k>.bin` per snapshot, plus `.csv` copies in d=1.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (k, (t, f)) in traj.snapshots.iter().enumerate() {
        write_field(&dir.join(format!("snapshot_{k:05}.bin")), f, *t)?;
        if f.grid().dimension() == 1 {
            write_field_csv(&dir.join(format!("snapshot_{k:05}.csv")), f)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomMetadata {
    pub r: f64,
    #[serde(with = "crate::atoms::exponent_serde")]
    pub p: f64,
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub omega: f64,
    pub lambda: f64,
    pub center: Point,
}

/// Writes `<stem>.bin` and the `<stem>.json` metadata sidecar.
pub fn write_atom(dir: &Path, stem: &str, atom: &Atom) -> Result<()> {
    write_field(&dir.join(format!("{stem}.bin")), &atom.field, 0.0)?;
    let meta = AtomMetadata {
        r: atom.r,
        p: atom.params.p,
        amplitude: atom.params.amplitude,
        omega: atom.params.omega,
        lambda: atom.lambda,
        center: atom.center,
    };
    let path = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Malformed(e.to_string()))?;
    fs::write(&path, text).map_err(io_err(&path))
}

pub fn read_atom(dir: &Path, stem: &str, params: &AtomParams) -> Result<Atom> {
    let (field, _) = read_field(&dir.join(format!("{stem}.bin")))?;
    let path = dir.join(format!("{stem}.json"));
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let meta: AtomMetadata =
        serde_json::from_str(&text).map_err(|e| Error::Malformed(e.to_string()))?;
    Ok(Atom {
        field,
        r: meta.r,
        center: meta.center,
        params: AtomParams {
            amplitude: meta.amplitude,
            omega: meta.omega,
            p: meta.p,
            ..*params
        },
        lambda: meta.lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let g = GridSpec::new(2, 8, 1.5).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0].sin() - x[1] * 1e-300).unwrap();
        let bytes = encode_field(&f, 0.125);
        assert_eq!(bytes.len(), HEADER_BYTES + 8 * 64);
        assert_eq!(&bytes[0..8], &2u64.to_le_bytes());
        let (back, t) = decode_field(&bytes).unwrap();
        assert_eq!(back, f);
        assert_eq!(t, 0.125);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let g = GridSpec::new(1, 8, 1.0).unwrap();
        let bytes = encode_field(&ScalarField::zeros(g), 0.0);
        assert!(decode_field(&bytes[..bytes.len() - 8]).is_err());
        assert!(decode_field(&bytes[..10]).is_err());
    }

    #[test]
    fn atom_sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new(1, 128, 4.0).unwrap();
        let params = AtomParams {
            p: f64::INFINITY,
            ..Default::default()
        };
        let atom = crate::atoms::build_canonical_atom(&g, 0.5, &params).unwrap();
        write_atom(dir.path(), "a", &atom).unwrap();
        let text = fs::read_to_string(dir.path().join("a.json")).unwrap();
        assert!(text.contains("\"inf\"") && text.contains("\"A\""));
        let back = read_atom(dir.path(), "a", &params).unwrap();
        assert_eq!(back, atom);
    }
}
