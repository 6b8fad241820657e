//! `BQF1` raw field files.
//!
//! Layout (little-endian): magic `BQF1`, `u32` dimension, `u32` points per
//! axis, `f64` box length, `u32` component count, then each component as a
//! contiguous row-major `f64` array.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{ScalarField, State, VectorField};
use crate::grid::GridSpec;

pub const MAGIC: &[u8; 4] = b"BQF1";

pub fn encode(grid: GridSpec, components: &[&ScalarField]) -> Result<Vec<u8>> {
    for c in components {
        grid.ensure_same(&c.grid)?;
    }
    let mut out = Vec::with_capacity(24 + components.len() * grid.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(grid.dim as u32).to_le_bytes());
    out.extend_from_slice(&(grid.points as u32).to_le_bytes());
    out.extend_from_slice(&grid.length.to_le_bytes());
    out.extend_from_slice(&(components.len() as u32).to_le_bytes());
    for c in components {
        for v in &c.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8]> {
    let end = *pos + n;
    let slice = bytes
        .get(*pos..end)
        .ok_or_else(|| Error::Format(format!("truncated at byte {}", *pos)))?;
    *pos = end;
    Ok(slice)
}

pub fn decode(bytes: &[u8]) -> Result<(GridSpec, Vec<ScalarField>)> {
    let mut pos = 0;
    if take(bytes, &mut pos, 4)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let u32_at = |pos: &mut usize| -> Result<u32> {
        Ok(u32::from_le_bytes(take(bytes, pos, 4)?.try_into().unwrap()))
    };
    let dim = u32_at(&mut pos)? as usize;
    let points = u32_at(&mut pos)? as usize;
    let length = f64::from_le_bytes(take(bytes, &mut pos, 8)?.try_into().unwrap());
    let count = u32_at(&mut pos)? as usize;
    let grid = GridSpec::new(dim, points, length).map_err(|e| Error::Format(e.to_string()))?;
    let mut comps = Vec::with_capacity(count);
    for _ in 0..count {
        let raw = take(bytes, &mut pos, grid.len() * 8)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        comps.push(ScalarField { grid, values });
    }
    if pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes",
            bytes.len() - pos
        )));
    }
    Ok((grid, comps))
}

pub fn write_components(path: &Path, grid: GridSpec, components: &[&ScalarField]) -> Result<()> {
    fs::write(path, encode(grid, components)?)?;
    Ok(())
}

pub fn read_components(path: &Path) -> Result<(GridSpec, Vec<ScalarField>)> {
    decode(&fs::read(path)?)
}

/// Writes `u` components followed by `θ`.
pub fn write_state(path: &Path, state: &State) -> Result<()> {
    let mut comps: Vec<&ScalarField> = state.u.components.iter().collect();
    comps.push(&state.theta);
    write_components(path, state.grid(), &comps)
}

pub fn read_state(path: &Path) -> Result<State> {
    let (grid, mut comps) = read_components(path)?;
    if comps.len() != grid.dim + 1 {
        return Err(Error::Format(format!(
            "state file needs {} components, found {}",
            grid.dim + 1,
            comps.len()
        )));
    }
    let theta = comps.pop().unwrap();
    Ok(State {
        u: VectorField::from_components(comps)?,
        theta,
    })
}

pub fn read_scalar(path: &Path) -> Result<ScalarField> {
    let (_, mut comps) = read_components(path)?;
    match comps.len() {
        1 => Ok(comps.pop().unwrap()),
        n => Err(Error::Format(format!("expected 1 component, found {n}"))),
    }
}

pub fn read_vector(path: &Path) -> Result<VectorField> {
    let (_, comps) = read_components(path)?;
    VectorField::from_components(comps).map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(vals in proptest::collection::vec(proptest::num::f64::ANY, 64 * 3)) {
            let g = GridSpec::new(2, 8, 1.5).unwrap();
            let comps: Vec<ScalarField> = vals.chunks(64).map(|c| ScalarField { grid: g, values: c.to_vec() }).collect();
            let refs: Vec<&ScalarField> = comps.iter().collect();
            let bytes = encode(g, &refs).unwrap();
            let (g2, back) = decode(&bytes).unwrap();
            prop_assert_eq!(g, g2);
            for (a, b) in comps.iter().zip(&back) {
                for (x, y) in a.values.iter().zip(&b.values) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
            prop_assert_eq!(encode(g2, &back.iter().collect::<Vec<_>>()).unwrap(), bytes);
        }
    }

    #[test]
    fn header_layout() {
        let g = GridSpec::new(3, 8, 2.0).unwrap();
        let f = ScalarField::constant(g, 1.0);
        let bytes = encode(g, &[&f]).unwrap();
        assert_eq!(&bytes[0..4], b"BQF1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(bytes[12..20].try_into().unwrap()), 2.0);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 1);
        assert_eq!(bytes.len(), 24 + 512 * 8);
    }

    #[test]
    fn rejects_truncated_and_bad_magic() {
        let g = GridSpec::new(2, 8, 1.0).unwrap();
        let f = ScalarField::zeros(g);
        let mut bytes = encode(g, &[&f]).unwrap();
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(decode(&bytes).is_err());
    }
}
