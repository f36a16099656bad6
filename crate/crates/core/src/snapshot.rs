//! Binary state snapshots.
//!
//! Layout (little-endian): `"PENS"`, u8 version = 1, u8 d, u16 reserved = 0,
//! u64 N, f64 L, f64 t, then ρ, u₁..u_d, v₁..v_d as f64 arrays in grid order.

use std::fs;
use std::path::Path;

use crate::error::{PensError, Result};
use crate::field::RealField;
use crate::grid::Grid;
use crate::state::SimState;

pub const MAGIC: [u8; 4] = *b"PENS";
pub const VERSION: u8 = 1;
const HEADER: usize = 32;

pub fn encode_snapshot(state: &SimState) -> Vec<u8> {
    let g = state.grid();
    let mut out = Vec::with_capacity(HEADER + 8 * (1 + 2 * g.dim()) * g.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(g.dim() as u8);
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(g.n() as u64).to_le_bytes());
    out.extend_from_slice(&g.length().to_le_bytes());
    out.extend_from_slice(&state.t.to_le_bytes());
    for f in [&state.rho, &state.u, &state.v] {
        for x in f.values() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<SimState> {
    if bytes.len() < HEADER {
        return Err(PensError::Truncated { found: bytes.len(), expected: HEADER });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(PensError::BadMagic { found: magic });
    }
    if bytes[4] != VERSION {
        return Err(PensError::UnsupportedVersion(bytes[4]));
    }
    let d = bytes[5] as usize;
    let word = |at: usize| -> [u8; 8] { bytes[at..at + 8].try_into().unwrap() };
    let n = u64::from_le_bytes(word(8));
    let length = f64::from_le_bytes(word(16));
    let t = f64::from_le_bytes(word(24));
    let n = usize::try_from(n).map_err(|_| PensError::DimensionMismatch(format!("N = {n} too large")))?;
    let grid = Grid::new(d, n, length).map_err(|e| PensError::DimensionMismatch(e.to_string()))?;
    let cells = grid.len();
    let expected = HEADER + 8 * (1 + 2 * d) * cells;
    if bytes.len() < expected {
        return Err(PensError::Truncated { found: bytes.len(), expected });
    }
    if bytes.len() > expected {
        return Err(PensError::DimensionMismatch(format!(
            "{} trailing bytes after a d={d}, N={n} payload",
            bytes.len() - expected
        )));
    }
    let values: Vec<f64> = bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let (rho, rest) = values.split_at(cells);
    let (u, v) = rest.split_at(d * cells);
    SimState::new(
        RealField::new(grid, 1, rho.to_vec())?,
        RealField::new(grid, d, u.to_vec())?,
        RealField::new(grid, d, v.to_vec())?,
        t,
    )
}

pub fn write_snapshot(state: &SimState, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_snapshot(state))?;
    Ok(())
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<SimState> {
    decode_snapshot(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::initial_data;
    use std::f64::consts::PI;

    fn sample() -> SimState {
        let g = Grid::new(2, 8, 2.0 * PI).unwrap();
        let mut s = initial_data("random-small", &g, 0.3, 11).unwrap();
        s.t = 0.1 + 0.2;
        s
    }

    #[test]
    fn header_layout() {
        let b = encode_snapshot(&sample());
        assert_eq!(&b[..8], b"PENS\x01\x02\x00\x00");
        assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 8);
        assert_eq!(b.len(), 32 + 8 * 5 * 64);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = sample();
        let back = decode_snapshot(&encode_snapshot(&s)).unwrap();
        assert_eq!(encode_snapshot(&back), encode_snapshot(&s));
        assert_eq!(back.t.to_bits(), s.t.to_bits());
    }

    #[test]
    fn rejects_bad_files() {
        let good = encode_snapshot(&sample());
        let mut b = good.clone();
        b[0] = b'X';
        let err = decode_snapshot(&b).unwrap_err();
        assert!(matches!(err, PensError::BadMagic { .. }) && err.to_string().contains("\"PENS\""));
        let mut b = good.clone();
        b[4] = 2;
        assert_eq!(decode_snapshot(&b).unwrap_err(), PensError::UnsupportedVersion(2));
        assert!(matches!(decode_snapshot(&good[..good.len() - 1]), Err(PensError::Truncated { .. })));
        let mut b = good.clone();
        b[5] = 4;
        assert!(matches!(decode_snapshot(&b), Err(PensError::DimensionMismatch(_))));
    }
}
