//! Bit-exact little-endian trajectory dump.
//!
//! Layout: `"GLHF"`, u32 version, u32 d, u32 n_cells, f64 T, f64 lambda,
//! f64 dt, u32 stride, u64 slice_count; per slice f64 t, `n+1` f64 g,
//! `n+1` f64 zeta; trailer with the three final accumulators.

use std::fs;
use std::path::Path;

use crate::error::{GlhfError, Result};
use crate::grid::{CorotationalField, RadialGrid};
use crate::scheme::SchemeParams;
use crate::solver::{Accumulators, Trajectory};

pub const MAGIC: &[u8; 4] = b"GLHF";
pub const VERSION: u32 = 1;
const HEADER_LEN: u64 = 4 + 4 + 4 + 4 + 8 + 8 + 8 + 4 + 8;
const TRAILER_LEN: u64 = 24;

pub fn encode(traj: &Trajectory) -> Vec<u8> {
    let n = traj.grid().cells();
    let slices = traj.slices();
    let mut out = Vec::with_capacity(
        (HEADER_LEN + slices.len() as u64 * slice_len(n) + TRAILER_LEN) as usize,
    );
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(traj.grid().dim() as u32).to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&traj.params().horizon().to_le_bytes());
    out.extend_from_slice(&traj.params().lambda().to_le_bytes());
    out.extend_from_slice(&traj.dt().to_le_bytes());
    out.extend_from_slice(&(traj.stride() as u32).to_le_bytes());
    out.extend_from_slice(&(slices.len() as u64).to_le_bytes());
    for s in slices {
        out.extend_from_slice(&s.t.to_le_bytes());
        for v in s.g.iter().chain(&s.zeta) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let acc = traj.final_accumulators();
    for v in [acc.kinetic, acc.chi_dissipation, acc.penalty_integral] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn slice_len(n: usize) -> u64 {
    8 * (1 + 2 * (n as u64 + 1))
}

pub fn write_dump(traj: &Trajectory, path: &Path) -> Result<()> {
    fs::write(path, encode(traj)).map_err(|e| GlhfError::io(path, e))
}

pub fn read_dump(path: &Path) -> Result<Trajectory> {
    let bytes = fs::read(path).map_err(|e| GlhfError::io(path, e))?;
    decode(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let end = self.pos + N;
        if end > self.bytes.len() {
            return Err(GlhfError::Format {
                offset: self.bytes.len() as u64,
                message: format!(
                    "file ends while reading {what} ({N} bytes needed at offset {})",
                    self.pos
                ),
            });
        }
        let mut buf = [0u8; N];
        buf.copy_from_slice(&self.bytes[self.pos..end]);
        self.pos = end;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(what)?))
    }

    fn fail(&self, at: usize, message: String) -> GlhfError {
        GlhfError::Format {
            offset: at as u64,
            message,
        }
    }
}

pub fn decode(bytes: &[u8]) -> Result<Trajectory> {
    let mut c = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = c.take("magic")?;
    if &magic != MAGIC {
        return Err(c.fail(0, format!("bad magic {magic:?}, expected \"GLHF\"")));
    }
    let version = c.u32("version")?;
    if version != VERSION {
        return Err(c.fail(4, format!("unsupported version {version}, expected {VERSION}")));
    }
    let dim_at = c.pos;
    let dim = c.u32("dimension")? as usize;
    let n = c.u32("n_cells")? as usize;
    let horizon = c.f64("T")?;
    let lambda = c.f64("lambda")?;
    let dt = c.f64("dt")?;
    let stride = c.u32("stride")? as usize;
    let count_at = c.pos;
    let count = c.u64("slice_count")?;
    let params = SchemeParams::new(lambda, horizon, dim).map_err(|e| c.fail(dim_at, e.to_string()))?;
    let grid = RadialGrid::new(n, dim).map_err(|e| c.fail(dim_at, e.to_string()))?;

    let expected = count
        .checked_mul(slice_len(n))
        .and_then(|b| b.checked_add(HEADER_LEN + TRAILER_LEN));
    match expected {
        Some(len) if len == bytes.len() as u64 => {}
        Some(len) if len > bytes.len() as u64 => {
            return Err(c.fail(
                bytes.len(),
                format!("truncated: {count} slices need {len} bytes, file has {}", bytes.len()),
            ))
        }
        Some(len) => {
            return Err(c.fail(
                len as usize,
                format!("{} trailing bytes after the trailer", bytes.len() as u64 - len),
            ))
        }
        None => return Err(c.fail(count_at, format!("implausible slice count {count}"))),
    }

    let nodes = n + 1;
    let mut slices = Vec::with_capacity(count as usize);
    for k in 0..count as usize {
        let at = c.pos;
        let t = c.f64("slice time")?;
        let mut g = Vec::with_capacity(nodes);
        for _ in 0..nodes {
            g.push(c.f64("g")?);
        }
        let mut zeta = Vec::with_capacity(nodes);
        for _ in 0..nodes {
            zeta.push(c.f64("zeta")?);
        }
        let field = CorotationalField::new(t, g, zeta)
            .map_err(|e| c.fail(at, format!("slice {k}: {e}")))?;
        slices.push(field);
    }
    let trailer_at = c.pos;
    let final_accum = Accumulators {
        kinetic: c.f64("kinetic accumulator")?,
        chi_dissipation: c.f64("chi dissipation accumulator")?,
        penalty_integral: c.f64("penalty accumulator")?,
    };
    Trajectory::from_slices(params, grid, dt, stride, slices, None, final_accum)
        .map_err(|e| c.fail(trailer_at, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::InitialDatum;
    use crate::solver::{run, Scheme, StepperConfig};

    fn sample() -> Trajectory {
        let grid = RadialGrid::new(32, 3).unwrap();
        let p = SchemeParams::new(1e3, 0.01, 3).unwrap();
        let f = InitialDatum::Bubble { amplitude: 2.0 }.field(&grid).unwrap();
        run(&p, &grid, &StepperConfig::new(1e-3, Scheme::Strang, 3), &f).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let traj = sample();
        let bytes = encode(&traj);
        let back = decode(&bytes).unwrap();
        assert_eq!(back.slices().len(), traj.slices().len());
        for (a, b) in traj.slices().iter().zip(back.slices()) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            for (x, y) in a.g.iter().chain(&a.zeta).zip(b.g.iter().chain(&b.zeta)) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(back.final_accumulators(), traj.final_accumulators());
        assert_eq!(back.params(), traj.params());
        assert_eq!((back.dt(), back.stride()), (traj.dt(), traj.stride()));
        assert_eq!(encode(&back), bytes);
    }

    fn offset(e: GlhfError) -> u64 {
        match e {
            GlhfError::Format { offset, .. } => offset,
            other => panic!("expected a format error, got {other:?}"),
        }
    }

    #[test]
    fn corrupt_dumps_name_the_offset() {
        let bytes = encode(&sample());
        assert_eq!(offset(decode(&bytes[..bytes.len() - 5]).unwrap_err()), bytes.len() as u64 - 5);
        assert_eq!(offset(decode(&bytes[..10]).unwrap_err()), 10);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(offset(decode(&bad).unwrap_err()), 0);
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert_eq!(offset(decode(&bad).unwrap_err()), 4);
        let mut long = bytes.clone();
        long.push(0);
        assert_eq!(offset(decode(&long).unwrap_err()), bytes.len() as u64);
        let mut huge = bytes;
        huge[44..52].copy_from_slice(&u64::MAX.to_le_bytes());
        assert_eq!(offset(decode(&huge).unwrap_err()), 44);
        assert_eq!(offset(decode(&[]).unwrap_err()), 0);
    }
}
