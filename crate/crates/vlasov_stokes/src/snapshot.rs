//! Binary snapshot format and moment CSV logs.
//!
//! A snapshot is the little-endian header `b"VSF1"`, `Nx: u64`, `Nv: u64`,
//! `Vmax: f64`, `t: f64`, followed by the `Nx * Nx * Nv * Nv` values as `f64`
//! in row-major `(x1, x2, v1, v2)` order.
//!
//! A series file (used for time-resolved fields such as the control) starts with
//! the same header, where `t` is the first stored time, then `Nt: u64`, the `Nt`
//! times as `f64`, and the values in row-major `(t, x1, x2, v1, v2)` order.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::phase_fields::{DistributionField, MomentRecord, PhaseGrid};
use crate::scalar::{lit, to_f64, Real};

pub const MAGIC: &[u8; 4] = b"VSF1";

fn write_header<W: Write, T: Real>(w: &mut W, grid: &PhaseGrid<T>, t: T) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u64::<LittleEndian>(grid.nx as u64)?;
    w.write_u64::<LittleEndian>(grid.nv as u64)?;
    w.write_f64::<LittleEndian>(to_f64(grid.vmax))?;
    w.write_f64::<LittleEndian>(to_f64(t))?;
    Ok(())
}

fn read_header<R: Read, T: Real>(r: &mut R) -> Result<(PhaseGrid<T>, T)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::InvalidConfig("not a VSF1 snapshot".into()));
    }
    let nx = r.read_u64::<LittleEndian>()? as usize;
    let nv = r.read_u64::<LittleEndian>()? as usize;
    let vmax = r.read_f64::<LittleEndian>()?;
    let t = r.read_f64::<LittleEndian>()?;
    Ok((PhaseGrid::new(nx, nv, lit(vmax))?, lit(t)))
}

fn write_values<W: Write, T: Real>(w: &mut W, values: &[T]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for &a in values {
        buf.write_f64::<LittleEndian>(to_f64(a))?;
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_values<R: Read, T: Real>(r: &mut R, n: usize) -> Result<Vec<T>> {
    let mut raw = vec![0f64; n];
    r.read_f64_into::<LittleEndian>(&mut raw)?;
    Ok(raw.into_iter().map(lit).collect())
}

pub fn write_snapshot<W: Write, T: Real>(w: &mut W, f: &DistributionField<T>) -> Result<()> {
    write_header(w, &f.grid, f.t)?;
    write_values(w, &f.values)
}

pub fn read_snapshot<R: Read, T: Real>(r: &mut R) -> Result<DistributionField<T>> {
    let (grid, t) = read_header::<R, T>(r)?;
    let values = read_values(r, grid.len())?;
    Ok(DistributionField { grid, values, t })
}

/// Writes slices sharing one grid; an empty series writes nothing but the header of `grid`.
pub fn write_series<W: Write, T: Real>(w: &mut W, grid: &PhaseGrid<T>, series: &[DistributionField<T>]) -> Result<()> {
    let t0 = series.first().map_or(T::zero(), |f| f.t);
    write_header(w, grid, t0)?;
    w.write_u64::<LittleEndian>(series.len() as u64)?;
    for f in series {
        w.write_f64::<LittleEndian>(to_f64(f.t))?;
    }
    for f in series {
        write_values(w, &f.values)?;
    }
    Ok(())
}

pub fn read_series<R: Read, T: Real>(r: &mut R) -> Result<Vec<DistributionField<T>>> {
    let (grid, _) = read_header::<R, T>(r)?;
    let nt = r.read_u64::<LittleEndian>()? as usize;
    let mut times = Vec::with_capacity(nt);
    for _ in 0..nt {
        times.push(lit::<T>(r.read_f64::<LittleEndian>()?));
    }
    times
        .into_iter()
        .map(|t| Ok(DistributionField { grid, values: read_values(r, grid.len())?, t }))
        .collect()
}

pub const MOMENTS_HEADER: &str = "t,mass,mom1,mom2,max|rho|";

/// Moment time series as CSV with a fixed 17-digit scientific format.
pub fn write_moments_csv<W: Write, T: Real>(w: &mut W, records: &[MomentRecord<T>]) -> Result<()> {
    writeln!(w, "{MOMENTS_HEADER}")?;
    for m in records {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            to_f64(m.t),
            to_f64(m.mass),
            to_f64(m.momentum[0]),
            to_f64(m.momentum[1]),
            to_f64(m.max_abs_rho())
        )?;
    }
    Ok(())
}
