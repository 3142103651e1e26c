//! Binary mask/field containers and 16-bit graymap export.
//!
//! Layout (little-endian): 4-byte magic, `u32` version, `u32` nx, `u32` ny,
//! `u32` plane count, `f64` pitch, `f64` wavelength, `f64` plane spacing,
//! then the planes, each `ny` rows of `nx` values. Mask stacks use magic
//! `MPLC` and one `f64` phase per pixel; field sets use magic `MPLF`, a
//! spacing of zero, and interleaved `f64` real/imaginary parts.

use std::f64::consts::TAU;
use std::io::{Read, Write};

use ndarray::Array2;
use num_complex::Complex64;

use super::field::{GridSpec, OpticalField};
use super::mplc::PhaseMaskStack;
use crate::error::{Error, Result};

const STACK_MAGIC: &[u8; 4] = b"MPLC";
const FIELD_MAGIC: &[u8; 4] = b"MPLF";
const VERSION: u32 = 1;

struct Header {
    grid: GridSpec,
    planes: usize,
    spacing: f64,
}

fn write_header<W: Write>(w: &mut W, magic: &[u8; 4], h: &Header) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [h.grid.nx, h.grid.ny, h.planes] {
        let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
        w.write_all(&v.to_le_bytes())?;
    }
    for v in [h.grid.pitch, h.grid.wavelength, h.spacing] {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<Header> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let nx = read_u32(r)? as usize;
    let ny = read_u32(r)? as usize;
    let planes = read_u32(r)? as usize;
    let pitch = read_f64(r)?;
    let wavelength = read_f64(r)?;
    let spacing = read_f64(r)?;
    let grid = GridSpec::new(nx, ny, pitch, wavelength)?;
    Ok(Header { grid, planes, spacing })
}

pub fn write_stack<W: Write>(w: &mut W, stack: &PhaseMaskStack) -> Result<()> {
    let header = Header {
        grid: *stack.grid(),
        planes: stack.planes(),
        spacing: stack.plane_spacing(),
    };
    write_header(w, STACK_MAGIC, &header)?;
    let mut buf = Vec::with_capacity(stack.grid().nx * stack.grid().ny * 8);
    for mask in stack.masks() {
        buf.clear();
        for v in mask.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_stack<R: Read>(r: &mut R) -> Result<PhaseMaskStack> {
    let h = read_header(r, STACK_MAGIC)?;
    let mut masks = Vec::with_capacity(h.planes);
    let n = h.grid.nx * h.grid.ny;
    let mut raw = vec![0u8; n * 8];
    for _ in 0..h.planes {
        r.read_exact(&mut raw)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if values.iter().any(|v| !(0.0..TAU).contains(v)) {
            return Err(Error::Format("mask phase outside [0, 2pi)".into()));
        }
        masks.push(Array2::from_shape_vec(h.grid.shape(), values).expect("shape matches header"));
    }
    PhaseMaskStack::new(h.grid, masks, h.spacing)
}

pub fn write_fields<W: Write>(w: &mut W, fields: &[OpticalField]) -> Result<()> {
    let Some(first) = fields.first() else {
        return Err(Error::InvalidInput("no fields to write".into()));
    };
    for f in fields {
        first.ensure_same_grid(f)?;
    }
    let header = Header {
        grid: *first.grid(),
        planes: fields.len(),
        spacing: 0.0,
    };
    write_header(w, FIELD_MAGIC, &header)?;
    let mut buf = Vec::new();
    for f in fields {
        buf.clear();
        for z in f.amplitude().iter() {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_fields<R: Read>(r: &mut R) -> Result<Vec<OpticalField>> {
    let h = read_header(r, FIELD_MAGIC)?;
    let n = h.grid.nx * h.grid.ny;
    let mut raw = vec![0u8; n * 16];
    let mut out = Vec::with_capacity(h.planes);
    for _ in 0..h.planes {
        r.read_exact(&mut raw)?;
        let values: Vec<Complex64> = raw
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                    f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
                )
            })
            .collect();
        let amp = Array2::from_shape_vec(h.grid.shape(), values).expect("shape matches header");
        out.push(OpticalField::new(h.grid, amp)?);
    }
    Ok(out)
}

/// Binary 16-bit PGM (`P5`, big-endian samples), phase mapped linearly from
/// `[0, 2 pi)` onto `0..=65535`.
pub fn write_pgm<W: Write>(w: &mut W, mask: &Array2<f64>) -> Result<()> {
    let (ny, nx) = mask.dim();
    write!(w, "P5\n{nx} {ny}\n65535\n")?;
    let mut buf = Vec::with_capacity(nx * ny * 2);
    for &phi in mask.iter() {
        let level = (phi.rem_euclid(TAU) / TAU * 65535.0).round().clamp(0.0, 65535.0) as u16;
        buf.extend_from_slice(&level.to_be_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}
