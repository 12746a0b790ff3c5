//! Binary checkpoints. A one-line ASCII header
//! `HYDROPDE1 <kind> <nx> <ny> <nz> <h> <components> <dealias>` is followed
//! by the coefficients as little-endian `f64` (re, im) pairs in
//! `(component, ix, iy, m)` order (FFT index order in x and y). `kind` is
//! `velocity` or `pressure`; pressure files store one coefficient per
//! horizontal mode.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{PeError, Result};
use crate::field::{AveragedField, SpectralField};
use crate::grid::{Fraction, Grid};
use crate::projection::SurfacePressure;

const MAGIC: &str = "HYDROPDE1";

fn write_header(w: &mut impl Write, kind: &str, g: &Grid, components: usize) -> Result<()> {
    writeln!(w, "{MAGIC} {kind} {} {} {} {} {components} {}", g.nx(), g.ny(), g.nz(), g.depth(), g.dealias())?;
    Ok(())
}

fn write_coeffs(w: &mut impl Write, c: &[Complex64]) -> Result<()> {
    for z in c {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_header(r: &mut impl BufRead) -> Result<(String, Grid, usize)> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 8 || parts[0] != MAGIC {
        return Err(PeError::Format("not a hydropde checkpoint".into()));
    }
    let bad = |what: &str| PeError::Format(format!("bad checkpoint header field `{what}`"));
    let nx: usize = parts[2].parse().map_err(|_| bad("nx"))?;
    let ny: usize = parts[3].parse().map_err(|_| bad("ny"))?;
    let nz: usize = parts[4].parse().map_err(|_| bad("nz"))?;
    let h: f64 = parts[5].parse().map_err(|_| bad("h"))?;
    let comps: usize = parts[6].parse().map_err(|_| bad("components"))?;
    let dealias: Fraction = parts[7].parse().map_err(|_| bad("dealias"))?;
    let grid = Grid::with_dealias(nx, ny, nz, h, dealias)?;
    Ok((parts[1].to_string(), grid, comps))
}

fn read_coeffs(r: &mut impl Read, n: usize) -> Result<Vec<Complex64>> {
    let mut buf = vec![0u8; 16 * n];
    r.read_exact(&mut buf).map_err(|_| PeError::Format("truncated checkpoint".into()))?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(PeError::Format("trailing bytes after checkpoint data".into()));
    }
    Ok(buf
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect())
}

pub fn write_field(w: &mut impl Write, f: &SpectralField) -> Result<()> {
    write_header(w, "velocity", f.grid(), f.components())?;
    write_coeffs(w, f.coeffs())
}

pub fn read_field(r: &mut impl BufRead) -> Result<SpectralField> {
    let (kind, grid, comps) = read_header(r)?;
    if kind != "velocity" {
        return Err(PeError::Format(format!("expected a velocity checkpoint, found `{kind}`")));
    }
    let coeffs = read_coeffs(r, comps * grid.spectral_len())?;
    SpectralField::from_coeffs(&grid, comps, coeffs)
}

pub fn write_pressure(w: &mut impl Write, p: &SurfacePressure) -> Result<()> {
    write_header(w, "pressure", p.grid(), 1)?;
    write_coeffs(w, p.coeffs().coeffs())
}

pub fn read_pressure(r: &mut impl BufRead) -> Result<SurfacePressure> {
    let (kind, grid, comps) = read_header(r)?;
    if kind != "pressure" || comps != 1 {
        return Err(PeError::Format(format!("expected a pressure checkpoint, found `{kind}`")));
    }
    let coeffs = read_coeffs(r, grid.horizontal_len())?;
    SurfacePressure::from_averaged(AveragedField::from_coeffs(&grid, 1, coeffs)?)
}

pub fn save_field(path: impl AsRef<Path>, f: &SpectralField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(&mut w, f)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: impl AsRef<Path>) -> Result<SpectralField> {
    read_field(&mut BufReader::new(File::open(path)?))
}

pub fn save_pressure(path: impl AsRef<Path>, p: &SurfacePressure) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pressure(&mut w, p)?;
    w.flush()?;
    Ok(())
}

pub fn load_pressure(path: impl AsRef<Path>) -> Result<SurfacePressure> {
    read_pressure(&mut BufReader::new(File::open(path)?))
}
