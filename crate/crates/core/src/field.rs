//! Spectral and physical representations of fields on the ocean box, the
//! transforms between them, and the vertical average / fluctuation split.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{PeError, Result};
use crate::grid::Grid;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Coefficients of a scalar (1 component) or horizontal vector (2
/// components) field in the Fourier x cosine basis.
///
/// Storage is row-major over `(component, ix, iy, m)` where `ix`, `iy` are
/// FFT indices (see [`Grid::wavenumber`]).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    components: usize,
    coeffs: Vec<Complex64>,
}

/// Values on the collocation grid `(x_i, y_j, z_q)`, row-major over
/// `(component, i, j, q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField {
    grid: Grid,
    components: usize,
    values: Vec<f64>,
}

/// A z-independent field, stored by its 2D Fourier coefficients over
/// `(component, ix, iy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedField {
    grid: Grid,
    components: usize,
    coeffs: Vec<Complex64>,
}

/// Values of a z-independent field on the horizontal grid, row-major over
/// `(component, i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneField {
    grid: Grid,
    components: usize,
    values: Vec<f64>,
}

fn check_components(components: usize) -> Result<()> {
    if components == 1 || components == 2 {
        Ok(())
    } else {
        Err(PeError::Shape(format!("fields have 1 or 2 components, got {components}")))
    }
}

impl SpectralField {
    pub fn zeros(grid: &Grid, components: usize) -> Self {
        assert!(components == 1 || components == 2, "fields have 1 or 2 components");
        SpectralField {
            grid: grid.clone(),
            components,
            coeffs: vec![ZERO; components * grid.spectral_len()],
        }
    }

    pub fn from_coeffs(grid: &Grid, components: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        check_components(components)?;
        if coeffs.len() != components * grid.spectral_len() {
            return Err(PeError::Shape(format!(
                "expected {} coefficients, got {}",
                components * grid.spectral_len(),
                coeffs.len()
            )));
        }
        Ok(SpectralField { grid: grid.clone(), components, coeffs })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    #[inline]
    pub fn index(&self, c: usize, ix: usize, iy: usize, m: usize) -> usize {
        let g = &self.grid;
        ((c * g.nx() + ix) * g.ny() + iy) * g.nz() + m
    }

    pub fn get(&self, c: usize, ix: usize, iy: usize, m: usize) -> Complex64 {
        self.coeffs[self.index(c, ix, iy, m)]
    }

    /// The `nz` vertical coefficients at one horizontal index.
    pub fn column(&self, c: usize, ix: usize, iy: usize) -> &[Complex64] {
        let s = self.index(c, ix, iy, 0);
        &self.coeffs[s..s + self.grid.nz()]
    }

    pub fn column_mut(&mut self, c: usize, ix: usize, iy: usize) -> &mut [Complex64] {
        let s = self.index(c, ix, iy, 0);
        let nz = self.grid.nz();
        &mut self.coeffs[s..s + nz]
    }

    /// Sets the coefficient of `e^{2 pi i (kx x + ky y)} phi_m(z)` and its
    /// conjugate partner so that the field stays real.
    pub fn set_mode(&mut self, c: usize, kx: i64, ky: i64, m: usize, value: Complex64) -> Result<()> {
        let g = &self.grid;
        let (ix, iy) = match (Grid::index_of(kx, g.nx()), Grid::index_of(ky, g.ny())) {
            (Some(ix), Some(iy)) => (ix, iy),
            _ => return Err(PeError::ModeOutOfRange(format!("k = ({kx}, {ky})"))),
        };
        if m >= g.nz() || c >= self.components {
            return Err(PeError::ModeOutOfRange(format!("component {c}, vertical mode {m}")));
        }
        let (jx, jy) = g.conjugate_index(ix, iy);
        let a = self.index(c, ix, iy, m);
        let b = self.index(c, jx, jy, m);
        if a == b {
            self.coeffs[a] = Complex64::new(value.re, 0.0);
        } else {
            self.coeffs[a] = value;
            self.coeffs[b] = value.conj();
        }
        Ok(())
    }

    /// Forces exact Hermitian symmetry by averaging each coefficient with
    /// its conjugate partner.
    pub fn symmetrize(&mut self) {
        let g = self.grid.clone();
        for c in 0..self.components {
            for ix in 0..g.nx() {
                for iy in 0..g.ny() {
                    let (jx, jy) = g.conjugate_index(ix, iy);
                    if (jx, jy) < (ix, iy) {
                        continue;
                    }
                    for m in 0..g.nz() {
                        let a = self.index(c, ix, iy, m);
                        let b = self.index(c, jx, jy, m);
                        let avg = 0.5 * (self.coeffs[a] + self.coeffs[b].conj());
                        self.coeffs[a] = avg;
                        self.coeffs[b] = avg.conj();
                    }
                }
            }
        }
    }

    /// Zeroes all horizontal modes outside the dealiasing band.
    pub fn dealias(&mut self) {
        let g = self.grid.clone();
        for c in 0..self.components {
            for ix in 0..g.nx() {
                for iy in 0..g.ny() {
                    if !g.retained(ix, iy) {
                        self.column_mut(c, ix, iy).fill(ZERO);
                    }
                }
            }
        }
    }

    pub fn dealiased(mut self) -> Self {
        self.dealias();
        self
    }

    /// Largest Hermitian-symmetry defect `|c(k) - conj(c(-k))|`.
    pub fn hermitian_defect(&self) -> f64 {
        let g = &self.grid;
        let mut d: f64 = 0.0;
        for c in 0..self.components {
            for ix in 0..g.nx() {
                for iy in 0..g.ny() {
                    let (jx, jy) = g.conjugate_index(ix, iy);
                    for m in 0..g.nz() {
                        d = d.max((self.get(c, ix, iy, m) - self.get(c, jx, jy, m).conj()).norm());
                    }
                }
            }
        }
        d
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn component(&self, c: usize) -> SpectralField {
        let n = self.grid.spectral_len();
        SpectralField {
            grid: self.grid.clone(),
            components: 1,
            coeffs: self.coeffs[c * n..(c + 1) * n].to_vec(),
        }
    }

    pub fn from_components(x: &SpectralField, y: &SpectralField) -> Result<Self> {
        x.grid.check_same(&y.grid)?;
        if x.components != 1 || y.components != 1 {
            return Err(PeError::Shape("expected two scalar fields".into()));
        }
        let mut coeffs = x.coeffs.clone();
        coeffs.extend_from_slice(&y.coeffs);
        Ok(SpectralField { grid: x.grid.clone(), components: 2, coeffs })
    }

    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        debug_assert_eq!(self.coeffs.len(), other.coeffs.len());
        for (s, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *s += a * o;
        }
    }

    pub fn scaled(&self, a: f64) -> SpectralField {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Euclidean norm of the raw coefficient vector.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    fn map_columns(&self, f: impl Fn(usize, usize, usize, usize, Complex64) -> Complex64) -> SpectralField {
        let g = &self.grid;
        let mut out = self.clone();
        for c in 0..self.components {
            for ix in 0..g.nx() {
                for iy in 0..g.ny() {
                    for m in 0..g.nz() {
                        let i = self.index(c, ix, iy, m);
                        out.coeffs[i] = f(c, ix, iy, m, self.coeffs[i]);
                    }
                }
            }
        }
        out
    }

    /// Derivative along x (`axis = 0`) or y (`axis = 1`).
    pub fn horizontal_derivative(&self, axis: usize) -> SpectralField {
        let g = self.grid.clone();
        self.map_columns(|_, ix, iy, _, v| {
            let (kx, ky) = g.derivative_k(ix, iy);
            let k = if axis == 0 { kx } else { ky };
            v * I * (2.0 * PI * k)
        })
    }

    /// `div_H` of a two-component field.
    pub fn horizontal_divergence(&self) -> SpectralField {
        assert_eq!(self.components, 2);
        let dx = self.component(0).horizontal_derivative(0);
        let dy = self.component(1).horizontal_derivative(1);
        &dx + &dy
    }

    /// Full Laplacian; exact because each basis function is an eigenfunction.
    pub fn laplacian(&self) -> SpectralField {
        let g = self.grid.clone();
        self.map_columns(|_, ix, iy, m, v| {
            let l = g.lambda(m);
            -(g.horizontal_laplace_symbol(ix, iy) + l * l) * v
        })
    }

    /// Sampled values on the collocation grid.
    pub fn to_physical(&self) -> PhysicalField {
        let values = synthesize(&self.grid, self.components, &self.coeffs, &self.grid.tables().cos);
        PhysicalField { grid: self.grid.clone(), components: self.components, values }
    }

    /// `d/dz` sampled on the collocation grid, using
    /// `d/dz cos(l z) = -l sin(l z)`.
    pub fn dz_physical(&self) -> PhysicalField {
        let g = self.grid.clone();
        let scaled = self.map_columns(|_, _, _, m, v| -g.lambda(m) * v);
        let values = synthesize(&g, self.components, &scaled.coeffs, &g.tables().sin);
        PhysicalField { grid: g, components: self.components, values }
    }

    /// `(1/h) int_{-h}^0 f dz`, computed exactly from the basis averages.
    pub fn vertical_average(&self) -> AveragedField {
        let g = &self.grid;
        let a = g.basis_averages();
        let mut coeffs = vec![ZERO; self.components * g.horizontal_len()];
        for (col, out) in self.coeffs.chunks(g.nz()).zip(coeffs.iter_mut()) {
            *out = col.iter().zip(a).map(|(c, a)| c * a).sum();
        }
        AveragedField { grid: g.clone(), components: self.components, coeffs }
    }

    /// Basis field whose vertical average is `avg`, of minimal coefficient
    /// norm: coefficients `a_m avg / sum a_m^2`.
    pub fn reexpand(avg: &AveragedField) -> SpectralField {
        let g = avg.grid.clone();
        let a = g.basis_averages();
        let n2 = g.basis_average_norm2();
        let mut out = SpectralField::zeros(&g, avg.components);
        for (col, v) in out.coeffs.chunks_mut(g.nz()).zip(&avg.coeffs) {
            for (c, a) in col.iter_mut().zip(a) {
                *c = v * (a / n2);
            }
        }
        out
    }

    /// `f` minus the re-expansion of its vertical average; the result has
    /// zero vertical average.
    pub fn fluctuation(&self) -> SpectralField {
        self - &SpectralField::reexpand(&self.vertical_average())
    }

    /// Random real field with coefficients in the band `|kx|, |ky| <= kmax`,
    /// `m <= mmax`, restricted to dealiased modes, with amplitude decaying
    /// like `(1 + |k|^2 + m^2)^{-decay/2}`.
    pub fn random_band<R: Rng>(
        grid: &Grid,
        components: usize,
        rng: &mut R,
        kmax: i64,
        mmax: usize,
        decay: f64,
    ) -> SpectralField {
        let mut f = SpectralField::zeros(grid, components);
        for c in 0..components {
            for ix in 0..grid.nx() {
                for iy in 0..grid.ny() {
                    let (jx, jy) = grid.conjugate_index(ix, iy);
                    if (jx, jy) < (ix, iy) {
                        continue;
                    }
                    let (kx, ky) = grid.k_of(ix, iy);
                    let inside = kx.abs() <= kmax && ky.abs() <= kmax && grid.retained(ix, iy);
                    for m in 0..grid.nz() {
                        let re: f64 = rng.random_range(-1.0..1.0);
                        let im: f64 = rng.random_range(-1.0..1.0);
                        if !inside || m > mmax {
                            continue;
                        }
                        let w = (1.0 + (kx * kx + ky * ky) as f64 + (m * m) as f64).powf(-0.5 * decay);
                        let v = if (jx, jy) == (ix, iy) {
                            Complex64::new(re * w, 0.0)
                        } else {
                            Complex64::new(re * w, im * w)
                        };
                        let a = f.index(c, ix, iy, m);
                        let b = f.index(c, jx, jy, m);
                        f.coeffs[a] = v;
                        f.coeffs[b] = v.conj();
                    }
                }
            }
        }
        f
    }

    /// Copy onto another grid with the same depth, keeping the common modes.
    pub fn resample(&self, target: &Grid) -> Result<SpectralField> {
        if target.depth() != self.grid.depth() {
            return Err(PeError::Shape("resampling requires equal depth".into()));
        }
        let mut out = SpectralField::zeros(target, self.components);
        let g = &self.grid;
        let nz = g.nz().min(target.nz());
        for c in 0..self.components {
            for ix in 0..g.nx() {
                for iy in 0..g.ny() {
                    let (kx, ky) = g.k_of(ix, iy);
                    if 2 * kx.unsigned_abs() as usize >= g.nx().min(target.nx())
                        || 2 * ky.unsigned_abs() as usize >= g.ny().min(target.ny())
                    {
                        continue;
                    }
                    let tx = Grid::index_of(kx, target.nx()).expect("in range");
                    let ty = Grid::index_of(ky, target.ny()).expect("in range");
                    for m in 0..nz {
                        let i = out.index(c, tx, ty, m);
                        out.coeffs[i] = self.get(c, ix, iy, m);
                    }
                }
            }
        }
        Ok(out)
    }
}

impl<'a> Add<&'a SpectralField> for &'a SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl<'a> Sub<&'a SpectralField> for &'a SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, a: f64) -> SpectralField {
        self.scaled(a)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scaled(-1.0)
    }
}

/// Evaluates `sum_m coeff_m * table[m][q]` per column, then inverse-FFTs
/// each `(component, q)` plane.
fn synthesize(g: &Grid, components: usize, coeffs: &[Complex64], table: &[f64]) -> Vec<f64> {
    let (nx, ny, nz, nq) = (g.nx(), g.ny(), g.nz(), g.nq());
    let plane = nx * ny;
    // planes laid out as [c][q][ix][iy]
    let mut planes = vec![ZERO; components * nq * plane];
    planes.par_chunks_mut(plane).enumerate().for_each(|(cq, buf)| {
        let (c, q) = (cq / nq, cq % nq);
        for (h, out) in buf.iter_mut().enumerate() {
            let col = &coeffs[(c * plane + h) * nz..(c * plane + h + 1) * nz];
            let mut s = ZERO;
            for (m, v) in col.iter().enumerate() {
                s += v * table[m * nq + q];
            }
            *out = s;
        }
        g.fft2(buf, true);
    });
    let mut values = vec![0.0; components * plane * nq];
    values.par_chunks_mut(nq).enumerate().for_each(|(ch, col)| {
        let (c, h) = (ch / plane, ch % plane);
        for (q, v) in col.iter_mut().enumerate() {
            *v = planes[(c * nq + q) * plane + h].re;
        }
    });
    values
}

impl PhysicalField {
    pub fn zeros(grid: &Grid, components: usize) -> Self {
        assert!(components == 1 || components == 2, "fields have 1 or 2 components");
        PhysicalField {
            grid: grid.clone(),
            components,
            values: vec![0.0; components * grid.physical_len()],
        }
    }

    pub fn from_values(grid: &Grid, components: usize, values: Vec<f64>) -> Result<Self> {
        check_components(components)?;
        if values.len() != components * grid.physical_len() {
            return Err(PeError::Shape(format!(
                "expected {} values, got {}",
                components * grid.physical_len(),
                values.len()
            )));
        }
        Ok(PhysicalField { grid: grid.clone(), components, values })
    }

    /// Samples `f(component, x, y, z)` on the collocation grid.
    pub fn from_fn(grid: &Grid, components: usize, f: impl Fn(usize, f64, f64, f64) -> f64) -> Self {
        let mut out = PhysicalField::zeros(grid, components);
        let z = grid.z_nodes().to_vec();
        for c in 0..components {
            for i in 0..grid.nx() {
                for j in 0..grid.ny() {
                    for (q, zq) in z.iter().enumerate() {
                        let idx = out.index(c, i, j, q);
                        out.values[idx] = f(c, grid.x_node(i), grid.y_node(j), *zq);
                    }
                }
            }
        }
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn index(&self, c: usize, i: usize, j: usize, q: usize) -> usize {
        let g = &self.grid;
        ((c * g.nx() + i) * g.ny() + j) * g.nq() + q
    }

    pub fn get(&self, c: usize, i: usize, j: usize, q: usize) -> f64 {
        self.values[self.index(c, i, j, q)]
    }

    pub fn component(&self, c: usize) -> PhysicalField {
        let n = self.grid.physical_len();
        PhysicalField {
            grid: self.grid.clone(),
            components: 1,
            values: self.values[c * n..(c + 1) * n].to_vec(),
        }
    }

    pub fn from_components(parts: &[&PhysicalField]) -> Result<Self> {
        check_components(parts.len())?;
        let mut values = Vec::new();
        for p in parts {
            parts[0].grid.check_same(&p.grid)?;
            if p.components != 1 {
                return Err(PeError::Shape("expected scalar parts".into()));
            }
            values.extend_from_slice(&p.values);
        }
        Ok(PhysicalField { grid: parts[0].grid.clone(), components: parts.len(), values })
    }

    /// Projection onto the retained modes: forward FFT per plane followed by
    /// the vertical Gauss-Legendre projection
    /// `c_m = (2/h) sum_q w_q f(z_q) cos(lambda_m z_q)`.
    pub fn to_spectral(&self) -> SpectralField {
        let g = &self.grid;
        let (nx, ny, nz, nq) = (g.nx(), g.ny(), g.nz(), g.nq());
        let plane = nx * ny;
        let comps = self.components;
        let mut planes = vec![ZERO; comps * nq * plane];
        planes.par_chunks_mut(plane).enumerate().for_each(|(cq, buf)| {
            let (c, q) = (cq / nq, cq % nq);
            for (h, out) in buf.iter_mut().enumerate() {
                *out = Complex64::new(self.values[(c * plane + h) * nq + q], 0.0);
            }
            g.fft2(buf, false);
        });
        let t = g.tables();
        let scale = 2.0 / (g.depth() * plane as f64);
        let mut coeffs = vec![ZERO; comps * plane * nz];
        coeffs.par_chunks_mut(nz).enumerate().for_each(|(ch, col)| {
            let (c, h) = (ch / plane, ch % plane);
            for (m, out) in col.iter_mut().enumerate() {
                let mut s = ZERO;
                for q in 0..nq {
                    s += planes[(c * nq + q) * plane + h] * (t.weights[q] * t.cos[m * nq + q]);
                }
                *out = s * scale;
            }
        });
        SpectralField { grid: g.clone(), components: comps, coeffs }
    }

    /// Quadrature vertical average onto the horizontal grid.
    pub fn vertical_average(&self) -> PlaneField {
        let g = &self.grid;
        let w = g.z_weights();
        let values = self
            .values
            .chunks(g.nq())
            .map(|col| col.iter().zip(w).map(|(v, w)| v * w).sum::<f64>() / g.depth())
            .collect();
        PlaneField { grid: g.clone(), components: self.components, values }
    }

    /// Adds a z-independent field at every depth.
    pub fn add_plane(&mut self, p: &PlaneField, scale: f64) {
        assert_eq!(self.components, p.components);
        let nq = self.grid.nq();
        for (col, v) in self.values.chunks_mut(nq).zip(&p.values) {
            col.iter_mut().for_each(|x| *x += scale * v);
        }
    }

    /// Pointwise product of two scalar fields.
    pub fn mul(&self, other: &PhysicalField) -> PhysicalField {
        assert_eq!(self.values.len(), other.values.len());
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        PhysicalField { grid: self.grid.clone(), components: self.components, values }
    }

    pub fn axpy(&mut self, a: f64, other: &PhysicalField) {
        assert_eq!(self.values.len(), other.values.len());
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    pub fn scaled(&self, a: f64) -> PhysicalField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// Pointwise Euclidean magnitude over components.
    pub fn magnitude(&self) -> Vec<f64> {
        let n = self.grid.physical_len();
        (0..n)
            .map(|p| (0..self.components).map(|c| self.values[c * n + p].powi(2)).sum::<f64>().sqrt())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl AveragedField {
    pub fn zeros(grid: &Grid, components: usize) -> Self {
        assert!(components == 1 || components == 2, "fields have 1 or 2 components");
        AveragedField {
            grid: grid.clone(),
            components,
            coeffs: vec![ZERO; components * grid.horizontal_len()],
        }
    }

    pub fn from_coeffs(grid: &Grid, components: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        check_components(components)?;
        if coeffs.len() != components * grid.horizontal_len() {
            return Err(PeError::Shape("averaged field coefficient count".into()));
        }
        Ok(AveragedField { grid: grid.clone(), components, coeffs })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    #[inline]
    pub fn index(&self, c: usize, ix: usize, iy: usize) -> usize {
        (c * self.grid.nx() + ix) * self.grid.ny() + iy
    }

    pub fn get(&self, c: usize, ix: usize, iy: usize) -> Complex64 {
        self.coeffs[self.index(c, ix, iy)]
    }

    pub fn set_mode(&mut self, c: usize, kx: i64, ky: i64, value: Complex64) -> Result<()> {
        let g = self.grid.clone();
        let (ix, iy) = match (Grid::index_of(kx, g.nx()), Grid::index_of(ky, g.ny())) {
            (Some(ix), Some(iy)) => (ix, iy),
            _ => return Err(PeError::ModeOutOfRange(format!("k = ({kx}, {ky})"))),
        };
        let (jx, jy) = g.conjugate_index(ix, iy);
        let a = self.index(c, ix, iy);
        let b = self.index(c, jx, jy);
        if a == b {
            self.coeffs[a] = Complex64::new(value.re, 0.0);
        } else {
            self.coeffs[a] = value;
            self.coeffs[b] = value.conj();
        }
        Ok(())
    }

    pub fn component(&self, c: usize) -> AveragedField {
        let n = self.grid.horizontal_len();
        AveragedField {
            grid: self.grid.clone(),
            components: 1,
            coeffs: self.coeffs[c * n..(c + 1) * n].to_vec(),
        }
    }

    pub fn axpy(&mut self, a: f64, other: &AveragedField) {
        for (s, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *s += a * o;
        }
    }

    pub fn scaled(&self, a: f64) -> AveragedField {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }

    pub fn horizontal_derivative(&self, axis: usize) -> AveragedField {
        let g = self.grid.clone();
        let mut out = self.clone();
        for c in 0..self.components {
            for ix in 0..g.nx() {
                for iy in 0..g.ny() {
                    let (kx, ky) = g.derivative_k(ix, iy);
                    let k = if axis == 0 { kx } else { ky };
                    let i = out.index(c, ix, iy);
                    out.coeffs[i] *= I * (2.0 * PI * k);
                }
            }
        }
        out
    }

    pub fn horizontal_divergence(&self) -> AveragedField {
        assert_eq!(self.components, 2);
        let mut d = self.component(0).horizontal_derivative(0);
        d.axpy(1.0, &self.component(1).horizontal_derivative(1));
        d
    }

    pub fn horizontal_laplacian(&self) -> AveragedField {
        let g = self.grid.clone();
        let mut out = self.clone();
        for c in 0..self.components {
            for ix in 0..g.nx() {
                for iy in 0..g.ny() {
                    let i = out.index(c, ix, iy);
                    out.coeffs[i] *= -g.horizontal_laplace_symbol(ix, iy);
                }
            }
        }
        out
    }

    pub fn dealias(&mut self) {
        let g = self.grid.clone();
        for c in 0..self.components {
            for ix in 0..g.nx() {
                for iy in 0..g.ny() {
                    if !g.retained(ix, iy) {
                        let i = self.index(c, ix, iy);
                        self.coeffs[i] = ZERO;
                    }
                }
            }
        }
    }

    /// `L^2(G)` norm via Parseval (`|G| = 1`).
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn to_plane(&self) -> PlaneField {
        let g = &self.grid;
        let plane = g.horizontal_len();
        let mut values = Vec::with_capacity(self.components * plane);
        for c in 0..self.components {
            let mut buf = self.coeffs[c * plane..(c + 1) * plane].to_vec();
            g.fft2(&mut buf, true);
            values.extend(buf.iter().map(|v| v.re));
        }
        PlaneField { grid: g.clone(), components: self.components, values }
    }
}

impl PlaneField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, c: usize, i: usize, j: usize) -> f64 {
        self.values[(c * self.grid.nx() + i) * self.grid.ny() + j]
    }

    pub fn to_averaged(&self) -> AveragedField {
        let g = &self.grid;
        let plane = g.horizontal_len();
        let mut coeffs = Vec::with_capacity(self.components * plane);
        for c in 0..self.components {
            let mut buf: Vec<Complex64> =
                self.values[c * plane..(c + 1) * plane].iter().map(|v| Complex64::new(*v, 0.0)).collect();
            g.fft2(&mut buf, false);
            coeffs.extend(buf.iter().map(|v| v / plane as f64));
        }
        AveragedField { grid: g.clone(), components: self.components, coeffs }
    }

    /// Lifts to a z-independent 3D field.
    pub fn lift(&self) -> PhysicalField {
        let mut out = PhysicalField::zeros(&self.grid, self.components);
        out.add_plane(self, 1.0);
        out
    }
}

/// Vertical velocity `w(z) = int_z^0 div_H v d zeta` on the collocation
/// grid, using `int_z^0 cos(l s) ds = -sin(l z) / l`.
pub fn diagnostic_w(v: &SpectralField) -> Result<PhysicalField> {
    if v.components() != 2 {
        return Err(PeError::Shape("diagnostic_w expects a horizontal velocity".into()));
    }
    let g = v.grid().clone();
    let div = v.horizontal_divergence();
    let scaled = div.map_columns(|_, _, _, m, c| -c / g.lambda(m));
    let values = synthesize(&g, 1, &scaled.coeffs, &g.tables().sin);
    Ok(PhysicalField { grid: g, components: 1, values })
}

/// Horizontal Fourier coefficients of `w` at a single depth `z`.
pub fn vertical_velocity_at_depth(v: &SpectralField, z: f64) -> Result<AveragedField> {
    if v.components() != 2 {
        return Err(PeError::Shape("expected a horizontal velocity".into()));
    }
    let g = v.grid();
    if !(z >= -g.depth() && z <= 0.0) {
        return Err(PeError::Domain(format!("depth {z} outside [-h, 0]")));
    }
    let div = v.horizontal_divergence();
    let mut out = AveragedField::zeros(g, 1);
    for (col, o) in div.coeffs().chunks(g.nz()).zip(out.coeffs.iter_mut()) {
        *o = col
            .iter()
            .enumerate()
            .map(|(m, c)| -c * ((g.lambda(m) * z).sin() / g.lambda(m)))
            .sum();
    }
    Ok(out)
}

/// `d/dz v` at `z = -h`, i.e. `sum_m lambda_m (-1)^m c_m`.
pub fn bottom_shear(v: &SpectralField) -> AveragedField {
    let g = v.grid();
    let mut out = AveragedField::zeros(g, v.components());
    for (col, o) in v.coeffs().chunks(g.nz()).zip(out.coeffs.iter_mut()) {
        *o = col
            .iter()
            .enumerate()
            .map(|(m, c)| c * (g.lambda(m) * if m % 2 == 0 { 1.0 } else { -1.0 }))
            .sum();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel_diff(a: &SpectralField, b: &SpectralField) -> f64 {
        (a - b).coeff_norm() / b.coeff_norm().max(1e-300)
    }

    #[test]
    fn single_basis_function_samples_cosine() {
        let g = Grid::new(8, 6, 4, 1.0).unwrap();
        let mut f = SpectralField::zeros(&g, 1);
        f.set_mode(0, 0, 0, 0, Complex64::new(1.0, 0.0)).unwrap();
        let p = f.to_physical();
        for i in 0..8 {
            for j in 0..6 {
                for (q, z) in g.z_nodes().iter().enumerate() {
                    let expect = (g.lambda(0) * z).cos();
                    assert!((p.get(0, i, j, q) - expect).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn round_trip_random_field() {
        for &(nx, ny, nz) in &[(4, 4, 2), (8, 6, 5), (16, 16, 8), (32, 32, 16)] {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            // every mode below Nyquist, not just the dealiased band
            let g = Grid::with_dealias(nx, ny, nz, 1.3, crate::grid::Fraction::ONE).unwrap();
            let f = SpectralField::random_band(&g, 2, &mut rng, 64, nz, 0.0);
            let back = f.to_physical().to_spectral();
            assert!(rel_diff(&back, &f) < 1e-12, "{nx}x{ny}x{nz}: {}", rel_diff(&back, &f));
        }
    }

    #[test]
    fn zero_maps_to_zero() {
        let g = Grid::new(8, 8, 4, 1.0).unwrap();
        let f = SpectralField::zeros(&g, 2);
        assert_eq!(f.to_physical().max_abs(), 0.0);
        assert_eq!(f.vertical_average().max_abs(), 0.0);
        assert_eq!(f.fluctuation().max_abs(), 0.0);
    }

    #[test]
    fn vertical_average_of_first_mode() {
        let g = Grid::new(4, 4, 3, 1.0).unwrap();
        let mut f = SpectralField::zeros(&g, 1);
        f.set_mode(0, 0, 0, 0, Complex64::new(1.0, 0.0)).unwrap();
        let avg = f.vertical_average().get(0, 0, 0).re;
        // quadrature oracle on a fine midpoint rule
        let n = 200_000;
        let quad: f64 = (0..n)
            .map(|i| (std::f64::consts::FRAC_PI_2 * -((i as f64 + 0.5) / n as f64)).cos())
            .sum::<f64>()
            / n as f64;
        assert!((avg - 2.0 / PI).abs() < 1e-15);
        assert!((avg - quad).abs() < 1e-9);
    }

    #[test]
    fn projected_constant_averages_to_one() {
        let g = Grid::new(4, 4, 24, 1.0).unwrap();
        let ones = PhysicalField::from_fn(&g, 1, |_, _, _, _| 1.0);
        let f = ones.to_spectral();
        let avg = f.vertical_average().get(0, 0, 0).re;
        // truncated cosine series of a constant: 2 sum a_m^2 -> 1
        assert!((avg - 1.0).abs() < 1e-2, "{avg}");
        assert!((avg - 2.0 * g.basis_average_norm2()).abs() < 1e-13);
        assert!(f.fluctuation().coeff_norm() < 1e-13 * f.coeff_norm());
    }

    #[test]
    fn fluctuation_fixes_zero_average_fields() {
        let g = Grid::new(4, 4, 3, 1.0).unwrap();
        let mut f = SpectralField::zeros(&g, 1);
        // c0 * 2/pi + c1 * (-2/(3 pi)) = 0
        f.set_mode(0, 1, 0, 0, Complex64::new(1.0, 0.0)).unwrap();
        f.set_mode(0, 1, 0, 1, Complex64::new(3.0, 0.0)).unwrap();
        assert!(f.vertical_average().max_abs() < 1e-15);
        assert!(rel_diff(&f.fluctuation(), &f) < 1e-15);
    }

    #[test]
    fn average_of_fluctuation_vanishes() {
        let g = Grid::new(8, 8, 6, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = SpectralField::random_band(&g, 2, &mut rng, 8, 8, 0.0);
        let avg = f.fluctuation().vertical_average();
        assert!(avg.max_abs() < 1e-12 * f.max_abs());
    }

    #[test]
    fn w_of_single_shear_mode() {
        let g = Grid::new(8, 8, 4, 1.0).unwrap();
        let mut v = SpectralField::zeros(&g, 2);
        // sin(2 pi x) = (e^{2 pi i x} - e^{-2 pi i x}) / (2i)
        v.set_mode(0, 1, 0, 0, Complex64::new(0.0, -0.5)).unwrap();
        let w = diagnostic_w(&v).unwrap();
        let l0 = g.lambda(0);
        for i in 0..8 {
            let x = g.x_node(i);
            for (q, z) in g.z_nodes().iter().enumerate() {
                // midpoint-rule oracle of int_z^0 d/dx(sin 2 pi x) cos(l0 s) ds
                let n = 4000;
                let dz = -z / n as f64;
                let integral: f64 = (0..n)
                    .map(|k| (l0 * (z + (k as f64 + 0.5) * dz)).cos())
                    .sum::<f64>()
                    * dz;
                let oracle = 2.0 * PI * (2.0 * PI * x).cos() * integral;
                let closed = -2.0 * PI * (2.0 * PI * x).cos() * (l0 * z).sin() / l0;
                assert!((w.get(0, i, 0, q) - closed).abs() < 1e-12);
                assert!((w.get(0, i, 0, q) - oracle).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn w_vanishes_for_divergence_free_velocity() {
        let g = Grid::new(8, 8, 4, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let psi = SpectralField::random_band(&g, 1, &mut rng, 8, 4, 0.0);
        let v = SpectralField::from_components(
            &psi.horizontal_derivative(1),
            &-&psi.horizontal_derivative(0),
        )
        .unwrap();
        assert!(diagnostic_w(&v).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn bottom_shear_matches_sampled_derivative() {
        let g = Grid::new(4, 4, 5, 1.5).unwrap();
        let mut f = SpectralField::zeros(&g, 1);
        for m in 0..5 {
            f.set_mode(0, 0, 0, m, Complex64::new(1.0 + m as f64, 0.0)).unwrap();
        }
        let expect: f64 = (0..5).map(|m| -g.lambda(m) * (1.0 + m as f64) * (g.lambda(m) * -1.5).sin()).sum();
        assert!((bottom_shear(&f).get(0, 0, 0).re - expect).abs() < 1e-12);
    }
}
