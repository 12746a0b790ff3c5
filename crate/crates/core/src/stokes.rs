//! The hydrostatic Stokes operator `A = -P Delta` on the constrained
//! discrete space.
//!
//! `A` commutes with horizontal translations, so it splits into one block
//! per wavenumber `k`. In the frame `(khat, khat_perp)` the perpendicular
//! velocity is unconstrained and the block is `diag(4 pi^2 |k|^2 +
//! lambda_m^2)`. The parallel velocity must satisfy `a . c = 0` (zero
//! averaged divergence) and its block is `4 pi^2 |k|^2 + Q^T diag(lambda^2) Q`
//! with `Q` an orthonormal basis of `a^perp`. The second term does not
//! depend on `k`, so one symmetric eigendecomposition serves every block.
//! [`assemble_block`] builds the same blocks densely and independently.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{PeError, Result};
use crate::field::SpectralField;
use crate::grid::Grid;
use crate::norms;
use crate::projection::{project_galerkin_with_pressure, SurfacePressure};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Orthonormal basis of the complement of the unit vector `u`, from the
/// Householder reflector mapping `u` to a multiple of `e_1`.
fn complement_basis(u: &DVector<f64>) -> DMatrix<f64> {
    let n = u.len();
    let mut w = u.clone();
    let s = if u[0] >= 0.0 { 1.0 } else { -1.0 };
    w[0] += s;
    let ww = w.dot(&w);
    let h = DMatrix::<f64>::identity(n, n) - (&w * w.transpose()) * (2.0 / ww);
    h.columns(1, n - 1).into_owned()
}

/// Dense realization of `A` at one wavenumber, reduced to the constraint
/// subspace.
#[derive(Debug, Clone)]
pub struct StokesBlock {
    pub k: (i64, i64),
    /// Orthonormal basis (columns) of the constrained coefficient space in
    /// the stacked `(v1_0..v1_{nz-1}, v2_0..v2_{nz-1})` coordinates.
    pub basis: DMatrix<f64>,
    /// `basis^T diag(4 pi^2 |k|^2 + lambda_m^2) basis`.
    pub matrix: DMatrix<f64>,
}

impl StokesBlock {
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    pub fn symmetry_defect(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).norm()
    }

    /// `basis matrix basis^T`: the block acting on full stacked coordinates.
    pub fn full_action(&self) -> DMatrix<f64> {
        &self.basis * &self.matrix * self.basis.transpose()
    }
}

/// Assembles the reduced block at wavenumber `(kx, ky)`.
pub fn assemble_block(grid: &Grid, kx: i64, ky: i64) -> Result<StokesBlock> {
    let (ix, iy) = match (Grid::index_of(kx, grid.nx()), Grid::index_of(ky, grid.ny())) {
        (Some(ix), Some(iy)) => (ix, iy),
        _ => return Err(PeError::ModeOutOfRange(format!("k = ({kx}, {ky}) outside the grid"))),
    };
    let nz = grid.nz();
    let kk = grid.horizontal_laplace_symbol(ix, iy);
    let diag = DVector::from_iterator(
        2 * nz,
        (0..2 * nz).map(|i| kk + grid.lambda(i % nz).powi(2)),
    );
    let d = DMatrix::from_diagonal(&diag);
    let (dkx, dky) = grid.derivative_k(ix, iy);
    let kn = (dkx * dkx + dky * dky).sqrt();
    let basis = if kn == 0.0 {
        DMatrix::identity(2 * nz, 2 * nz)
    } else {
        let a = grid.basis_averages();
        let norm = grid.basis_average_norm2().sqrt();
        let u = DVector::from_iterator(
            2 * nz,
            (0..2 * nz).map(|i| if i < nz { dkx / kn } else { dky / kn } * a[i % nz] / norm),
        );
        complement_basis(&u)
    };
    let matrix = basis.transpose() * d * &basis;
    Ok(StokesBlock { k: (kx, ky), basis, matrix })
}

/// Coefficients of a constrained velocity in the eigenbasis of `A`.
///
/// Per horizontal index there are `2 nz` slots. For `k != 0` slots
/// `0..nz` hold the perpendicular modes, `nz..2nz-1` the constrained
/// parallel eigenmodes, and slot `2nz - 1` is unused. For `k = 0` the
/// slots are the two velocity components.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl ModalField {
    pub fn zeros(grid: &Grid) -> Self {
        ModalField { grid: grid.clone(), coeffs: vec![ZERO; 2 * grid.spectral_len()] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn axpy(&mut self, a: f64, other: &ModalField) {
        for (s, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *s += a * o;
        }
    }

    pub fn scaled(&self, a: f64) -> ModalField {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }

    /// `L^2(Omega)` norm; the modal basis is orthonormal up to `h/2`.
    pub fn l2_norm(&self) -> f64 {
        (0.5 * self.grid.depth() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Eigenvalues of every block and the spectral bound `beta`.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub blocks: Vec<((i64, i64), Vec<f64>)>,
    pub beta: f64,
}

impl SpectrumReport {
    pub fn all_real_positive(&self) -> bool {
        self.blocks.iter().all(|(_, e)| e.iter().all(|x| x.is_finite() && *x > 0.0))
    }
}

#[derive(Debug, Clone)]
pub struct SectorReport {
    pub epsilon: f64,
    /// `(lambda, |lambda| ||(lambda + A)^{-1}||)` per sample.
    pub samples: Vec<(Complex64, f64)>,
    pub sup: f64,
    /// `||A^{-1}||`, which must not exceed `1 / beta`.
    pub inverse_norm: f64,
}

#[derive(Debug, Clone)]
pub struct SmoothingReport {
    pub theta1: f64,
    pub theta2: f64,
    pub values: Vec<(f64, f64)>,
    pub sup: f64,
}

/// `A` on the discrete space, diagonalized once.
#[derive(Debug, Clone)]
pub struct StokesOperator {
    grid: Grid,
    /// Columns: constrained parallel eigenvectors in vertical-mode
    /// coordinates (`nz x (nz - 1)`).
    par_vectors: DMatrix<f64>,
    /// Matching eigenvalues of `Q^T diag(lambda^2) Q`, ascending.
    par_values: Vec<f64>,
    /// Eigenvalue of each modal slot, NaN for unused slots.
    mu: Vec<f64>,
}

impl StokesOperator {
    pub fn new(grid: &Grid) -> Self {
        let nz = grid.nz();
        let a = DVector::from_column_slice(grid.basis_averages());
        let u = &a / a.norm();
        let q = complement_basis(&u);
        let lam2 = DMatrix::from_diagonal(&DVector::from_iterator(nz, (0..nz).map(|m| grid.lambda(m).powi(2))));
        let s = q.transpose() * lam2 * &q;
        let eig = SymmetricEigen::new(s);
        let mut order: Vec<usize> = (0..nz - 1).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let par_values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let w = DMatrix::from_fn(nz - 1, nz - 1, |r, c| eig.eigenvectors[(r, order[c])]);
        let par_vectors = q * w;

        let mut mu = vec![f64::NAN; 2 * grid.spectral_len()];
        for ix in 0..grid.nx() {
            for iy in 0..grid.ny() {
                let kk = grid.horizontal_laplace_symbol(ix, iy);
                let (dkx, dky) = grid.derivative_k(ix, iy);
                let base = 2 * nz * (ix * grid.ny() + iy);
                for m in 0..nz {
                    mu[base + m] = kk + grid.lambda(m).powi(2);
                }
                if dkx == 0.0 && dky == 0.0 {
                    for m in 0..nz {
                        mu[base + nz + m] = kk + grid.lambda(m).powi(2);
                    }
                } else {
                    for (j, s) in par_values.iter().enumerate() {
                        mu[base + nz + j] = kk + s;
                    }
                }
            }
        }
        StokesOperator { grid: grid.clone(), par_vectors, par_values, mu }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Eigenvalue per modal slot (NaN where the slot is unused).
    pub fn modal_eigenvalues(&self) -> &[f64] {
        &self.mu
    }

    /// Eigenvalues of the constrained parallel block at `k != 0`, without
    /// the `4 pi^2 |k|^2` shift.
    pub fn parallel_offsets(&self) -> &[f64] {
        &self.par_values
    }

    /// Spectral bound `beta = min spectrum = (pi / 2h)^2`.
    pub fn beta(&self) -> f64 {
        self.mu.iter().copied().filter(|x| !x.is_nan()).fold(f64::INFINITY, f64::min)
    }

    /// Coordinates in the eigenbasis. Any component violating the
    /// constraint is discarded, so this is also the Galerkin projection.
    pub fn to_modal(&self, f: &SpectralField) -> ModalField {
        assert_eq!(f.components(), 2, "velocity expected");
        let g = &self.grid;
        let nz = g.nz();
        let mut out = ModalField::zeros(g);
        for ix in 0..g.nx() {
            for iy in 0..g.ny() {
                let base = 2 * nz * (ix * g.ny() + iy);
                let (c1, c2) = (f.column(0, ix, iy), f.column(1, ix, iy));
                let slots = &mut out.coeffs[base..base + 2 * nz];
                let (dkx, dky) = g.derivative_k(ix, iy);
                let kn = (dkx * dkx + dky * dky).sqrt();
                if kn == 0.0 {
                    slots[..nz].copy_from_slice(c1);
                    slots[nz..].copy_from_slice(c2);
                    continue;
                }
                let (ux, uy) = (dkx / kn, dky / kn);
                let mut par = vec![ZERO; nz];
                for m in 0..nz {
                    slots[m] = -uy * c1[m] + ux * c2[m];
                    par[m] = ux * c1[m] + uy * c2[m];
                }
                for j in 0..nz - 1 {
                    let mut s = ZERO;
                    for m in 0..nz {
                        s += par[m] * self.par_vectors[(m, j)];
                    }
                    slots[nz + j] = s;
                }
                slots[2 * nz - 1] = ZERO;
            }
        }
        out
    }

    pub fn from_modal(&self, f: &ModalField) -> SpectralField {
        let g = &self.grid;
        let nz = g.nz();
        let mut out = SpectralField::zeros(g, 2);
        let mut c1 = vec![ZERO; nz];
        let mut c2 = vec![ZERO; nz];
        for ix in 0..g.nx() {
            for iy in 0..g.ny() {
                let base = 2 * nz * (ix * g.ny() + iy);
                let slots = &f.coeffs[base..base + 2 * nz];
                let (dkx, dky) = g.derivative_k(ix, iy);
                let kn = (dkx * dkx + dky * dky).sqrt();
                if kn == 0.0 {
                    c1.copy_from_slice(&slots[..nz]);
                    c2.copy_from_slice(&slots[nz..]);
                } else {
                    let (ux, uy) = (dkx / kn, dky / kn);
                    for m in 0..nz {
                        let mut par = ZERO;
                        for j in 0..nz - 1 {
                            par += slots[nz + j] * self.par_vectors[(m, j)];
                        }
                        let perp = slots[m];
                        c1[m] = ux * par - uy * perp;
                        c2[m] = uy * par + ux * perp;
                    }
                }
                out.column_mut(0, ix, iy).copy_from_slice(&c1);
                out.column_mut(1, ix, iy).copy_from_slice(&c2);
            }
        }
        out
    }

    /// Multiplies every modal coefficient by `g(mu)`.
    pub fn map_modal(&self, f: &ModalField, g: impl Fn(f64) -> Complex64) -> ModalField {
        let mut out = f.clone();
        for (c, mu) in out.coeffs.iter_mut().zip(&self.mu) {
            *c = if mu.is_nan() { ZERO } else { *c * g(*mu) };
        }
        out
    }

    /// `g(A) P f` by functional calculus.
    pub fn apply_fn(&self, f: &SpectralField, g: impl Fn(f64) -> Complex64) -> SpectralField {
        self.from_modal(&self.map_modal(&self.to_modal(f), g))
    }

    /// `A P f`.
    pub fn apply(&self, f: &SpectralField) -> SpectralField {
        self.apply_fn(f, |mu| Complex64::new(mu, 0.0))
    }

    /// `e^{-tA} P f`.
    pub fn semigroup_apply(&self, t: f64, f: &SpectralField) -> Result<SpectralField> {
        if !(t >= 0.0) {
            return Err(PeError::Domain(format!("semigroup time {t} must be >= 0")));
        }
        Ok(self.apply_fn(f, |mu| Complex64::new((-t * mu).exp(), 0.0)))
    }

    pub fn semigroup_modal(&self, t: f64, f: &ModalField) -> ModalField {
        self.map_modal(f, |mu| Complex64::new((-t * mu).exp(), 0.0))
    }

    /// Solves `(lambda + A) v = P f` and returns `v` with the pressure `pi`
    /// for which `lambda v - Delta v + grad_H pi - f` is orthogonal to the
    /// whole basis span.
    pub fn resolvent_solve(&self, lambda: Complex64, f: &SpectralField) -> Result<(SpectralField, SurfacePressure)> {
        let scale = lambda.norm().max(self.beta());
        for mu in self.mu.iter().filter(|m| !m.is_nan()) {
            if (lambda + mu).norm() <= 1e-13 * scale {
                return Err(PeError::Singular(format!("lambda = {lambda} is an eigenvalue of -A")));
            }
        }
        let v = self.apply_fn(f, |mu| 1.0 / (lambda + mu));
        let mut r = f.clone();
        r.axpy(1.0, &v.laplacian());
        for (x, y) in r.coeffs_mut().iter_mut().zip(v.coeffs()) {
            *x -= lambda * y;
        }
        let (_, pi) = project_galerkin_with_pressure(&r)?;
        Ok((v, pi))
    }

    pub fn spectrum(&self) -> SpectrumReport {
        let g = &self.grid;
        let nz = g.nz();
        let mut blocks = Vec::with_capacity(g.horizontal_len());
        for ix in 0..g.nx() {
            for iy in 0..g.ny() {
                let base = 2 * nz * (ix * g.ny() + iy);
                let mut e: Vec<f64> = self.mu[base..base + 2 * nz].iter().copied().filter(|x| !x.is_nan()).collect();
                e.sort_by(f64::total_cmp);
                blocks.push((g.k_of(ix, iy), e));
            }
        }
        SpectrumReport { blocks, beta: self.beta() }
    }

    fn distinct_eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.mu.iter().copied().filter(|x| !x.is_nan()).collect();
        e.sort_by(f64::total_cmp);
        e.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
        e
    }

    /// `|lambda| sup_mu 1 / |lambda + mu|` over the spectrum.
    pub fn sectorial_constant(&self, lambda: Complex64) -> f64 {
        self.sectorial_constant_in(&self.distinct_eigenvalues(), lambda)
    }

    fn sectorial_constant_in(&self, eig: &[f64], lambda: Complex64) -> f64 {
        let d = eig.iter().map(|mu| (lambda + mu).norm()).fold(f64::INFINITY, f64::min);
        lambda.norm() / d
    }

    pub fn sector_sweep(&self, epsilon: f64, samples: &[Complex64]) -> Result<SectorReport> {
        if !(epsilon > 0.0 && epsilon < PI / 2.0) {
            return Err(PeError::Domain(format!("sector half-opening {epsilon} outside (0, pi/2)")));
        }
        let eig = self.distinct_eigenvalues();
        let mut out = Vec::with_capacity(samples.len());
        for &l in samples {
            if l.arg().abs() > PI - epsilon + 1e-12 {
                return Err(PeError::Domain(format!("sample {l} lies outside the sector")));
            }
            if l.norm() == 0.0 {
                continue;
            }
            out.push((l, self.sectorial_constant_in(&eig, l)));
        }
        let sup = out.iter().map(|(_, m)| *m).fold(0.0, f64::max);
        let inverse_norm = 1.0 / eig[0];
        Ok(SectorReport { epsilon, samples: out, sup, inverse_norm })
    }

    /// `sup_t t^theta1 e^{beta t} ||e^{-tA} f||_{2(theta1+theta2)} / ||f||_{2 theta2}`
    /// in the spectral Sobolev surrogate norms.
    pub fn smoothing_probe(&self, theta1: f64, theta2: f64, times: &[f64], f: &SpectralField) -> Result<SmoothingReport> {
        if theta1 < 0.0 || theta2 < 0.0 || theta1 + theta2 > 1.0 {
            return Err(PeError::Domain(format!("need theta1, theta2 >= 0 and theta1 + theta2 <= 1, got {theta1}, {theta2}")));
        }
        let beta = self.beta();
        let denom = norms::sobolev_norm(f, 2.0 * theta2);
        let modal = self.to_modal(f);
        let mut values = Vec::with_capacity(times.len());
        for &t in times {
            let u = self.from_modal(&self.semigroup_modal(t, &modal));
            let n = norms::sobolev_norm(&u, 2.0 * (theta1 + theta2));
            let gval = if denom == 0.0 { 0.0 } else { t.powf(theta1) * (beta * t).exp() * n / denom };
            values.push((t, gval));
        }
        let sup = values.iter().map(|(_, v)| *v).fold(0.0, f64::max);
        Ok(SmoothingReport { theta1, theta2, values, sup })
    }
}

/// Log-spaced sector samples: `per_decade` magnitudes per decade in
/// `[1e-3, 1e6]` for each argument in `args`.
pub fn sector_samples(args: &[f64], per_decade: usize) -> Vec<Complex64> {
    let n = 9 * per_decade;
    let mut out = Vec::with_capacity(args.len() * (n + 1));
    for &a in args {
        for i in 0..=n {
            let r = 10f64.powf(-3.0 + 9.0 * i as f64 / n as f64);
            out.push(Complex64::from_polar(r, a));
        }
    }
    out
}
