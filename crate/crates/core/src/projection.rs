//! Hydrostatic Helmholtz projection.
//!
//! The exact projection `P v = v - grad_H pi` with `Delta_H pi = div_H vbar`
//! subtracts a z-independent gradient, which the cosine basis cannot hold.
//! [`Velocity`] therefore carries a basis part and a z-independent part.
//!
//! The dynamics live in the basis span, where the projection is realized
//! as the `L^2`-orthogonal projection onto `{ k . vbar(k) = 0 }`; see
//! [`project_galerkin`].

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{PeError, Result};
use crate::field::{AveragedField, PhysicalField, SpectralField};
use crate::grid::Grid;
use crate::norms;

/// Zero-mean periodic surface pressure on `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePressure {
    coeffs: AveragedField,
}

impl SurfacePressure {
    pub fn zeros(grid: &Grid) -> Self {
        SurfacePressure { coeffs: AveragedField::zeros(grid, 1) }
    }

    /// Wraps 2D coefficients, discarding the mean.
    pub fn from_averaged(mut f: AveragedField) -> Result<Self> {
        if f.components() != 1 {
            return Err(PeError::Shape("pressure is a scalar".into()));
        }
        f.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
        Ok(SurfacePressure { coeffs: f })
    }

    pub fn grid(&self) -> &Grid {
        self.coeffs.grid()
    }

    pub fn coeffs(&self) -> &AveragedField {
        &self.coeffs
    }

    pub fn gradient(&self) -> AveragedField {
        let dx = self.coeffs.horizontal_derivative(0);
        let dy = self.coeffs.horizontal_derivative(1);
        let mut c = dx.coeffs().to_vec();
        c.extend_from_slice(dy.coeffs());
        AveragedField::from_coeffs(self.grid(), 2, c).expect("two components")
    }

    /// `||grad_H pi||^2_{L^2(G)}`.
    pub fn gradient_norm_sq(&self) -> f64 {
        self.gradient().l2_norm().powi(2)
    }
}

/// Solves `Delta_H pi = div_H f` on the torus with zero mean:
/// `pi(k) = -i 2 pi k . f(k) / (4 pi^2 |k|^2)`.
pub fn solve_surface_poisson(f: &AveragedField) -> Result<SurfacePressure> {
    if f.components() != 2 {
        return Err(PeError::Shape("surface Poisson right-hand side must be a 2-vector".into()));
    }
    let g = f.grid().clone();
    let mut pi = AveragedField::zeros(&g, 1);
    for ix in 0..g.nx() {
        for iy in 0..g.ny() {
            let (kx, ky) = g.derivative_k(ix, iy);
            let kk = kx * kx + ky * ky;
            if kk == 0.0 {
                continue;
            }
            let kf = kx * f.get(0, ix, iy) + ky * f.get(1, ix, iy);
            let i = pi.index(0, ix, iy);
            pi.coeffs_mut()[i] = Complex64::new(0.0, -1.0) * kf / (2.0 * PI * kk);
        }
    }
    Ok(SurfacePressure { coeffs: pi })
}

/// Horizontal velocity split into a basis part and a z-independent part.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub layered: SpectralField,
    pub uniform: AveragedField,
}

impl Velocity {
    pub fn new(layered: SpectralField, uniform: AveragedField) -> Result<Self> {
        layered.grid().check_same(uniform.grid())?;
        if layered.components() != 2 || uniform.components() != 2 {
            return Err(PeError::Shape("velocity parts must have 2 components".into()));
        }
        Ok(Velocity { layered, uniform })
    }

    pub fn from_layered(layered: SpectralField) -> Self {
        let uniform = AveragedField::zeros(layered.grid(), 2);
        Velocity { layered, uniform }
    }

    pub fn from_uniform(uniform: AveragedField) -> Self {
        let layered = SpectralField::zeros(uniform.grid(), 2);
        Velocity { layered, uniform }
    }

    pub fn grid(&self) -> &Grid {
        self.layered.grid()
    }

    pub fn vertical_average(&self) -> AveragedField {
        let mut a = self.layered.vertical_average();
        a.axpy(1.0, &self.uniform);
        a
    }

    pub fn to_physical(&self) -> PhysicalField {
        let mut p = self.layered.to_physical();
        p.add_plane(&self.uniform.to_plane(), 1.0);
        p
    }

    pub fn sub(&self, other: &Velocity) -> Velocity {
        let mut u = self.uniform.clone();
        u.axpy(-1.0, &other.uniform);
        Velocity { layered: &self.layered - &other.layered, uniform: u }
    }

    pub fn max_abs(&self) -> f64 {
        self.layered.max_abs().max(self.uniform.max_abs())
    }

    /// Exact `L^2(Omega)` norm.
    pub fn l2_norm(&self) -> f64 {
        inner(self, self).sqrt()
    }
}

/// Exact `L^2(Omega)` inner product of two split velocities.
pub fn inner(a: &Velocity, b: &Velocity) -> f64 {
    let h = a.grid().depth();
    let g2 = |x: &AveragedField, y: &AveragedField| -> f64 {
        x.coeffs().iter().zip(y.coeffs()).map(|(p, q)| (p * q.conj()).re).sum()
    };
    norms::inner(&a.layered, &b.layered)
        + h * g2(&a.uniform, &b.layered.vertical_average())
        + h * g2(&a.layered.vertical_average(), &b.uniform)
        + h * g2(&a.uniform, &b.uniform)
}

/// `div_H vbar`.
pub fn divergence_of_average(v: &Velocity) -> AveragedField {
    v.vertical_average().horizontal_divergence()
}

/// `P v = v - grad_H pi`, with the subtracted gradient carried on the
/// z-independent channel. Also returns `pi`.
pub fn project_with_pressure(v: &Velocity) -> Result<(Velocity, SurfacePressure)> {
    let pi = solve_surface_poisson(&v.vertical_average())?;
    let mut uniform = v.uniform.clone();
    uniform.axpy(-1.0, &pi.gradient());
    Ok((Velocity { layered: v.layered.clone(), uniform }, pi))
}

pub fn project(v: &Velocity) -> Result<Velocity> {
    project_with_pressure(v).map(|(p, _)| p)
}

/// `L^2`-orthogonal projection of a basis field onto the discrete
/// constraint space, together with the pressure whose basis-projected
/// gradient was removed.
///
/// At each `k != 0` the component along `khat (x) a` is removed, where
/// `a_m` are the basis averages, so that `k . vbar(k) = 0` afterwards.
pub fn project_galerkin_with_pressure(f: &SpectralField) -> Result<(SpectralField, SurfacePressure)> {
    if f.components() != 2 {
        return Err(PeError::Shape("projection acts on horizontal velocities".into()));
    }
    let g = f.grid().clone();
    let a = g.basis_averages().to_vec();
    let a2 = g.basis_average_norm2();
    let mut out = f.clone();
    let mut pi = AveragedField::zeros(&g, 1);
    for ix in 0..g.nx() {
        for iy in 0..g.ny() {
            let (kx, ky) = g.derivative_k(ix, iy);
            let kn = (kx * kx + ky * ky).sqrt();
            if kn == 0.0 {
                continue;
            }
            let (ux, uy) = (kx / kn, ky / kn);
            let avg = |c: usize| -> Complex64 {
                f.column(c, ix, iy).iter().zip(&a).map(|(c, a)| c * a).sum()
            };
            let s = (ux * avg(0) + uy * avg(1)) / a2;
            for (m, am) in a.iter().enumerate() {
                let i0 = out.index(0, ix, iy, m);
                let i1 = out.index(1, ix, iy, m);
                out.coeffs_mut()[i0] -= s * (ux * am);
                out.coeffs_mut()[i1] -= s * (uy * am);
            }
            let i = pi.index(0, ix, iy);
            pi.coeffs_mut()[i] = Complex64::new(0.0, -1.0) * s / (4.0 * PI * kn);
        }
    }
    Ok((out, SurfacePressure { coeffs: pi }))
}

pub fn project_galerkin(f: &SpectralField) -> SpectralField {
    project_galerkin_with_pressure(f).expect("two-component field").0
}

/// Basis coefficients of the `L^2` projection of a z-independent field.
pub fn basis_projection_of_uniform(u: &AveragedField) -> SpectralField {
    let g = u.grid();
    let mut out = SpectralField::zeros(g, u.components());
    let a = g.basis_averages();
    let nz = g.nz();
    for (col, v) in out.coeffs_mut().chunks_mut(nz).zip(u.coeffs()) {
        for (c, am) in col.iter_mut().zip(a) {
            *c = v * (2.0 * am);
        }
    }
    out
}
