//! Pseudospectral transport term `v_adv . grad_H v + w(v_adv) d/dz v` and
//! the projected nonlinearity `F v = -P (v . grad_H v + w d/dz v)`.

use crate::error::{PeError, Result};
use crate::field::{diagnostic_w, PhysicalField, SpectralField};
use crate::grid::Grid;
use crate::norms;
use crate::projection::project_galerkin;

/// Dealiasing mask and grid for nonlinear evaluations.
///
/// Products are formed on the collocation grid. Horizontal aliasing is
/// removed by the 2/3 rule on inputs and output. The vertical direction
/// needs no mask: the return trip is a Gauss-Legendre projection that is
/// exact for the products involved.
#[derive(Debug, Clone)]
pub struct NonlinearWorkspace {
    grid: Grid,
    mask: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct BilinearReport {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub lipschitz_ratios: Vec<f64>,
    pub max_lipschitz_ratio: f64,
}

impl NonlinearWorkspace {
    pub fn new(grid: &Grid) -> Self {
        let mut mask = Vec::with_capacity(grid.horizontal_len());
        for ix in 0..grid.nx() {
            for iy in 0..grid.ny() {
                mask.push(grid.retained(ix, iy));
            }
        }
        NonlinearWorkspace { grid: grid.clone(), mask }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `true` for retained horizontal modes, indexed `ix * ny + iy`.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    fn check(&self, v: &SpectralField) -> Result<()> {
        self.grid.check_same(v.grid())?;
        if v.components() != 2 {
            return Err(PeError::Shape("transport acts on horizontal velocities".into()));
        }
        Ok(())
    }

    /// Pointwise transport term on the collocation grid, without any mask.
    pub fn pointwise_transport(&self, v: &SpectralField, v_adv: &SpectralField) -> Result<PhysicalField> {
        self.check(v)?;
        self.check(v_adv)?;
        let u = v_adv.to_physical();
        let w = diagnostic_w(v_adv)?;
        let dx = v.horizontal_derivative(0).to_physical();
        let dy = v.horizontal_derivative(1).to_physical();
        let dz = v.dz_physical();
        let n = self.grid.physical_len();
        let (uv, wv) = (u.values(), w.values());
        let mut out = PhysicalField::zeros(&self.grid, 2);
        let o = out.values_mut();
        for c in 0..2 {
            let (a, b, d) = (&dx.values()[c * n..], &dy.values()[c * n..], &dz.values()[c * n..]);
            for p in 0..n {
                o[c * n + p] = uv[p] * a[p] + uv[n + p] * b[p] + wv[p] * d[p];
            }
        }
        Ok(out)
    }

    /// Unprojected transport term, dealiased and returned in the basis.
    pub fn advect(&self, v: &SpectralField, v_adv: &SpectralField) -> Result<SpectralField> {
        let vm = v.clone().dealiased();
        let am = v_adv.clone().dealiased();
        let b = self.pointwise_transport(&vm, &am)?;
        Ok(b.to_spectral().dealiased())
    }

    /// `F v = -P(v . grad_H v + w d/dz v)`.
    pub fn nonlinear(&self, v: &SpectralField) -> Result<SpectralField> {
        let b = self.advect(v, v)?;
        Ok(-&project_galerkin(&b))
    }

    /// `max ||F v||_{L^2} / ||v||^2_{H^{3/2}}` over the samples, and the
    /// Lipschitz ratio `||F v - F v'|| / ((||v|| + ||v'||) ||v - v'||)` over
    /// consecutive pairs.
    pub fn bilinear_estimate_probe(&self, samples: &[SpectralField]) -> Result<BilinearReport> {
        let s = 1.5;
        let mut ratios = Vec::with_capacity(samples.len());
        let mut images = Vec::with_capacity(samples.len());
        for v in samples {
            let f = self.nonlinear(v)?;
            let d = norms::sobolev_norm(v, s).powi(2);
            ratios.push(if d > 0.0 { norms::l2_norm(&f) / d } else { 0.0 });
            images.push(f);
        }
        let mut lipschitz_ratios = Vec::new();
        for i in 1..samples.len() {
            let (v, w) = (&samples[i - 1], &samples[i]);
            let num = norms::l2_norm(&(&images[i - 1] - &images[i]));
            let den = (norms::sobolev_norm(v, s) + norms::sobolev_norm(w, s)) * norms::sobolev_norm(&(v - w), s);
            lipschitz_ratios.push(if den > 0.0 { num / den } else { 0.0 });
        }
        let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
        let max_lipschitz_ratio = lipschitz_ratios.iter().copied().fold(0.0, f64::max);
        Ok(BilinearReport { ratios, max_ratio, lipschitz_ratios, max_lipschitz_ratio })
    }
}
