//! Quadrature and spectral norms: `L^p(Omega)`, the anisotropic
//! `L^q_z L^p_xy` norms, and the spectral `H^s` surrogate.

use crate::error::{PeError, Result};
use crate::field::{PhysicalField, SpectralField};

/// An integrability exponent in `[1, inf]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_infinite() && p > 0.0 {
            Ok(Exponent::Infinity)
        } else if p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(PeError::Domain(format!("exponent {p} must be >= 1")))
        }
    }

    fn reduce(self, values: impl Iterator<Item = (f64, f64)>) -> f64 {
        match self {
            Exponent::Infinity => values.fold(0.0, |m, (v, _)| m.max(v.abs())),
            Exponent::Finite(p) => {
                let s: f64 = values.map(|(v, w)| w * v.abs().powf(p)).sum();
                s.powf(1.0 / p)
            }
        }
    }
}

impl From<f64> for Exponent {
    fn from(p: f64) -> Self {
        Exponent::new(p).expect("exponent must be >= 1")
    }
}

/// `||f||_{L^p(Omega)}` by Gauss-Legendre in z and the trapezoid rule on
/// the periodic horizontal grid. Vector fields use the pointwise Euclidean
/// magnitude.
pub fn lp_norm(f: &PhysicalField, p: f64) -> Result<f64> {
    let p = Exponent::new(p)?;
    let g = f.grid();
    let cell = 1.0 / g.horizontal_len() as f64;
    let w = g.z_weights();
    let mag = f.magnitude();
    let nq = g.nq();
    Ok(p.reduce(mag.iter().enumerate().map(|(i, v)| (*v, cell * w[i % nq]))))
}

/// `|| || f(., z) ||_{L^p_xy(G)} ||_{L^q_z(-h, 0)}`.
pub fn mixed_norm(f: &PhysicalField, q_z: f64, p_xy: f64) -> Result<f64> {
    let q = Exponent::new(q_z)?;
    let p = Exponent::new(p_xy)?;
    let g = f.grid();
    let nq = g.nq();
    let cell = 1.0 / g.horizontal_len() as f64;
    let mag = f.magnitude();
    let per_depth: Vec<f64> = (0..nq)
        .map(|k| p.reduce(mag.iter().skip(k).step_by(nq).map(|v| (*v, cell))))
        .collect();
    Ok(q.reduce(per_depth.iter().zip(g.z_weights()).map(|(v, w)| (*v, *w))))
}

/// `L^2(Omega)` inner product of two spectral fields, `(h/2) sum Re(a conj b)`.
pub fn inner(a: &SpectralField, b: &SpectralField) -> f64 {
    debug_assert_eq!(a.coeffs().len(), b.coeffs().len());
    let s: f64 = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x * y.conj()).re).sum();
    0.5 * a.grid().depth() * s
}

pub fn l2_norm(f: &SpectralField) -> f64 {
    inner(f, f).sqrt()
}

/// Spectral `H^s` surrogate
/// `((h/2) sum (1 + 4 pi^2 |k|^2 + lambda_m^2)^s |c_{k,m}|^2)^{1/2}`.
pub fn sobolev_norm(f: &SpectralField, s: f64) -> f64 {
    sobolev_norm_sq(f, s).sqrt()
}

pub fn sobolev_norm_sq(f: &SpectralField, s: f64) -> f64 {
    let g = f.grid();
    let nz = g.nz();
    let mut sum = 0.0;
    for (col_idx, col) in f.coeffs().chunks(nz).enumerate() {
        let h = col_idx % g.horizontal_len();
        let (ix, iy) = (h / g.ny(), h % g.ny());
        let kk = g.horizontal_laplace_symbol(ix, iy);
        for (m, c) in col.iter().enumerate() {
            let l = g.lambda(m);
            let w = 1.0 + kk + l * l;
            let w = if s == 0.0 { 1.0 } else { w.powf(s) };
            sum += w * c.norm_sqr();
        }
    }
    0.5 * g.depth() * sum
}

/// `||grad f||^2_{L^2(Omega)}`, exact in the basis.
pub fn gradient_norm_sq(f: &SpectralField) -> f64 {
    let g = f.grid();
    let nz = g.nz();
    let mut sum = 0.0;
    for (col_idx, col) in f.coeffs().chunks(nz).enumerate() {
        let h = col_idx % g.horizontal_len();
        let kk = g.horizontal_laplace_symbol(h / g.ny(), h % g.ny());
        for (m, c) in col.iter().enumerate() {
            let l = g.lambda(m);
            sum += (kk + l * l) * c.norm_sqr();
        }
    }
    0.5 * g.depth() * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn constant_field_has_unit_norms() {
        let g = Grid::new(8, 8, 4, 1.0).unwrap();
        let f = PhysicalField::from_fn(&g, 1, |_, _, _, _| -3.0);
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert!((lp_norm(&f, p).unwrap() - 3.0).abs() < 1e-13);
            for q in [1.0, 2.0, 4.0, f64::INFINITY] {
                assert!((mixed_norm(&f, q, p).unwrap() - 3.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn sine_l2_norm_closed_form() {
        for h in [1.0, 2.0] {
            let g = Grid::new(8, 8, 4, h).unwrap();
            let f = PhysicalField::from_fn(&g, 1, |_, x, _, _| (2.0 * PI * x).sin());
            let n = lp_norm(&f, 2.0).unwrap();
            assert!((n - (h / 2.0).sqrt()).abs() < 1e-13);
        }
    }

    #[test]
    fn exponents_below_one_rejected() {
        let g = Grid::new(4, 4, 2, 1.0).unwrap();
        let f = PhysicalField::zeros(&g, 1);
        assert!(lp_norm(&f, 0.5).is_err());
        assert!(mixed_norm(&f, 2.0, 0.9).is_err());
        assert!(mixed_norm(&f, -1.0, 2.0).is_err());
    }

    #[test]
    fn parseval_matches_quadrature() {
        let g = Grid::new(16, 16, 8, 1.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = SpectralField::random_band(&g, 2, &mut rng, 16, 8, 0.0);
        let q = lp_norm(&f.to_physical(), 2.0).unwrap();
        assert!((q * q - l2_norm(&f).powi(2)).abs() < 1e-8 * q * q);
        assert!((sobolev_norm(&f, 0.0) - q).abs() < 1e-8 * q);
    }

    #[test]
    fn sobolev_single_mode_factor() {
        let g = Grid::new(16, 16, 4, 1.0).unwrap();
        let mut f = SpectralField::zeros(&g, 1);
        f.set_mode(0, 1, 0, 0, Complex64::new(0.5, 0.0)).unwrap();
        let l2 = l2_norm(&f);
        let factor = (1.0 + 4.0 * PI * PI + PI * PI / 4.0).sqrt();
        assert!((sobolev_norm(&f, 1.0) - factor * l2).abs() < 1e-12);

        // finite-difference cross-check of ||f||^2 + ||grad f||^2
        let u = |x: f64, z: f64| (2.0 * PI * x).cos() * (PI / 2.0 * z).cos();
        let (n, d) = (400usize, 1e-5);
        let mut acc = 0.0;
        for i in 0..n {
            for k in 0..n {
                let x = (i as f64 + 0.5) / n as f64;
                let z = -(k as f64 + 0.5) / n as f64;
                let ux = (u(x + d, z) - u(x - d, z)) / (2.0 * d);
                let uz = (u(x, z + d) - u(x, z - d)) / (2.0 * d);
                acc += u(x, z).powi(2) + ux * ux + uz * uz;
            }
        }
        acc /= (n * n) as f64;
        assert!((acc.sqrt() - factor * l2).abs() < 1e-4 * factor * l2);
    }

    #[test]
    fn sobolev_monotone_in_s() {
        let g = Grid::new(8, 8, 4, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let f = SpectralField::random_band(&g, 2, &mut rng, 8, 4, 1.0);
            let mut prev = 0.0;
            for s in [0.0, 0.25, 0.5, 1.0, 1.5, 2.0] {
                let n = sobolev_norm(&f, s);
                assert!(n >= prev);
                prev = n;
            }
        }
    }
}
