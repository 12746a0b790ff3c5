//! Initial-condition generators.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{PeError, Result};
use crate::field::SpectralField;
use crate::forcing::Manufactured;
use crate::grid::Grid;
use crate::norms;
use crate::projection::project_galerkin;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    Zero,
    /// `amp (a_perp) cos(2 pi k.x) phi_m`, a Stokes eigenfunction.
    Eigenmode,
    /// Seeded smooth random field in `|kx|, |ky| <= band`, normalized to
    /// `||v|| = amp`.
    RandomBand,
    /// `(0, amp sin(2 pi kx x) phi_m)`.
    Shear,
    /// The manufactured trajectory at `t = 0`.
    Manufactured,
}

impl FromStr for InitialKind {
    type Err = PeError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "zero" => InitialKind::Zero,
            "eigenmode" => InitialKind::Eigenmode,
            "random-band" => InitialKind::RandomBand,
            "shear" => InitialKind::Shear,
            "manufactured" => InitialKind::Manufactured,
            other => return Err(PeError::Config(format!("unknown initial condition `{other}`"))),
        })
    }
}

impl fmt::Display for InitialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitialKind::Zero => "zero",
            InitialKind::Eigenmode => "eigenmode",
            InitialKind::RandomBand => "random-band",
            InitialKind::Shear => "shear",
            InitialKind::Manufactured => "manufactured",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditionSpec {
    pub kind: InitialKind,
    pub amplitude: f64,
    /// `(kx, ky, m)`
    pub mode: (i64, i64, usize),
    pub seed: u64,
    /// Horizontal band of the random generator.
    pub band: i64,
    /// Amplitude of an added horizontally uniform drift `(phi_0, 0)`.
    pub drift: f64,
}

impl Default for InitialConditionSpec {
    fn default() -> Self {
        InitialConditionSpec { kind: InitialKind::RandomBand, amplitude: 1e-3, mode: (1, 0, 0), seed: 0, band: 4, drift: 0.0 }
    }
}

/// Builds the initial velocity. The result always satisfies the
/// constraint and is deterministic in the seed.
pub fn make_initial(spec: &InitialConditionSpec, grid: &Grid) -> Result<SpectralField> {
    if spec.kind != InitialKind::Zero && !(spec.amplitude > 0.0 && spec.amplitude.is_finite()) {
        return Err(PeError::Config(format!("initial amplitude {} must be positive", spec.amplitude)));
    }
    let (kx, ky, m) = spec.mode;
    let check_mode = || -> Result<()> {
        let ix = Grid::index_of(kx, grid.nx());
        let iy = Grid::index_of(ky, grid.ny());
        match (ix, iy) {
            (Some(ix), Some(iy)) if m < grid.nz() && grid.retained(ix, iy) => Ok(()),
            _ => Err(PeError::ModeOutOfRange(format!("(kx, ky, m) = ({kx}, {ky}, {m}) outside the resolved band"))),
        }
    };
    let amp = spec.amplitude;
    let mut v = match spec.kind {
        InitialKind::Zero => SpectralField::zeros(grid, 2),
        InitialKind::Eigenmode => {
            check_mode()?;
            let mut v = SpectralField::zeros(grid, 2);
            if (kx, ky) == (0, 0) {
                v.set_mode(0, 0, 0, m, Complex64::new(amp, 0.0))?;
            } else {
                let n = ((kx * kx + ky * ky) as f64).sqrt();
                let c = 0.5 * amp;
                v.set_mode(0, kx, ky, m, Complex64::new(-c * ky as f64 / n, 0.0))?;
                v.set_mode(1, kx, ky, m, Complex64::new(c * kx as f64 / n, 0.0))?;
            }
            v
        }
        InitialKind::Shear => {
            check_mode()?;
            let mut v = SpectralField::zeros(grid, 2);
            // sin(2 pi k x) = (e^{i..} - e^{-i..}) / 2i
            v.set_mode(1, kx, 0, m, Complex64::new(0.0, -0.5 * amp))?;
            v
        }
        InitialKind::RandomBand => {
            if spec.band < 0 {
                return Err(PeError::Config("random band must be >= 0".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let f = project_galerkin(&SpectralField::random_band(grid, 2, &mut rng, spec.band, grid.nz() - 1, 2.0))
                .dealiased();
            let n = norms::l2_norm(&f);
            if n == 0.0 {
                return Err(PeError::Config("random band contains no resolved modes".into()));
            }
            f.scaled(amp / n)
        }
        InitialKind::Manufactured => Manufactured::new(grid, amp, spec.seed)?.value(0.0),
    };
    if spec.drift != 0.0 {
        let mut d = SpectralField::zeros(grid, 2);
        d.set_mode(0, 0, 0, 0, Complex64::new(spec.drift, 0.0))?;
        v.axpy(1.0, &d);
    }
    Ok(v)
}
