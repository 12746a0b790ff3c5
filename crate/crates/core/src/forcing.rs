//! External forcing: zero, a single decaying mode, or the forcing that
//! makes a manufactured trajectory `v*(t)` an exact solution.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{PeError, Result};
use crate::field::{PhysicalField, SpectralField};
use crate::grid::Grid;
use crate::nonlinear::NonlinearWorkspace;
use crate::norms;
use crate::projection::project_galerkin;

/// Forcing description, written `zero`, `mode:c,kx,ky,m,amp,decay` or
/// `mms:amp,seed`.
#[derive(Debug, Clone, PartialEq)]
pub enum ForcingSpec {
    Zero,
    /// `amp e^{-decay t} cos(2 pi k.x) phi_m(z)` in component `c`.
    Mode { component: usize, k: (i64, i64), m: usize, amplitude: f64, decay: f64 },
    Manufactured { amplitude: f64, seed: u64 },
}

impl Default for ForcingSpec {
    fn default() -> Self {
        ForcingSpec::Zero
    }
}

impl fmt::Display for ForcingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForcingSpec::Zero => write!(f, "zero"),
            ForcingSpec::Mode { component, k, m, amplitude, decay } => {
                write!(f, "mode:{component},{},{},{m},{amplitude},{decay}", k.0, k.1)
            }
            ForcingSpec::Manufactured { amplitude, seed } => write!(f, "mms:{amplitude},{seed}"),
        }
    }
}

fn field<T: FromStr>(parts: &[&str], i: usize, s: &str) -> Result<T> {
    parts
        .get(i)
        .and_then(|p| p.trim().parse().ok())
        .ok_or_else(|| PeError::Config(format!("malformed forcing parameters in `{s}`")))
}

impl FromStr for ForcingSpec {
    type Err = PeError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (id, rest) = s.split_once(':').unwrap_or((s, ""));
        let parts: Vec<&str> = if rest.is_empty() { vec![] } else { rest.split(',').collect() };
        let spec = match id.trim() {
            "zero" | "none" => {
                if !parts.is_empty() {
                    return Err(PeError::Config("`zero` forcing takes no parameters".into()));
                }
                ForcingSpec::Zero
            }
            "mode" => {
                if parts.len() != 6 {
                    return Err(PeError::Config(format!("`mode` forcing needs 6 parameters, got {}", parts.len())));
                }
                ForcingSpec::Mode {
                    component: field(&parts, 0, s)?,
                    k: (field(&parts, 1, s)?, field(&parts, 2, s)?),
                    m: field(&parts, 3, s)?,
                    amplitude: field(&parts, 4, s)?,
                    decay: field(&parts, 5, s)?,
                }
            }
            "mms" => {
                if parts.len() != 2 {
                    return Err(PeError::Config(format!("`mms` forcing needs 2 parameters, got {}", parts.len())));
                }
                ForcingSpec::Manufactured { amplitude: field(&parts, 0, s)?, seed: field(&parts, 1, s)? }
            }
            other => return Err(PeError::UnknownForcing(other.to_string())),
        };
        Ok(spec)
    }
}

/// Band-limited manufactured trajectory
/// `v*(t) = cos(3t) V0 + e^{-t} V1 + (1 + sin 2t) V2`.
///
/// Each `V_j` is a smooth constrained field whose horizontal band is small
/// enough that the quadratic term is resolved without aliasing, so `v*`
/// is an exact solution of the discrete system with forcing
/// `v*' - Delta v* + (v*.grad_H v* + w d/dz v*)`.
#[derive(Debug, Clone)]
pub struct Manufactured {
    fields: [SpectralField; 3],
    ws: NonlinearWorkspace,
}

impl Manufactured {
    pub fn new(grid: &Grid, amplitude: f64, seed: u64) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(PeError::Config(format!("manufactured amplitude {amplitude} must be positive")));
        }
        let n = grid.nx().min(grid.ny());
        // quadratic products of |k| <= kmax stay strictly inside the 2/3 band
        let kmax = ((n as i64) - 1) / 6;
        let mmax = (grid.nz() - 1).min(3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut make = || {
            let f = project_galerkin(&SpectralField::random_band(grid, 2, &mut rng, kmax, mmax, 2.0));
            let norm = norms::l2_norm(&f);
            f.scaled(amplitude / norm)
        };
        let fields = [make(), make(), make()];
        Ok(Manufactured { fields, ws: NonlinearWorkspace::new(grid) })
    }

    pub fn grid(&self) -> &Grid {
        self.ws.grid()
    }

    fn envelopes(t: f64) -> [(f64, f64); 3] {
        [
            ((3.0 * t).cos(), -3.0 * (3.0 * t).sin()),
            ((-t).exp(), -(-t).exp()),
            (1.0 + (2.0 * t).sin(), 2.0 * (2.0 * t).cos()),
        ]
    }

    fn combine(&self, t: f64, derivative: bool) -> SpectralField {
        let mut out = SpectralField::zeros(self.grid(), 2);
        for (f, (e, de)) in self.fields.iter().zip(Self::envelopes(t)) {
            out.axpy(if derivative { de } else { e }, f);
        }
        out
    }

    pub fn value(&self, t: f64) -> SpectralField {
        self.combine(t, false)
    }

    pub fn derivative(&self, t: f64) -> SpectralField {
        self.combine(t, true)
    }

    /// `v*' - Delta v* + B(v*)`, before projection.
    pub fn forcing(&self, t: f64) -> Result<SpectralField> {
        let v = self.value(t);
        let mut f = self.derivative(t);
        f.axpy(-1.0, &v.laplacian());
        f.axpy(1.0, &self.ws.advect(&v, &v)?);
        Ok(f)
    }

    /// The same forcing evaluated pointwise on the collocation grid.
    pub fn pointwise_forcing(&self, t: f64) -> Result<PhysicalField> {
        let v = self.value(t);
        let mut f = self.derivative(t).to_physical();
        f.axpy(-1.0, &v.laplacian().to_physical());
        f.axpy(1.0, &self.ws.pointwise_transport(&v, &v)?);
        Ok(f)
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Zero,
    Mode { shape: SpectralField, amplitude: f64, decay: f64 },
    Manufactured(Box<Manufactured>),
}

/// A forcing specification bound to a grid.
#[derive(Debug, Clone)]
pub struct Forcing {
    spec: ForcingSpec,
    grid: Grid,
    kind: Kind,
}

impl Forcing {
    pub fn new(spec: &ForcingSpec, grid: &Grid) -> Result<Self> {
        let kind = match *spec {
            ForcingSpec::Zero => Kind::Zero,
            ForcingSpec::Mode { component, k, m, amplitude, decay } => {
                if component > 1 {
                    return Err(PeError::ModeOutOfRange(format!("component {component}")));
                }
                let mut shape = SpectralField::zeros(grid, 2);
                let c = if k == (0, 0) { 1.0 } else { 0.5 };
                shape.set_mode(component, k.0, k.1, m, Complex64::new(c, 0.0))?;
                Kind::Mode { shape: project_galerkin(&shape), amplitude, decay }
            }
            ForcingSpec::Manufactured { amplitude, seed } => {
                Kind::Manufactured(Box::new(Manufactured::new(grid, amplitude, seed)?))
            }
        };
        Ok(Forcing { spec: spec.clone(), grid: grid.clone(), kind })
    }

    pub fn zero(grid: &Grid) -> Self {
        Forcing { spec: ForcingSpec::Zero, grid: grid.clone(), kind: Kind::Zero }
    }

    pub fn spec(&self) -> &ForcingSpec {
        &self.spec
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, Kind::Zero)
    }

    pub fn manufactured(&self) -> Option<&Manufactured> {
        match &self.kind {
            Kind::Manufactured(m) => Some(m),
            _ => None,
        }
    }

    /// Unprojected forcing at time `t`.
    pub fn raw(&self, t: f64) -> Result<SpectralField> {
        match &self.kind {
            Kind::Zero => Ok(SpectralField::zeros(&self.grid, 2)),
            Kind::Mode { shape, amplitude, decay } => Ok(shape.scaled(amplitude * (-decay * t).exp())),
            Kind::Manufactured(m) => m.forcing(t),
        }
    }

    /// Projected forcing `P f(t)`.
    pub fn eval(&self, t: f64) -> Result<SpectralField> {
        match &self.kind {
            Kind::Zero => Ok(SpectralField::zeros(&self.grid, 2)),
            _ => Ok(project_galerkin(&self.raw(t)?)),
        }
    }

    /// Pointwise forcing on the collocation grid.
    pub fn pointwise(&self, t: f64) -> Result<PhysicalField> {
        match &self.kind {
            Kind::Manufactured(m) => m.pointwise_forcing(t),
            _ => Ok(self.raw(t)?.to_physical()),
        }
    }
}

/// `P f(t)` for the given specification.
pub fn forcing_eval(spec: &ForcingSpec, grid: &Grid, t: f64) -> Result<SpectralField> {
    Forcing::new(spec, grid)?.eval(t)
}
