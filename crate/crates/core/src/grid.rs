//! Discretization of the box `G x (-h, 0)` with `G = (0,1)^2`.
//!
//! Horizontally the fields are Fourier series on the unit torus, vertically
//! they are expanded in `cos(lambda_m z)` with `lambda_m = (m + 1/2) pi / h`.
//! Every vertical basis function satisfies `d/dz phi(0) = 0` and
//! `phi(-h) = 0`, so the ocean boundary conditions hold by construction.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{PeError, Result};

/// A rational number in `(0, 1]` giving the retained fraction of modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fraction {
    pub num: u32,
    pub den: u32,
}

impl Fraction {
    pub const TWO_THIRDS: Fraction = Fraction { num: 2, den: 3 };
    pub const ONE: Fraction = Fraction { num: 1, den: 1 };

    pub fn new(num: u32, den: u32) -> Result<Self> {
        if den == 0 || num == 0 || num > den {
            return Err(PeError::Config(format!(
                "dealias fraction {num}/{den} must lie in (0, 1]"
            )));
        }
        Ok(Fraction { num, den })
    }

    pub fn value(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }

    /// `|k| < fraction * n / 2`, evaluated in integer arithmetic.
    pub fn retains(self, k: i64, n: usize) -> bool {
        2 * k.unsigned_abs() * u64::from(self.den) < u64::from(self.num) * n as u64
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl std::str::FromStr for Fraction {
    type Err = PeError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || PeError::Config(format!("malformed fraction `{s}`"));
        match s.split_once('/') {
            Some((n, d)) => {
                let n = n.trim().parse().map_err(|_| bad())?;
                let d = d.trim().parse().map_err(|_| bad())?;
                Fraction::new(n, d)
            }
            None => {
                let n: u32 = s.trim().parse().map_err(|_| bad())?;
                Fraction::new(n, 1)
            }
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Number of vertical quadrature nodes used for a given vertical mode count.
///
/// Triple products of basis functions (the integrand of the energy balance
/// of the transport term) must integrate to round-off.
pub fn vertical_node_count(nz: usize) -> usize {
    4 * nz + 16
}

pub(crate) struct Tables {
    pub lambda: Vec<f64>,
    /// `(1/h) int_{-h}^0 phi_m dz = (-1)^m / (lambda_m h)`.
    pub avg: Vec<f64>,
    pub avg_norm2: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `cos(lambda_m z_q)`, row-major `[m][q]`.
    pub cos: Vec<f64>,
    /// `sin(lambda_m z_q)`, row-major `[m][q]`.
    pub sin: Vec<f64>,
    pub fft_x: Arc<dyn Fft<f64>>,
    pub ifft_x: Arc<dyn Fft<f64>>,
    pub fft_y: Arc<dyn Fft<f64>>,
    pub ifft_y: Arc<dyn Fft<f64>>,
}

/// Resolution and geometry of the periodic ocean box.
#[derive(Clone)]
pub struct Grid {
    nx: usize,
    ny: usize,
    nz: usize,
    depth: f64,
    dealias: Fraction,
    tables: Arc<Tables>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("nz", &self.nz)
            .field("h", &self.depth)
            .field("dealias", &self.dealias)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.nz == other.nz
            && self.depth == other.depth
            && self.dealias == other.dealias
    }
}

impl Grid {
    pub fn new(nx: usize, ny: usize, nz: usize, depth: f64) -> Result<Self> {
        Self::with_dealias(nx, ny, nz, depth, Fraction::TWO_THIRDS)
    }

    pub fn with_dealias(
        nx: usize,
        ny: usize,
        nz: usize,
        depth: f64,
        dealias: Fraction,
    ) -> Result<Self> {
        if nx < 4 || ny < 4 || nx % 2 != 0 || ny % 2 != 0 {
            return Err(PeError::Config(format!(
                "horizontal mode counts must be even and >= 4 (got {nx} x {ny})"
            )));
        }
        if nz < 2 {
            return Err(PeError::Config(format!(
                "vertical mode count must be >= 2 (got {nz})"
            )));
        }
        if !(depth > 0.0 && depth.is_finite()) {
            return Err(PeError::Config(format!("layer depth must be > 0 (got {depth})")));
        }
        let lambda: Vec<f64> = (0..nz).map(|m| (m as f64 + 0.5) * PI / depth).collect();
        let avg: Vec<f64> = lambda
            .iter()
            .enumerate()
            .map(|(m, l)| if m % 2 == 0 { 1.0 } else { -1.0 } / (l * depth))
            .collect();
        let avg_norm2 = avg.iter().map(|a| a * a).sum();

        let nq = vertical_node_count(nz);
        let (x, w) = gauss_legendre(nq);
        let nodes: Vec<f64> = x.iter().map(|x| 0.5 * depth * (x - 1.0)).collect();
        let weights: Vec<f64> = w.iter().map(|w| 0.5 * depth * w).collect();
        let mut cos = Vec::with_capacity(nz * nq);
        let mut sin = Vec::with_capacity(nz * nq);
        for l in &lambda {
            for z in &nodes {
                cos.push((l * z).cos());
                sin.push((l * z).sin());
            }
        }
        let mut planner = FftPlanner::new();
        let tables = Tables {
            lambda,
            avg,
            avg_norm2,
            nodes,
            weights,
            cos,
            sin,
            fft_x: planner.plan_fft_forward(nx),
            ifft_x: planner.plan_fft_inverse(nx),
            fft_y: planner.plan_fft_forward(ny),
            ifft_y: planner.plan_fft_inverse(ny),
        };
        Ok(Grid { nx, ny, nz, depth, dealias, tables: Arc::new(tables) })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    /// Layer depth `h`.
    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn dealias(&self) -> Fraction {
        self.dealias
    }

    /// Number of vertical quadrature nodes.
    pub fn nq(&self) -> usize {
        self.tables.nodes.len()
    }

    pub fn horizontal_len(&self) -> usize {
        self.nx * self.ny
    }

    pub(crate) fn tables(&self) -> &Tables {
        &self.tables
    }

    /// Vertical wavenumber `lambda_m = (m + 1/2) pi / h`.
    pub fn lambda(&self, m: usize) -> f64 {
        self.tables.lambda[m]
    }

    /// Vertical average of `phi_m`, i.e. `(-1)^m / (lambda_m h)`.
    pub fn basis_average(&self, m: usize) -> f64 {
        self.tables.avg[m]
    }

    pub fn basis_averages(&self) -> &[f64] {
        &self.tables.avg
    }

    /// `sum_m basis_average(m)^2`.
    pub fn basis_average_norm2(&self) -> f64 {
        self.tables.avg_norm2
    }

    /// Vertical quadrature nodes in `(-h, 0)`.
    pub fn z_nodes(&self) -> &[f64] {
        &self.tables.nodes
    }

    /// Vertical quadrature weights; positive and summing to `h`.
    pub fn z_weights(&self) -> &[f64] {
        &self.tables.weights
    }

    pub fn x_node(&self, i: usize) -> f64 {
        i as f64 / self.nx as f64
    }

    pub fn y_node(&self, j: usize) -> f64 {
        j as f64 / self.ny as f64
    }

    /// Signed wavenumber of FFT index `i` along an axis of length `n`.
    /// The Nyquist index maps to `+n/2`.
    pub fn wavenumber(i: usize, n: usize) -> i64 {
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// FFT index of a signed wavenumber, if it is representable.
    pub fn index_of(k: i64, n: usize) -> Option<usize> {
        let half = (n / 2) as i64;
        if k > half || k < -half + 1 {
            if k == -half {
                return Some(half as usize);
            }
            return None;
        }
        Some(k.rem_euclid(n as i64) as usize)
    }

    /// Wavenumber pair of horizontal index `(ix, iy)`.
    pub fn k_of(&self, ix: usize, iy: usize) -> (i64, i64) {
        (Self::wavenumber(ix, self.nx), Self::wavenumber(iy, self.ny))
    }

    /// Wavenumber used for first derivatives: the Nyquist index has no
    /// real-valued derivative and is mapped to zero.
    pub fn derivative_k(&self, ix: usize, iy: usize) -> (f64, f64) {
        let kx = if 2 * ix == self.nx { 0 } else { Self::wavenumber(ix, self.nx) };
        let ky = if 2 * iy == self.ny { 0 } else { Self::wavenumber(iy, self.ny) };
        (kx as f64, ky as f64)
    }

    /// `4 pi^2 |k|^2` at horizontal index `(ix, iy)`.
    pub fn horizontal_laplace_symbol(&self, ix: usize, iy: usize) -> f64 {
        let (kx, ky) = self.k_of(ix, iy);
        4.0 * PI * PI * ((kx * kx + ky * ky) as f64)
    }

    /// Index of the mode conjugate to `(ix, iy)`.
    pub fn conjugate_index(&self, ix: usize, iy: usize) -> (usize, usize) {
        ((self.nx - ix) % self.nx, (self.ny - iy) % self.ny)
    }

    /// Whether the horizontal mode survives the dealiasing mask.
    pub fn retained(&self, ix: usize, iy: usize) -> bool {
        let (kx, ky) = self.k_of(ix, iy);
        self.dealias.retains(kx, self.nx) && self.dealias.retains(ky, self.ny)
    }

    /// Same geometry with the horizontal resolution multiplied by `factor`.
    pub fn refined_horizontally(&self, factor: usize) -> Result<Grid> {
        Grid::with_dealias(self.nx * factor, self.ny * factor, self.nz, self.depth, self.dealias)
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(PeError::Shape(format!("grid {self:?} differs from {other:?}")))
        }
    }

    pub(crate) fn spectral_len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub(crate) fn physical_len(&self) -> usize {
        self.nx * self.ny * self.nq()
    }

    pub(crate) fn fft2(&self, plane: &mut [Complex64], inverse: bool) {
        let t = &self.tables;
        let (fx, fy) = if inverse { (&t.ifft_x, &t.ifft_y) } else { (&t.fft_x, &t.fft_y) };
        // plane is row-major [ix][iy]: rows are contiguous along y
        fy.process(plane);
        let mut col = vec![Complex64::new(0.0, 0.0); self.nx];
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                col[ix] = plane[ix * self.ny + iy];
            }
            fx.process(&mut col);
            for ix in 0..self.nx {
                plane[ix * self.ny + iy] = col[ix];
            }
        }
    }
}
