//! Energy-type quantities along a trajectory, the barotropic/baroclinic
//! split of the momentum equation, and decay / Gronwall monitoring.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{PeError, Result};
use crate::evolution::TrajectoryLedger;
use crate::field::{bottom_shear, diagnostic_w, PhysicalField, SpectralField};
use crate::forcing::Forcing;
use crate::grid::Grid;
use crate::nonlinear::NonlinearWorkspace;
use crate::norms;
use crate::projection::{project_galerkin_with_pressure, SurfacePressure};

/// Ledger column names, in CSV order.
pub const LEDGER_COLUMNS: [&str; 15] = [
    "t", "E2", "D2", "gradHbar", "vz2", "tilde4", "gradpi", "vz3", "dtv2", "H1", "H2", "gradvz2", "tilde_grad2",
    "work", "split_res",
];

/// Norms of one state. Squared quantities are stored squared, as named.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub t: f64,
    /// `||v||^2`
    pub e2: f64,
    /// `||grad v||^2`
    pub d2: f64,
    /// `||grad_H vbar||^2` over the surface
    pub grad_h_bar: f64,
    /// `||v_z||^2`
    pub vz2: f64,
    /// `||v - vbar||_4^4`
    pub tilde4: f64,
    /// `||grad_H pi||^2` over the surface
    pub gradpi: f64,
    /// `||v_z||_3^3`
    pub vz3: f64,
    /// `||d/dt v||^2` from differences of neighbouring samples
    pub dtv2: f64,
    pub h1: f64,
    pub h2: f64,
    /// `||grad v_z||^2`
    pub gradvz2: f64,
    /// `|| |v~| |grad v~| ||^2`
    pub tilde_grad2: f64,
    /// `<P f, v>`
    pub work: f64,
    /// larger of the barotropic and baroclinic residual norms
    pub split_res: f64,
}

impl EstimateRecord {
    pub fn zero(t: f64) -> Self {
        EstimateRecord { t, ..Default::default() }
    }

    pub fn values(&self) -> [f64; 15] {
        [
            self.t,
            self.e2,
            self.d2,
            self.grad_h_bar,
            self.vz2,
            self.tilde4,
            self.gradpi,
            self.vz3,
            self.dtv2,
            self.h1,
            self.h2,
            self.gradvz2,
            self.tilde_grad2,
            self.work,
            self.split_res,
        ]
    }

    pub fn from_values(v: &[f64]) -> Result<Self> {
        if v.len() != LEDGER_COLUMNS.len() {
            return Err(PeError::Format(format!("expected {} columns, got {}", LEDGER_COLUMNS.len(), v.len())));
        }
        Ok(EstimateRecord {
            t: v[0],
            e2: v[1],
            d2: v[2],
            grad_h_bar: v[3],
            vz2: v[4],
            tilde4: v[5],
            gradpi: v[6],
            vz3: v[7],
            dtv2: v[8],
            h1: v[9],
            h2: v[10],
            gradvz2: v[11],
            tilde_grad2: v[12],
            work: v[13],
            split_res: v[14],
        })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        LEDGER_COLUMNS.iter().position(|c| *c == name).map(|i| self.values()[i])
    }

    /// Every entry except `t` and `work` is a norm: finite and `>= 0`.
    pub fn is_valid(&self) -> bool {
        self.values()
            .iter()
            .enumerate()
            .all(|(i, v)| v.is_finite() && (i == 0 || i == 13 || *v >= 0.0))
    }
}

fn lift(g: &Grid, components: usize, plane: &[f64]) -> PhysicalField {
    let nq = g.nq();
    let values = plane.iter().flat_map(|v| std::iter::repeat(*v).take(nq)).collect();
    PhysicalField::from_values(g, components, values).expect("plane size")
}

fn plane_l2(g: &Grid, values: &[f64]) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() / g.horizontal_len() as f64).sqrt()
}

fn sub_planes(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `v - vbar` on the collocation grid, with `vbar` from the basis averages.
fn fluctuation_physical(v: &SpectralField) -> PhysicalField {
    let mut out = v.to_physical();
    out.add_plane(&v.vertical_average().to_plane(), -1.0);
    out
}

/// `||v - vbar||_4^4` with `vbar` from the basis averages and, second, from
/// vertical quadrature of the sampled field.
pub fn tilde4_two_ways(v: &SpectralField) -> Result<(f64, f64)> {
    let a = norms::lp_norm(&fluctuation_physical(v), 4.0)?.powi(4);
    let vp = v.to_physical();
    let mut t = vp.clone();
    t.add_plane(&vp.vertical_average(), -1.0);
    let b = norms::lp_norm(&t, 4.0)?.powi(4);
    Ok((a, b))
}

/// `(sum over modes of w(k, m) |c|^2) h/2`.
fn weighted_sq(v: &SpectralField, w: impl Fn(f64, f64) -> f64) -> f64 {
    let g = v.grid();
    let nz = g.nz();
    let mut sum = 0.0;
    for (col_idx, col) in v.coeffs().chunks(nz).enumerate() {
        let hidx = col_idx % g.horizontal_len();
        let kk = g.horizontal_laplace_symbol(hidx / g.ny(), hidx % g.ny());
        for (m, c) in col.iter().enumerate() {
            sum += w(kk, g.lambda(m).powi(2)) * c.norm_sqr();
        }
    }
    0.5 * g.depth() * sum
}

/// Pointwise `a . grad_H b` for two-component fields given `d/dx b`, `d/dy b`.
fn transport(a: &PhysicalField, bx: &PhysicalField, by: &PhysicalField) -> PhysicalField {
    let n = a.grid().physical_len();
    let (av, xv, yv) = (a.values(), bx.values(), by.values());
    let mut out = PhysicalField::zeros(a.grid(), 2);
    for c in 0..2 {
        for p in 0..n {
            out.values_mut()[c * n + p] = av[p] * xv[c * n + p] + av[n + p] * yv[c * n + p];
        }
    }
    out
}

fn scale_each(w: &PhysicalField, f: &PhysicalField) -> PhysicalField {
    let n = w.grid().physical_len();
    let mut out = f.clone();
    for c in 0..f.components() {
        for p in 0..n {
            out.values_mut()[c * n + p] *= w.values()[p];
        }
    }
    out
}

/// State-only quantities; `dtv2`, `work` and `split_res` are left at zero.
pub fn record(v: &SpectralField, t: f64, pi: &SurfacePressure) -> Result<EstimateRecord> {
    let g = v.grid();
    let vbar = v.vertical_average();
    let grad_h_bar = vbar
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let h = i % g.horizontal_len();
            g.horizontal_laplace_symbol(h / g.ny(), h % g.ny()) * c.norm_sqr()
        })
        .sum();
    let vt = fluctuation_physical(v);
    let vz = v.dz_physical();
    let tilde_grad2 = {
        let gx = v.horizontal_derivative(0);
        let gy = v.horizontal_derivative(1);
        let mut tx = gx.to_physical();
        tx.add_plane(&gx.vertical_average().to_plane(), -1.0);
        let mut ty = gy.to_physical();
        ty.add_plane(&gy.vertical_average().to_plane(), -1.0);
        let n = g.physical_len();
        let mut pw = PhysicalField::zeros(g, 1);
        for p in 0..n {
            let mut grad2 = 0.0;
            let mut mag2 = 0.0;
            for c in 0..2 {
                grad2 += tx.values()[c * n + p].powi(2) + ty.values()[c * n + p].powi(2) + vz.values()[c * n + p].powi(2);
                mag2 += vt.values()[c * n + p].powi(2);
            }
            pw.values_mut()[p] = (mag2 * grad2).sqrt();
        }
        norms::lp_norm(&pw, 2.0)?.powi(2)
    };
    Ok(EstimateRecord {
        t,
        e2: norms::l2_norm(v).powi(2),
        d2: norms::gradient_norm_sq(v),
        grad_h_bar,
        vz2: weighted_sq(v, |_, l2| l2),
        tilde4: norms::lp_norm(&vt, 4.0)?.powi(4),
        gradpi: pi.gradient_norm_sq(),
        vz3: norms::lp_norm(&vz, 3.0)?.powi(3),
        dtv2: 0.0,
        h1: norms::sobolev_norm_sq(v, 1.0),
        h2: norms::sobolev_norm_sq(v, 2.0),
        gradvz2: weighted_sq(v, |kk, l2| (kk + l2) * l2),
        tilde_grad2,
        work: 0.0,
        split_res: 0.0,
    })
}

/// Surface pressure of the dynamics at state `v` under raw forcing `f`:
/// the gradient part of `Delta v + f - (v.grad_H v + w d/dz v)`.
pub fn dynamic_pressure(ws: &NonlinearWorkspace, v: &SpectralField, f: &SpectralField) -> Result<SurfacePressure> {
    let mut r = v.laplacian();
    r.axpy(1.0, f);
    r.axpy(-1.0, &ws.advect(v, v)?);
    Ok(project_galerkin_with_pressure(&r)?.1)
}

/// Complete record at a trajectory sample, given the time derivative
/// estimate `dtv`.
pub fn record_sample(
    ws: &NonlinearWorkspace,
    forcing: &Forcing,
    v: &SpectralField,
    t: f64,
    dtv: &SpectralField,
) -> Result<EstimateRecord> {
    let raw = forcing.raw(t)?;
    let pi = dynamic_pressure(ws, v, &raw)?;
    let mut rec = record(v, t, &pi)?;
    rec.dtv2 = norms::l2_norm(dtv).powi(2);
    if !forcing.is_zero() {
        rec.work = norms::inner(&forcing.eval(t)?, v);
    }
    let split = split_residuals(ws, v, dtv, &pi, &forcing.pointwise(t)?)?;
    rec.split_res = split.barotropic.max(split.baroclinic);
    Ok(rec)
}

/// Residual norms of the vertically averaged equation (on the surface) and
/// of the fluctuation equation (in the volume), evaluated pointwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitResiduals {
    pub barotropic: f64,
    pub baroclinic: f64,
    /// Residual of the full momentum equation.
    pub full: f64,
    /// `|| Rbar + R~ - R ||`: the split reassembles the full equation.
    pub recombination: f64,
    /// `|| Rbar - avg R ||`: the averaged equation is the average of the
    /// full one.
    pub consistency: f64,
}

/// Evaluates
/// `Rbar = dt vbar - Delta_H vbar + grad_H pi + vbar.grad_H vbar
///        + avg(v~.grad_H v~ + div_H v v~) + v_z(-h)/h - avg f` and
/// `R~ = dt v~ - Delta v~ + v~.grad_H v~ + w v_z + vbar.grad_H v~ + v~.grad_H vbar
///      - avg(v~.grad_H v~ + div_H v v~) - v_z(-h)/h - (f - avg f)`
/// on the collocation grid, together with the full residual
/// `R = dt v - Delta v + v.grad_H v + w v_z + grad_H pi - f`.
pub fn split_residuals(
    ws: &NonlinearWorkspace,
    v: &SpectralField,
    dtv: &SpectralField,
    pi: &SurfacePressure,
    f: &PhysicalField,
) -> Result<SplitResiduals> {
    let g = ws.grid();
    g.check_same(v.grid())?;
    g.check_same(dtv.grid())?;
    g.check_same(f.grid())?;
    let h = g.depth();

    let vbar_s = v.vertical_average();
    let vbar = vbar_s.to_plane();
    let vbar_x = vbar_s.horizontal_derivative(0).to_plane();
    let vbar_y = vbar_s.horizontal_derivative(1).to_plane();
    let vp = v.to_physical();
    let vx = v.horizontal_derivative(0).to_physical();
    let vy = v.horizontal_derivative(1).to_physical();
    let mut vt = vp.clone();
    vt.add_plane(&vbar, -1.0);
    let mut vtx = vx.clone();
    vtx.add_plane(&vbar_x, -1.0);
    let mut vty = vy.clone();
    vty.add_plane(&vbar_y, -1.0);
    let div = v.horizontal_divergence().to_physical();
    let w = diagnostic_w(v)?;
    let vz = v.dz_physical();
    let lap = v.laplacian().to_physical();
    let lap_bar = vbar_s.horizontal_laplacian().to_plane();
    let dt = dtv.to_physical();
    let dt_bar = dtv.vertical_average().to_plane();
    let grad_pi = pi.gradient().to_plane();
    let f_bar = f.vertical_average();
    let shear_b = bottom_shear(v).to_plane();
    let w_vz = scale_each(&w, &vz);

    // q = v~.grad_H v~ + div_H v v~
    let mut q = transport(&vt, &vtx, &vty);
    q.axpy(1.0, &scale_each(&div, &vt));
    let q_bar = q.vertical_average();

    let bar_adv = {
        let vb = lift(g, 2, vbar.values());
        transport(&vb, &lift(g, 2, vbar_x.values()), &lift(g, 2, vbar_y.values())).vertical_average()
    };
    let n2 = 2 * g.horizontal_len();
    let mut r_bar = vec![0.0; n2];
    for i in 0..n2 {
        r_bar[i] = dt_bar.values()[i] - lap_bar.values()[i] + grad_pi.values()[i] + bar_adv.values()[i]
            + q_bar.values()[i]
            + shear_b.values()[i] / h
            - f_bar.values()[i];
    }

    // R~
    let mut r_tilde = dt.clone();
    r_tilde.add_plane(&dt_bar, -1.0);
    r_tilde.axpy(-1.0, &lap);
    r_tilde.add_plane(&lap_bar, 1.0);
    r_tilde.axpy(1.0, &transport(&vt, &vtx, &vty));
    r_tilde.axpy(1.0, &w_vz);
    let vb = lift(g, 2, vbar.values());
    r_tilde.axpy(1.0, &transport(&vb, &vtx, &vty));
    r_tilde.axpy(1.0, &transport(&vt, &lift(g, 2, vbar_x.values()), &lift(g, 2, vbar_y.values())));
    r_tilde.add_plane(&q_bar, -1.0);
    r_tilde.add_plane(&shear_b, -1.0 / h);
    r_tilde.axpy(-1.0, f);
    r_tilde.add_plane(&f_bar, 1.0);

    // R
    let mut r = dt;
    r.axpy(-1.0, &lap);
    r.axpy(1.0, &transport(&vp, &vx, &vy));
    r.axpy(1.0, &w_vz);
    r.add_plane(&grad_pi, 1.0);
    r.axpy(-1.0, f);

    let mut recomb = r_tilde.clone();
    recomb.axpy(1.0, &lift(g, 2, &r_bar));
    recomb.axpy(-1.0, &r);
    let r_avg = r.vertical_average();

    Ok(SplitResiduals {
        barotropic: plane_l2(g, &r_bar),
        baroclinic: norms::lp_norm(&r_tilde, 2.0)?,
        full: norms::lp_norm(&r, 2.0)?,
        recombination: norms::lp_norm(&recomb, 2.0)?,
        consistency: plane_l2(g, &sub_planes(&r_bar, r_avg.values())),
    })
}

/// Trapezoid-rule running integral of `y` over `t`.
fn running_integral(t: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; t.len()];
    for i in 1..t.len() {
        out[i] = out[i - 1] + 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    /// `E2(t) + 2 int D2 - 2 int <Pf, v> - E2(0)` per sample.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// `max_residual / E2(0)` (absolute when `E2(0) = 0`).
    pub relative: f64,
    /// `E2` strictly decreasing between every pair of samples.
    pub strictly_decreasing: bool,
}

pub fn energy_budget(ledger: &TrajectoryLedger) -> EnergyReport {
    let r = &ledger.records;
    let t: Vec<f64> = r.iter().map(|x| x.t).collect();
    let d = running_integral(&t, &r.iter().map(|x| x.d2).collect::<Vec<_>>());
    let w = running_integral(&t, &r.iter().map(|x| x.work).collect::<Vec<_>>());
    let e0 = r.first().map_or(0.0, |x| x.e2);
    let residuals: Vec<f64> = r.iter().enumerate().map(|(i, x)| x.e2 + 2.0 * d[i] - 2.0 * w[i] - e0).collect();
    let max_residual = residuals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let strictly_decreasing = r.len() > 1 && r.windows(2).all(|p| p[1].e2 < p[0].e2);
    EnergyReport {
        residuals,
        max_residual,
        relative: if e0 > 0.0 { max_residual / e0 } else { max_residual },
        strictly_decreasing,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GronwallReport {
    /// `Phi = 8 gradHbar + vz2 + (C3/4) tilde4`.
    pub phi: Vec<f64>,
    pub phi_max: f64,
    /// `Phi(0) exp(int K1)` with the unit-constant surrogate
    /// `K1 = (1 + ||v|| + ||v||^2)(||v||_{H1}^{2/3} + ||v||_{H1} + ||v||_{H1}^2)`.
    pub bound: Vec<f64>,
    /// `max Phi / bound`; at most 1 when the Gronwall bound dominates.
    pub max_ratio: f64,
    pub dominated: bool,
    /// `int (gradpi + ||grad v_z||^2 + C3 || |v~| |grad v~| ||^2)`.
    pub dissipation_integral: f64,
    /// Largest ratio between neighbouring nonzero `Phi` samples.
    pub max_jump: f64,
}

pub fn gronwall_monitor(ledger: &TrajectoryLedger, c3: f64) -> GronwallReport {
    let r = &ledger.records;
    let t: Vec<f64> = r.iter().map(|x| x.t).collect();
    let phi: Vec<f64> = r.iter().map(|x| 8.0 * x.grad_h_bar + x.vz2 + 0.25 * c3 * x.tilde4).collect();
    let k1: Vec<f64> = r
        .iter()
        .map(|x| {
            let n = x.e2.sqrt();
            (1.0 + n + x.e2) * (x.h1.powf(1.0 / 3.0) + x.h1.sqrt() + x.h1)
        })
        .collect();
    let ik = running_integral(&t, &k1);
    let phi0 = phi.first().copied().unwrap_or(0.0);
    let bound: Vec<f64> = ik.iter().map(|i| phi0 * i.exp()).collect();
    let max_ratio = phi
        .iter()
        .zip(&bound)
        .map(|(p, b)| if *b > 0.0 { p / b } else if *p > 0.0 { f64::INFINITY } else { 0.0 })
        .fold(0.0, f64::max);
    let diss: Vec<f64> = r.iter().map(|x| x.gradpi + x.gradvz2 + c3 * x.tilde_grad2).collect();
    let dissipation_integral = running_integral(&t, &diss).last().copied().unwrap_or(0.0);
    let max_jump = phi
        .windows(2)
        .filter(|p| p[0] > 0.0 && p[1] > 0.0)
        .map(|p| (p[1] / p[0]).max(p[0] / p[1]))
        .fold(1.0, f64::max);
    GronwallReport {
        phi_max: phi.iter().copied().fold(0.0, f64::max),
        dominated: max_ratio <= 1.0 + 1e-12,
        phi,
        bound,
        max_ratio,
        dissipation_integral,
        max_jump,
    }
}

/// Least-squares fit `log q(t) = log amplitude - rate t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub amplitude: f64,
    /// RMS deviation of `log q` from the fitted line.
    pub residual: f64,
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// Fits the exponential decay of ledger column `quantity` over samples
/// with `t >= tail_start`. Samples after the first non-positive value are
/// ignored.
pub fn decay_fit(ledger: &TrajectoryLedger, quantity: &str, tail_start: f64) -> Result<DecayFit> {
    if quantity == "t" {
        return Err(PeError::Domain("cannot fit the time column".into()));
    }
    let mut pts = Vec::new();
    for rec in &ledger.records {
        let q = rec.get(quantity).ok_or_else(|| PeError::Domain(format!("unknown ledger quantity `{quantity}`")))?;
        if !(q > 0.0) {
            break;
        }
        if rec.t >= tail_start {
            pts.push((rec.t, q.ln()));
        }
    }
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(PeError::Domain(format!(
            "decay fit of `{quantity}` needs {MIN_FIT_SAMPLES} positive samples in the tail, found {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mt;
    let residual = (pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(DecayFit { rate: -slope, amplitude: icpt.exp(), residual, samples: pts.len() })
}

/// Summary written by `pe diagnose`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DiagnosticReport {
    pub energy_residual_max: f64,
    pub phi_max: f64,
    pub decay_rates: BTreeMap<String, f64>,
    pub split_residual_max: f64,
}

/// Quantities whose decay rate is reported.
pub const DECAY_QUANTITIES: [&str; 4] = ["E2", "D2", "H1", "vz2"];

pub fn diagnose(ledger: &TrajectoryLedger, c3: f64) -> DiagnosticReport {
    let energy = energy_budget(ledger);
    let gronwall = gronwall_monitor(ledger, c3);
    let tail = ledger.records.last().map_or(0.0, |r| 0.5 * r.t);
    let mut decay_rates = BTreeMap::new();
    for q in DECAY_QUANTITIES {
        if let Ok(fit) = decay_fit(ledger, q, tail) {
            decay_rates.insert(q.to_string(), fit.rate);
        }
    }
    DiagnosticReport {
        energy_residual_max: energy.relative,
        phi_max: gronwall.phi_max,
        decay_rates,
        split_residual_max: ledger.records.iter().map(|r| r.split_res).fold(0.0, f64::max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::{ForcingSpec, Manufactured};
    use crate::projection::project_galerkin;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn constrained(g: &Grid, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        project_galerkin(&SpectralField::random_band(g, 2, &mut rng, 3, g.nz(), 1.5)).dealiased()
    }

    fn ledger(points: &[(f64, f64)]) -> TrajectoryLedger {
        let mut l = TrajectoryLedger::default();
        for &(t, e2) in points {
            l.push(EstimateRecord { t, e2, ..Default::default() }).unwrap();
        }
        l
    }

    #[test]
    fn zero_state_gives_zero_record() {
        let g = Grid::new(8, 8, 4, 1.0).unwrap();
        let ws = NonlinearWorkspace::new(&g);
        let v = SpectralField::zeros(&g, 2);
        let rec = record_sample(&ws, &Forcing::zero(&g), &v, 0.5, &v).unwrap();
        assert_eq!(rec, EstimateRecord::zero(0.5));
        let s = split_residuals(&ws, &v, &v, &SurfacePressure::zeros(&g), &PhysicalField::zeros(&g, 2)).unwrap();
        assert_eq!((s.barotropic, s.baroclinic, s.full), (0.0, 0.0, 0.0));
    }

    #[test]
    fn record_matches_quadrature_and_bounds() {
        let g = Grid::new(12, 12, 6, 1.0).unwrap();
        let v = constrained(&g, 4);
        let rec = record(&v, 0.0, &SurfacePressure::zeros(&g)).unwrap();
        assert!(rec.is_valid());
        let vz2 = norms::lp_norm(&v.dz_physical(), 2.0).unwrap().powi(2);
        assert!((rec.vz2 - vz2).abs() <= 1e-10 * vz2);
        let e2 = norms::lp_norm(&v.to_physical(), 2.0).unwrap().powi(2);
        assert!((rec.e2 - e2).abs() <= 1e-10 * e2);
        // Poincare: D2 >= lambda_0^2 E2
        assert!(rec.d2 >= g.lambda(0).powi(2) * rec.e2 * (1.0 - 1e-10));
        let (a, b) = tilde4_two_ways(&v).unwrap();
        assert!((a - b).abs() <= 1e-9 * a.max(1e-300));
    }

    #[test]
    fn recombination_and_consistency_hold_for_any_state() {
        let g = Grid::new(12, 12, 5, 1.0).unwrap();
        let ws = NonlinearWorkspace::new(&g);
        let v = constrained(&g, 1);
        let dtv = constrained(&g, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = crate::field::AveragedField::from_coeffs(
            &g,
            1,
            SpectralField::random_band(&g, 1, &mut rng, 3, 0, 1.0).vertical_average().coeffs().to_vec(),
        )
        .unwrap();
        let pi = SurfacePressure::from_averaged(p).unwrap();
        let f = constrained(&g, 3).to_physical();
        let s = split_residuals(&ws, &v, &dtv, &pi, &f).unwrap();
        assert!(s.full > 0.0);
        assert!(s.recombination <= 1e-9 * s.full);
        assert!(s.consistency <= 1e-9 * s.full);
    }

    #[test]
    fn manufactured_solution_has_vanishing_split_residuals() {
        let g = Grid::new(16, 16, 6, 1.0).unwrap();
        let ws = NonlinearWorkspace::new(&g);
        let m = Manufactured::new(&g, 0.5, 2).unwrap();
        let t = 0.3;
        let v = m.value(t);
        let f = m.pointwise_forcing(t).unwrap();
        let s = split_residuals(&ws, &v, &m.derivative(t), &SurfacePressure::zeros(&g), &f).unwrap();
        let scale = norms::lp_norm(&f, 2.0).unwrap();
        assert!(s.barotropic <= 1e-6 * scale && s.baroclinic <= 1e-6 * scale, "{s:?}");
        // the forcing split: Rbar with f = 0 reproduces avg f
        let z = PhysicalField::zeros(&g, 2);
        let s0 = split_residuals(&ws, &v, &m.derivative(t), &SurfacePressure::zeros(&g), &z).unwrap();
        let fbar = plane_l2(&g, f.vertical_average().values());
        assert!((s0.barotropic - fbar).abs() <= 1e-6 * scale);
    }

    #[test]
    fn record_sample_with_manufactured_forcing() {
        let g = Grid::new(8, 8, 4, 1.0).unwrap();
        let ws = NonlinearWorkspace::new(&g);
        let forcing = Forcing::new(&ForcingSpec::Manufactured { amplitude: 0.2, seed: 5 }, &g).unwrap();
        let m = forcing.manufactured().unwrap();
        let rec = record_sample(&ws, &forcing, &m.value(0.1), 0.1, &m.derivative(0.1)).unwrap();
        assert!(rec.is_valid());
        let scale = norms::l2_norm(&forcing.raw(0.1).unwrap());
        assert!(rec.split_res <= 1e-9 * scale, "{}", rec.split_res);
    }

    #[test]
    fn decay_fit_recovers_rate() {
        let pts: Vec<(f64, f64)> = (0..40).map(|i| (0.1 * i as f64, 3.0 * (-2.5 * 0.1 * i as f64).exp())).collect();
        let fit = decay_fit(&ledger(&pts), "E2", 0.0).unwrap();
        assert!((fit.rate - 2.5).abs() < 1e-12 && (fit.amplitude - 3.0).abs() < 1e-12);
        let flat: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 1.5)).collect();
        assert!(decay_fit(&ledger(&flat), "E2", 0.0).unwrap().rate.abs() < 1e-14);
        // a zero sample truncates the fit to the positive prefix
        let mut cut = pts.clone();
        cut[30].1 = 0.0;
        assert_eq!(decay_fit(&ledger(&cut), "E2", 0.0).unwrap().samples, 30);
        assert!(decay_fit(&ledger(&pts[..5]), "E2", 0.0).is_err());
        assert!(decay_fit(&ledger(&pts), "nope", 0.0).is_err());
    }

    #[test]
    fn energy_budget_of_exact_exponential() {
        // E2 = e^{-2t}, D2 = e^{-2t}: identity holds up to trapezoid error
        let mut l = TrajectoryLedger::default();
        for i in 0..=1000 {
            let t = 1e-3 * i as f64;
            l.push(EstimateRecord { t, e2: (-2.0 * t).exp(), d2: (-2.0 * t).exp(), ..Default::default() }).unwrap();
        }
        let rep = energy_budget(&l);
        assert!(rep.relative < 1e-6 && rep.strictly_decreasing);
    }

    #[test]
    fn gronwall_of_zero_field_is_zero() {
        let l = ledger(&[(0.0, 0.0), (1.0, 0.0)]);
        let rep = gronwall_monitor(&l, 1.0);
        assert_eq!(rep.phi_max, 0.0);
        assert!(rep.dominated);
    }
}
