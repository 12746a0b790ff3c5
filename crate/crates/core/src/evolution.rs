//! Time integration: Picard iteration on the mild (Duhamel) formulation at
//! a fixed horizon, and a Crank-Nicolson / Adams-Bashforth IMEX stepper for
//! long runs. Both work in the eigenbasis of `A`, where the semigroup and
//! the implicit solves are diagonal.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::diagnostics::{record_sample, EstimateRecord, LEDGER_COLUMNS};
use crate::error::{PeError, Result};
use crate::field::SpectralField;
use crate::forcing::Forcing;
use crate::grid::gauss_legendre;
use crate::nonlinear::NonlinearWorkspace;
use crate::norms;
use crate::stokes::{ModalField, StokesOperator};

pub const LEDGER_HEADER: &str = "# hydropde-ledger v1";

/// Estimate records at strictly increasing sample times, plus the
/// checkpoints written along the way.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLedger {
    pub records: Vec<EstimateRecord>,
    pub checkpoints: Vec<(f64, String)>,
}

impl TrajectoryLedger {
    pub fn push(&mut self, rec: EstimateRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if !(rec.t > last.t) {
                return Err(PeError::Domain(format!("ledger time {} does not follow {}", rec.t, last.t)));
            }
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// CSV text: version line, `# checkpoint <t> <path>` lines, the column
    /// header, then one row per sample. Values use shortest round-trip
    /// formatting, so equal ledgers give identical bytes.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{LEDGER_HEADER}").unwrap();
        for (t, p) in &self.checkpoints {
            writeln!(s, "# checkpoint {t:e} {p}").unwrap();
        }
        writeln!(s, "{}", LEDGER_COLUMNS.join(",")).unwrap();
        for r in &self.records {
            let row: Vec<String> = r.values().iter().map(|v| format!("{v:e}")).collect();
            writeln!(s, "{}", row.join(",")).unwrap();
        }
        s
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == LEDGER_HEADER => {}
            _ => return Err(PeError::Format(format!("missing `{LEDGER_HEADER}` line"))),
        }
        let mut ledger = TrajectoryLedger::default();
        let mut header_seen = false;
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# checkpoint ") {
                let (t, p) = rest
                    .split_once(' ')
                    .ok_or_else(|| PeError::Parse { line: i + 1, msg: "malformed checkpoint line".into() })?;
                let t = t.parse().map_err(|_| PeError::Parse { line: i + 1, msg: format!("bad time `{t}`") })?;
                ledger.checkpoints.push((t, p.to_string()));
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            if !header_seen {
                if line != LEDGER_COLUMNS.join(",") {
                    return Err(PeError::Parse { line: i + 1, msg: "unexpected column header".into() });
                }
                header_seen = true;
                continue;
            }
            let vals = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| PeError::Parse { line: i + 1, msg: e.to_string() })?;
            let rec = EstimateRecord::from_values(&vals).map_err(|e| PeError::Parse { line: i + 1, msg: e.to_string() })?;
            ledger.push(rec).map_err(|e| PeError::Parse { line: i + 1, msg: e.to_string() })?;
        }
        if !header_seen {
            return Err(PeError::Format("ledger has no column header".into()));
        }
        Ok(ledger)
    }
}

/// Builds a ledger from stored samples, differentiating in time by
/// centered differences (one-sided at the ends).
pub fn ledger_from_samples(
    ws: &NonlinearWorkspace,
    forcing: &Forcing,
    samples: &[(f64, SpectralField)],
) -> Result<TrajectoryLedger> {
    let mut ledger = TrajectoryLedger::default();
    for i in 0..samples.len() {
        let dtv = time_difference(samples, i);
        ledger.push(record_sample(ws, forcing, &samples[i].1, samples[i].0, &dtv)?)?;
    }
    Ok(ledger)
}

fn time_difference(samples: &[(f64, SpectralField)], i: usize) -> SpectralField {
    let n = samples.len();
    if n < 2 {
        return SpectralField::zeros(samples[i].1.grid(), 2);
    }
    let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
    (&samples[b].1 - &samples[a].1).scaled(1.0 / (samples[b].0 - samples[a].0))
}

// ---------------------------------------------------------------------------
// Picard iteration

#[derive(Debug, Clone, PartialEq)]
pub struct PicardConfig {
    pub horizon: f64,
    /// Number of equal sampling subintervals of `[0, T]`.
    pub intervals: usize,
    /// Gauss-Legendre nodes per subinterval.
    pub nodes: usize,
    pub max_iterations: usize,
    /// Stop when the iterate change drops below `tolerance * k_m`.
    pub tolerance: f64,
    /// `k_m` above this value is reported as divergence.
    pub ceiling: f64,
    /// `false` drops the nonlinearity (pure Duhamel for the forcing).
    pub nonlinear: bool,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            horizon: 0.5,
            intervals: 50,
            nodes: 6,
            max_iterations: 20,
            tolerance: 1e-12,
            ceiling: 1e6,
            nonlinear: true,
        }
    }
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(PeError::Config(format!("Picard horizon {} must be positive", self.horizon)));
        }
        if self.nodes < 4 {
            return Err(PeError::Config(format!("Picard needs at least 4 quadrature nodes, got {}", self.nodes)));
        }
        if self.intervals == 0 || self.max_iterations == 0 {
            return Err(PeError::Config("Picard intervals and iterations must be positive".into()));
        }
        if !(self.tolerance > 0.0) || !(self.ceiling > 0.0) {
            return Err(PeError::Config("Picard tolerance and ceiling must be positive".into()));
        }
        Ok(())
    }
}

/// Exponent `gamma` of the iteration norm `sup_t t^{1-gamma} ||v(t)||_{H^{2 gamma}}`.
pub const PICARD_GAMMA: f64 = 0.75;

#[derive(Debug, Clone, PartialEq)]
pub struct PicardReport {
    /// `k_m` for every computed iterate, starting with `v_0`.
    pub k: Vec<f64>,
    /// Iteration-norm distance between consecutive iterates.
    pub changes: Vec<f64>,
    /// Number of Picard updates performed.
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    /// `|k_{m+1} - k_0| / k_m^2`, the observed constant in
    /// `k_{m+1} <= k_0 + C1 k_m^2`.
    pub c1_estimates: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PicardSolution {
    /// Subinterval endpoints `0 = t_0 < ... < t_n = T`.
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub report: PicardReport,
}

/// `J_n(z) = int_0^1 e^{-z(1-x)} x^n dx` for `n = 0..count`.
fn exp_moments(z: f64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    if z <= count as f64 {
        for (n, o) in out.iter_mut().enumerate() {
            // sum_i (-z)^i n! / (n+i+1)!
            let mut term = 1.0 / (n as f64 + 1.0);
            let mut s = term;
            let mut i = 0;
            while term.abs() > 1e-18 * s.abs() && i < 400 {
                i += 1;
                term *= -z / (n + i + 1) as f64;
                s += term;
            }
            *o = s;
        }
    } else {
        out[0] = -(-z).exp_m1() / z;
        for n in 1..count {
            out[n] = (1.0 - n as f64 * out[n - 1]) / z;
        }
    }
    out
}

/// Product-integration weights for `int_0^tau e^{-mu(tau - s)} g(s) ds`
/// with `g` the interpolant through values at the Gauss nodes of `[0, d]`.
struct DuhamelRule {
    /// Node positions in `[0, 1]`.
    xi: Vec<f64>,
    /// Monomial coefficients of the Lagrange basis: `l_q(x) = sum_n c[(n, q)] x^n`.
    lagrange: DMatrix<f64>,
    d: f64,
}

impl DuhamelRule {
    fn new(nodes: usize, d: f64) -> Self {
        let (x, _) = gauss_legendre(nodes);
        let xi: Vec<f64> = x.iter().map(|x| 0.5 * (x + 1.0)).collect();
        let v = DMatrix::from_fn(nodes, nodes, |r, n| xi[r].powi(n as i32));
        let lagrange = v.try_inverse().expect("Vandermonde of distinct nodes");
        DuhamelRule { xi, lagrange, d }
    }

    /// Targets: the interior nodes, then the right endpoint.
    fn targets(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.xi.iter().map(|x| x * self.d).collect();
        t.push(self.d);
        t
    }

    /// `weights[r * q + j]` for target `r`, node `j`.
    fn weights(&self, mu: f64) -> Vec<f64> {
        let q = self.xi.len();
        let targets = self.targets();
        let mut out = vec![0.0; targets.len() * q];
        for (r, &tau) in targets.iter().enumerate() {
            let j = exp_moments(mu * tau, q);
            let s = tau / self.d;
            for node in 0..q {
                let mut acc = 0.0;
                let mut sp = 1.0;
                for n in 0..q {
                    acc += self.lagrange[(n, node)] * sp * j[n];
                    sp *= s;
                }
                out[r * q + node] = tau * acc;
            }
        }
        out
    }
}

struct PicardPlan {
    op: StokesOperator,
    rule: DuhamelRule,
    /// Per modal slot: Duhamel weights, then `e^{-mu tau_r}`.
    weights: Vec<Vec<f64>>,
    decay: Vec<Vec<f64>>,
    intervals: usize,
}

impl PicardPlan {
    fn new(op: StokesOperator, cfg: &PicardConfig) -> Self {
        let d = cfg.horizon / cfg.intervals as f64;
        let rule = DuhamelRule::new(cfg.nodes, d);
        let targets = rule.targets();
        let (weights, decay): (Vec<_>, Vec<_>) = op
            .modal_eigenvalues()
            .par_iter()
            .map(|&mu| {
                if mu.is_nan() {
                    (Vec::new(), Vec::new())
                } else {
                    (rule.weights(mu), targets.iter().map(|t| (-mu * t).exp()).collect())
                }
            })
            .unzip();
        PicardPlan { op, rule, weights, decay, intervals: cfg.intervals }
    }

    fn nodes(&self) -> usize {
        self.rule.xi.len()
    }

    /// Node times, interval by interval: interior nodes then the endpoint.
    fn node_times(&self) -> Vec<f64> {
        let targets = self.rule.targets();
        let mut out = Vec::with_capacity(self.intervals * targets.len());
        for j in 0..self.intervals {
            let t0 = j as f64 * self.rule.d;
            out.extend(targets.iter().map(|t| t0 + t));
        }
        out
    }

    /// `v(t) = e^{-tA} a + int_0^t e^{-(t-s)A} g(s) ds` at every node, given
    /// `g` at the interior nodes (`g[j * q + node]`).
    fn propagate(&self, a: &ModalField, g: &[ModalField]) -> Vec<ModalField> {
        let q = self.nodes();
        let per = q + 1;
        let slots = a.coeffs().len();
        let mut out = vec![ModalField::zeros(a.grid()); self.intervals * per];
        // slot-major sweep keeps each slot's recursion independent
        let columns: Vec<Vec<Complex64>> = (0..slots)
            .into_par_iter()
            .map(|s| {
                let mut col = vec![Complex64::new(0.0, 0.0); self.intervals * per];
                if self.weights[s].is_empty() {
                    return col;
                }
                let (w, e) = (&self.weights[s], &self.decay[s]);
                let mut start = a.coeffs()[s];
                for j in 0..self.intervals {
                    for r in 0..per {
                        let mut v = e[r] * start;
                        for node in 0..q {
                            v += w[r * q + node] * g[j * q + node].coeffs()[s];
                        }
                        col[j * per + r] = v;
                    }
                    start = col[j * per + q];
                }
                col
            })
            .collect();
        for (s, col) in columns.into_iter().enumerate() {
            for (i, v) in col.into_iter().enumerate() {
                out[i].coeffs_mut()[s] = v;
            }
        }
        out
    }
}

fn iteration_norm(op: &StokesOperator, times: &[f64], states: &[ModalField]) -> f64 {
    times
        .par_iter()
        .zip(states)
        .map(|(t, v)| t.powf(1.0 - PICARD_GAMMA) * norms::sobolev_norm(&op.from_modal(v), 2.0 * PICARD_GAMMA))
        .reduce(|| 0.0, f64::max)
}

fn iteration_distance(op: &StokesOperator, times: &[f64], a: &[ModalField], b: &[ModalField]) -> f64 {
    let diff: Vec<ModalField> = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let mut d = x.clone();
            d.axpy(-1.0, y);
            d
        })
        .collect();
    iteration_norm(op, times, &diff)
}

/// Solves `v(t) = e^{-tA} a + int_0^t e^{-(t-s)A} (P f(s) + F v(s)) ds` on
/// `[0, T]` by successive substitution. Non-convergence is reported in
/// the returned report rather than as an error.
pub fn picard_solve(a: &SpectralField, forcing: &Forcing, cfg: &PicardConfig) -> Result<PicardSolution> {
    cfg.validate()?;
    let grid = a.grid().clone();
    let op = StokesOperator::new(&grid);
    let ws = NonlinearWorkspace::new(&grid);
    let plan = PicardPlan::new(op, cfg);
    let q = plan.nodes();
    let per = q + 1;
    let times = plan.node_times();
    let interior: Vec<f64> = times.iter().enumerate().filter(|(i, _)| i % per != q).map(|(_, t)| *t).collect();

    let a_modal = plan.op.to_modal(a);
    let pf: Vec<ModalField> = if forcing.is_zero() {
        vec![ModalField::zeros(&grid); interior.len()]
    } else {
        interior
            .par_iter()
            .map(|&t| forcing.eval(t).map(|f| plan.op.to_modal(&f)))
            .collect::<Result<_>>()?
    };

    let mut current = plan.propagate(&a_modal, &pf);
    let mut report = PicardReport {
        k: vec![iteration_norm(&plan.op, &times, &current)],
        changes: Vec::new(),
        iterations: 0,
        converged: !cfg.nonlinear,
        diverged: false,
        c1_estimates: Vec::new(),
    };
    if cfg.nonlinear {
        for _ in 0..cfg.max_iterations {
            let g: Vec<ModalField> = (0..interior.len())
                .into_par_iter()
                .map(|i| {
                    let j = i / q;
                    let node = &current[j * per + i % q];
                    let fv = ws.nonlinear(&plan.op.from_modal(node))?;
                    let mut m = plan.op.to_modal(&fv);
                    m.axpy(1.0, &pf[i]);
                    Ok(m)
                })
                .collect::<Result<_>>()?;
            let next = plan.propagate(&a_modal, &g);
            let k = iteration_norm(&plan.op, &times, &next);
            let change = iteration_distance(&plan.op, &times, &next, &current);
            let km = *report.k.last().unwrap();
            if km > 0.0 {
                report.c1_estimates.push((k - report.k[0]).abs() / (km * km));
            }
            report.k.push(k);
            report.changes.push(change);
            report.iterations += 1;
            current = next;
            if !k.is_finite() || k > cfg.ceiling {
                report.diverged = true;
                break;
            }
            if change <= cfg.tolerance * k || change == 0.0 {
                report.converged = true;
                break;
            }
        }
    }

    let mut out_times = vec![0.0];
    let mut states = vec![plan.op.from_modal(&a_modal)];
    for j in 0..plan.intervals {
        out_times.push((j + 1) as f64 * plan.rule.d);
        states.push(plan.op.from_modal(&current[j * per + q]));
    }
    Ok(PicardSolution { times: out_times, states, report })
}

// ---------------------------------------------------------------------------
// IMEX stepping

#[derive(Debug, Clone, PartialEq)]
pub struct ImexConfig {
    pub dt: f64,
    /// 1: backward/forward Euler; 2: Crank-Nicolson / Adams-Bashforth 2.
    pub order: u8,
    pub t_end: f64,
    pub nonlinear: bool,
    /// Ledger sample every this many steps (the final step is always sampled).
    pub sample_every: usize,
    /// Upper bound on `dt * max|v| * max(nx, ny)`.
    pub cfl_max: f64,
}

impl Default for ImexConfig {
    fn default() -> Self {
        ImexConfig { dt: 1e-3, order: 2, t_end: 1.0, nonlinear: true, sample_every: 1, cfl_max: 1.0 }
    }
}

impl ImexConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(PeError::Config(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.order == 1 || self.order == 2) {
            return Err(PeError::Config(format!("IMEX order {} must be 1 or 2", self.order)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(PeError::Config(format!("end time {} must be >= 0", self.t_end)));
        }
        if self.sample_every == 0 {
            return Err(PeError::Config("sample interval must be positive".into()));
        }
        if !(self.cfl_max > 0.0) {
            return Err(PeError::Config("cfl_max must be positive".into()));
        }
        self.steps().map(|_| ())
    }

    pub fn steps(&self) -> Result<usize> {
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(self.dt) {
            return Err(PeError::Config(format!("end time {} is not a multiple of dt = {}", self.t_end, self.dt)));
        }
        Ok(n as usize)
    }
}

/// State of the stepper: modal coefficients at `t = step * dt`, and the
/// explicit terms carried between steps.
#[derive(Debug, Clone)]
pub struct ImexState {
    pub step: usize,
    pub t: f64,
    pub v: ModalField,
    prev_n: Option<ModalField>,
    pf: Option<ModalField>,
}

/// Everything needed to advance a state: the diagonalized `A`, the
/// nonlinear workspace and the forcing.
pub struct ImexStepper {
    pub op: StokesOperator,
    pub ws: NonlinearWorkspace,
    pub forcing: Forcing,
    pub cfg: ImexConfig,
}

impl ImexStepper {
    pub fn new(forcing: Forcing, cfg: ImexConfig, grid: &crate::grid::Grid) -> Result<Self> {
        cfg.validate()?;
        Ok(ImexStepper { op: StokesOperator::new(grid), ws: NonlinearWorkspace::new(grid), forcing, cfg })
    }

    pub fn initial_state(&self, a: &SpectralField) -> ImexState {
        ImexState { step: 0, t: 0.0, v: self.op.to_modal(a), prev_n: None, pf: None }
    }

    pub fn velocity(&self, s: &ImexState) -> SpectralField {
        self.op.from_modal(&s.v)
    }

    fn forcing_modal(&self, t: f64) -> Result<ModalField> {
        if self.forcing.is_zero() {
            Ok(ModalField::zeros(self.op.grid()))
        } else {
            Ok(self.op.to_modal(&self.forcing.eval(t)?))
        }
    }

    /// Advances one step of size `dt`.
    pub fn step(&self, s: &mut ImexState) -> Result<()> {
        let dt = self.cfg.dt;
        let g = self.op.grid();
        let v = self.op.from_modal(&s.v);
        let n_cur = if self.cfg.nonlinear {
            let vmax = v.to_physical().magnitude().iter().copied().fold(0.0, f64::max);
            let cfl = dt * vmax * g.nx().max(g.ny()) as f64;
            if cfl > self.cfg.cfl_max {
                return Err(PeError::Domain(format!(
                    "CFL bound violated at t = {}: dt max|v| N = {cfl:.3e} > {}",
                    s.t, self.cfg.cfl_max
                )));
            }
            self.op.to_modal(&self.ws.nonlinear(&v)?)
        } else {
            ModalField::zeros(g)
        };
        let t_next = (s.step + 1) as f64 * dt;
        let pf_cur = match s.pf.take() {
            Some(p) => p,
            None => self.forcing_modal(s.t)?,
        };
        let pf_next = self.forcing_modal(t_next)?;
        let mu = self.op.modal_eigenvalues();
        let second = self.cfg.order == 2 && s.prev_n.is_some();
        let out = s.v.coeffs_mut();
        for i in 0..out.len() {
            if mu[i].is_nan() {
                continue;
            }
            let x = dt * mu[i];
            out[i] = if second {
                let prev = s.prev_n.as_ref().unwrap().coeffs()[i];
                let explicit = 1.5 * n_cur.coeffs()[i] - 0.5 * prev;
                let force = 0.5 * (pf_cur.coeffs()[i] + pf_next.coeffs()[i]);
                ((1.0 - 0.5 * x) * out[i] + dt * (explicit + force)) / (1.0 + 0.5 * x)
            } else {
                (out[i] + dt * (n_cur.coeffs()[i] + pf_next.coeffs()[i])) / (1.0 + x)
            };
        }
        s.step += 1;
        s.t = t_next;
        s.prev_n = Some(n_cur);
        s.pf = Some(pf_next);
        if !s.v.is_finite() {
            return Err(PeError::NonFinite(s.t));
        }
        Ok(())
    }
}

/// Single step helper.
pub fn imex_step(stepper: &ImexStepper, state: &mut ImexState) -> Result<()> {
    stepper.step(state)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Completed,
    /// Non-finite state at time `t`; the ledger holds every sample before it.
    NonFinite { t: f64 },
}

#[derive(Debug, Clone)]
pub struct ImexOutcome {
    pub ledger: TrajectoryLedger,
    /// Last finite state and its time.
    pub t: f64,
    pub state: SpectralField,
    pub status: RunStatus,
}

/// Runs to `cfg.t_end` recording diagnostics; `observe` sees every sampled
/// state (for checkpoints).
pub fn imex_run_with(
    a: &SpectralField,
    forcing: Forcing,
    cfg: &ImexConfig,
    mut observe: impl FnMut(f64, &SpectralField, &mut TrajectoryLedger) -> Result<()>,
) -> Result<ImexOutcome> {
    let stepper = ImexStepper::new(forcing, cfg.clone(), a.grid())?;
    let steps = cfg.steps()?;
    let mut state = stepper.initial_state(a);
    let mut ledger = TrajectoryLedger::default();
    // the last three samples; the middle one is recorded once its right
    // neighbour exists
    let mut window: VecDeque<(f64, SpectralField)> = VecDeque::with_capacity(3);
    let first = stepper.velocity(&state);
    observe(0.0, &first, &mut ledger)?;
    window.push_back((0.0, first));
    let mut status = RunStatus::Completed;

    for n in 1..=steps {
        match stepper.step(&mut state) {
            Ok(()) => {}
            Err(PeError::NonFinite(t)) => {
                status = RunStatus::NonFinite { t };
                break;
            }
            Err(e) => return Err(e),
        }
        if n % cfg.sample_every == 0 || n == steps {
            let v = stepper.velocity(&state);
            observe(state.t, &v, &mut ledger)?;
            window.push_back((state.t, v));
            let slice: Vec<(f64, SpectralField)> = window.iter().cloned().collect();
            let mid = slice.len() - 2;
            let dtv = time_difference(&slice, mid);
            let rec = record_sample(&stepper.ws, &stepper.forcing, &slice[mid].1, slice[mid].0, &dtv)?;
            if !rec.is_valid() {
                // finite state whose norms overflow: treat as the blow-up point
                window.pop_back();
                status = RunStatus::NonFinite { t: rec.t };
                break;
            }
            ledger.push(rec)?;
            if window.len() == 3 {
                window.pop_front();
            }
        }
    }
    let slice: Vec<(f64, SpectralField)> = window.iter().cloned().collect();
    let mut last = slice.len() - 1;
    loop {
        let dtv = time_difference(&slice[..=last], last);
        let rec = record_sample(&stepper.ws, &stepper.forcing, &slice[last].1, slice[last].0, &dtv)?;
        if ledger.records.last().is_some_and(|r| r.t >= rec.t) {
            break;
        }
        if rec.is_valid() {
            ledger.push(rec)?;
            break;
        }
        if status == RunStatus::Completed {
            status = RunStatus::NonFinite { t: rec.t };
        }
        if last == 0 {
            break;
        }
        last -= 1;
    }
    let (t, v) = slice[last].clone();
    Ok(ImexOutcome { ledger, t, state: v, status })
}

pub fn imex_run(a: &SpectralField, forcing: Forcing, cfg: &ImexConfig) -> Result<ImexOutcome> {
    imex_run_with(a, forcing, cfg, |_, _, _| Ok(()))
}
