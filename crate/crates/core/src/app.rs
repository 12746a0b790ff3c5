//! Run orchestration behind the `pe` verbs: build the grid, data and
//! forcing from a [`RunConfig`], integrate, and write the ledger, report and
//! checkpoints.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::checkpoint::save_field;
use crate::config::RunConfig;
use crate::diagnostics::{diagnose, DiagnosticReport};
use crate::error::{PeError, Result};
use crate::evolution::{imex_run_with, ledger_from_samples, picard_solve, ImexConfig, PicardReport, RunStatus, TrajectoryLedger};
use crate::field::SpectralField;
use crate::forcing::{Forcing, ForcingSpec, Manufactured};
use crate::initial::make_initial;
use crate::nonlinear::NonlinearWorkspace;
use crate::norms;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_NON_FINITE: i32 = 2;
pub const EXIT_PICARD: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Completed,
    NonFinite { t: f64 },
    PicardNotConverged,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Completed => EXIT_OK,
            Outcome::NonFinite { .. } => EXIT_NON_FINITE,
            Outcome::PicardNotConverged => EXIT_PICARD,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub ledger: TrajectoryLedger,
    pub report: DiagnosticReport,
    pub outcome: Outcome,
    pub t_final: f64,
    pub final_state: SpectralField,
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| PeError::Format(e.to_string()))?;
    writeln!(f)?;
    Ok(())
}

pub fn write_ledger(path: &Path, ledger: &TrajectoryLedger) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, ledger.to_csv())?;
    Ok(())
}

fn write_outputs<T: Serialize>(cfg: &RunConfig, ledger: &TrajectoryLedger, report: &T) -> Result<()> {
    if let Some(p) = &cfg.ledger {
        write_ledger(p, ledger)?;
    }
    if let Some(p) = &cfg.report {
        write_json(p, report)?;
    }
    Ok(())
}

/// IMEX run (`pe run`). A non-finite state is reported in the outcome after
/// the ledger and report up to the last finite sample have been written.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let grid = cfg.grid()?;
    let a = make_initial(&cfg.initial, &grid)?;
    let forcing = Forcing::new(&cfg.forcing, &grid)?;
    let imex = cfg.imex()?;
    if let Some(dir) = &cfg.checkpoint_dir {
        fs::create_dir_all(dir)?;
    }
    let mut sample = 0usize;
    let out = imex_run_with(&a, forcing, &imex, |t, v, ledger| {
        if let (Some(dir), true) = (&cfg.checkpoint_dir, cfg.checkpoint_every > 0) {
            if sample % cfg.checkpoint_every == 0 {
                let path = dir.join(format!("ck-{sample:05}.bin"));
                save_field(&path, v)?;
                ledger.checkpoints.push((t, path.display().to_string()));
            }
        }
        sample += 1;
        Ok(())
    })?;
    let mut ledger = out.ledger;
    if let Some(dir) = &cfg.checkpoint_dir {
        let path = dir.join("final.bin");
        save_field(&path, &out.state)?;
        ledger.checkpoints.push((out.t, path.display().to_string()));
    }
    let report = diagnose(&ledger, cfg.c3);
    write_outputs(cfg, &ledger, &report)?;
    let outcome = match out.status {
        RunStatus::Completed => Outcome::Completed,
        RunStatus::NonFinite { t } => Outcome::NonFinite { t },
    };
    Ok(RunSummary { ledger, report, outcome, t_final: out.t, final_state: out.state })
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardRunReport {
    #[serde(flatten)]
    pub diagnostics: DiagnosticReport,
    pub converged: bool,
    pub diverged: bool,
    pub iterations: usize,
    pub k: Vec<f64>,
    pub changes: Vec<f64>,
    pub c1_estimates: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PicardSummary {
    pub ledger: TrajectoryLedger,
    pub report: PicardRunReport,
    pub picard: PicardReport,
    pub outcome: Outcome,
    pub final_state: SpectralField,
}

/// Picard run (`pe picard`) over `[0, t_end]`.
pub fn run_picard(cfg: &RunConfig) -> Result<PicardSummary> {
    let grid = cfg.grid()?;
    let a = make_initial(&cfg.initial, &grid)?;
    let forcing = Forcing::new(&cfg.forcing, &grid)?;
    let sol = picard_solve(&a, &forcing, &cfg.picard())?;
    let outcome = if sol.report.converged { Outcome::Completed } else { Outcome::PicardNotConverged };
    let finite = sol.states.iter().all(|s| s.is_finite());
    let samples: Vec<(f64, SpectralField)> = if finite {
        sol.times.iter().copied().zip(sol.states.iter().cloned()).collect()
    } else {
        vec![(0.0, a.clone())]
    };
    let ledger = ledger_from_samples(&NonlinearWorkspace::new(&grid), &forcing, &samples)?;
    let r = &sol.report;
    let report = PicardRunReport {
        diagnostics: diagnose(&ledger, cfg.c3),
        converged: r.converged,
        diverged: r.diverged,
        iterations: r.iterations,
        k: r.k.clone(),
        changes: r.changes.clone(),
        c1_estimates: r.c1_estimates.clone(),
    };
    write_outputs(cfg, &ledger, &report)?;
    if let Some(dir) = &cfg.checkpoint_dir {
        fs::create_dir_all(dir)?;
        save_field(dir.join("final.bin"), sol.states.last().unwrap())?;
    }
    Ok(PicardSummary {
        ledger,
        report,
        picard: sol.report,
        outcome,
        final_state: sol.states.last().unwrap().clone(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MmsReport {
    pub t_end: f64,
    pub dts: Vec<f64>,
    /// `||v(T) - v*(T)|| / ||v*(T)||` per step size.
    pub errors: Vec<f64>,
    /// `log2(e_i / e_{i+1})` for consecutive halvings.
    pub orders: Vec<f64>,
    /// Same error for the Picard solution, whose time quadrature is
    /// effectively exact: the spatial error.
    pub picard_error: f64,
    pub picard_converged: bool,
}

/// Manufactured-solution study (`pe mms`): IMEX at `dt, dt/2, ...` and a
/// Picard solve, all against the exact manufactured trajectory.
pub fn run_mms(cfg: &RunConfig) -> Result<MmsReport> {
    let grid = cfg.grid()?;
    let (amplitude, seed) = match cfg.forcing {
        ForcingSpec::Manufactured { amplitude, seed } => (amplitude, seed),
        _ => (cfg.initial.amplitude, cfg.initial.seed),
    };
    let spec = ForcingSpec::Manufactured { amplitude, seed };
    let m = Manufactured::new(&grid, amplitude, seed)?;
    let a = m.value(0.0);
    let exact = m.value(cfg.t_end);
    let scale = norms::l2_norm(&exact);
    let rel = |v: &SpectralField| norms::l2_norm(&(v - &exact)) / scale;
    let mut dts = Vec::new();
    let mut errors = Vec::new();
    for level in 0..cfg.mms_levels {
        let dt = cfg.dt / f64::powi(2.0, level as i32);
        let imex = ImexConfig { dt, sample_every: usize::MAX, ..cfg.imex()? };
        let out = crate::evolution::imex_run(&a, Forcing::new(&spec, &grid)?, &imex)?;
        if let RunStatus::NonFinite { t } = out.status {
            return Err(PeError::NonFinite(t));
        }
        dts.push(dt);
        errors.push(rel(&out.state));
    }
    let orders = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    let sol = picard_solve(&a, &Forcing::new(&spec, &grid)?, &cfg.picard())?;
    let report = MmsReport {
        t_end: cfg.t_end,
        dts,
        errors,
        orders,
        picard_error: rel(sol.states.last().unwrap()),
        picard_converged: sol.report.converged,
    };
    if let Some(p) = &cfg.report {
        write_json(p, &report)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn zero_data_run_gives_all_zero_ledger() {
        let cfg = parse_config("nx = 8\nny = 8\nnz = 4\ninitial = zero\ndt = 0.01\nT = 0.1\nsample_every = 2").unwrap();
        let s = run(&cfg).unwrap();
        assert_eq!(s.outcome, Outcome::Completed);
        assert_eq!(s.ledger.len(), 6);
        assert!(s.ledger.records.iter().all(|r| r.values()[1..].iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn linear_eigenmode_run_reports_twice_the_eigenvalue() {
        let cfg = parse_config(
            "nx = 8\nny = 8\nnz = 4\ninitial = eigenmode\nmode_kx = 0\nmode_ky = 0\nmode_m = 0\n\
             nonlinear = false\ndt = 1e-3\nT = 1\nsample_every = 20",
        )
        .unwrap();
        let s = run(&cfg).unwrap();
        let mu = cfg.grid().unwrap().lambda(0).powi(2);
        let rate = s.report.decay_rates["E2"];
        assert!((rate - 2.0 * mu).abs() <= 0.01 * 2.0 * mu, "{rate}");
    }
}
