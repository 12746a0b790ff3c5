//! Line-oriented run configuration: `key = value` pairs, `#` comments.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `nx`, `ny`, `nz` | 32, 32, 16 | Fourier modes per horizontal direction, vertical modes |
//! | `h` | 1 | layer depth |
//! | `dealias` | 2/3 | retained fraction of horizontal modes in products |
//! | `dt`, `t_end` (alias `T`) | 1e-3, 1 | IMEX step and end time (also the Picard horizon) |
//! | `scheme` | `imex2` | `imex1` (backward/forward Euler) or `imex2` (CN/AB2) |
//! | `nonlinear` | true | include the transport term |
//! | `cfl_max` | 1 | bound on `dt max|v| max(nx, ny)` |
//! | `sample_every` | 10 | ledger sample interval in steps |
//! | `initial` | random-band | zero, eigenmode, random-band, shear, manufactured |
//! | `amplitude`, `drift` | 1e-3, 0 | initial amplitude, added uniform drift |
//! | `mode_kx`, `mode_ky`, `mode_m` | 1, 0, 0 | mode of eigenmode / shear data |
//! | `band` | 4 | horizontal band of random-band data |
//! | `seed` | 0 | RNG seed |
//! | `forcing` | zero | `zero`, `mode:c,kx,ky,m,amp,decay`, `mms:amp,seed` |
//! | `ledger`, `report`, `checkpoint_dir` | unset | output paths |
//! | `checkpoint_every` | 0 | checkpoint every n samples (0: final state only) |
//! | `picard_intervals`, `picard_nodes` | 50, 6 | Duhamel subintervals and Gauss nodes |
//! | `picard_max_iter`, `picard_tol`, `picard_ceiling` | 20, 1e-12, 1e6 | Picard stopping rules |
//! | `mms_levels` | 4 | step sizes `dt, dt/2, ...` used by `pe mms` |
//! | `c3` | 1 | weight of the `L^4` term in the Gronwall quantity |

use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{PeError, Result};
use crate::evolution::{ImexConfig, PicardConfig};
use crate::forcing::ForcingSpec;
use crate::grid::{Fraction, Grid};
use crate::initial::{InitialConditionSpec, InitialKind};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub h: f64,
    pub dealias: Fraction,
    pub dt: f64,
    pub t_end: f64,
    pub order: u8,
    pub nonlinear: bool,
    pub cfl_max: f64,
    pub sample_every: usize,
    pub initial: InitialConditionSpec,
    pub forcing: ForcingSpec,
    pub ledger: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub checkpoint_dir: Option<PathBuf>,
    pub checkpoint_every: usize,
    pub picard_intervals: usize,
    pub picard_nodes: usize,
    pub picard_max_iter: usize,
    pub picard_tol: f64,
    pub picard_ceiling: f64,
    pub mms_levels: usize,
    pub c3: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PicardConfig::default();
        RunConfig {
            nx: 32,
            ny: 32,
            nz: 16,
            h: 1.0,
            dealias: Fraction::TWO_THIRDS,
            dt: 1e-3,
            t_end: 1.0,
            order: 2,
            nonlinear: true,
            cfl_max: 1.0,
            sample_every: 10,
            initial: InitialConditionSpec::default(),
            forcing: ForcingSpec::Zero,
            ledger: None,
            report: None,
            checkpoint_dir: None,
            checkpoint_every: 0,
            picard_intervals: p.intervals,
            picard_nodes: p.nodes,
            picard_max_iter: p.max_iterations,
            picard_tol: p.tolerance,
            picard_ceiling: p.ceiling,
            mms_levels: 4,
            c3: 1.0,
        }
    }
}

/// Every accepted key.
pub const CONFIG_KEYS: [&str; 32] = [
    "nx", "ny", "nz", "h", "dealias", "dt", "t_end", "T", "scheme", "nonlinear", "cfl_max", "sample_every", "initial",
    "amplitude", "drift", "mode_kx", "mode_ky", "mode_m", "band", "seed", "forcing", "ledger", "report",
    "checkpoint_dir", "checkpoint_every", "picard_intervals", "picard_nodes", "picard_max_iter", "picard_tol",
    "picard_ceiling", "mms_levels", "c3",
];

fn parse_value<T: FromStr>(value: &str, line: usize, key: &str) -> Result<T> {
    value.parse().map_err(|_| PeError::Parse { line, msg: format!("malformed value `{value}` for `{key}`") })
}

fn check(ok: bool, line: usize, msg: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(PeError::Parse { line, msg: msg.into() })
    }
}

fn positive(v: f64, line: usize, key: &str) -> Result<f64> {
    check(v > 0.0 && v.is_finite(), line, format!("`{key}` must be positive and finite, got {v}"))?;
    Ok(v)
}

fn parse_bool(value: &str, line: usize, key: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(PeError::Parse { line, msg: format!("malformed boolean `{value}` for `{key}`") }),
    }
}

/// Parses configuration text; unspecified keys keep their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut c = RunConfig::default();
    let mut forcing_set = false;
    let mut seen: Vec<&str> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if !content.is_ascii() {
            return Err(PeError::Parse { line, msg: "non-ASCII input".into() });
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| PeError::Parse { line, msg: format!("expected `key = value`, got `{content}`") })?;
        let canonical = if key == "T" { "t_end" } else { key };
        if !CONFIG_KEYS.contains(&key) {
            return Err(PeError::Parse { line, msg: format!("unknown key `{key}`") });
        }
        check(!seen.contains(&canonical), line, format!("duplicate key `{key}`"))?;
        seen.push(CONFIG_KEYS.iter().find(|k| **k == canonical).copied().unwrap());
        check(!value.is_empty(), line, format!("missing value for `{key}`"))?;
        let mode_bound = |v: i64| check(v.unsigned_abs() <= 4096, line, format!("`{key}` out of range"));
        match canonical {
            "nx" | "ny" | "nz" => {
                let n: usize = parse_value(value, line, key)?;
                if canonical == "nz" {
                    check((2..=512).contains(&n), line, format!("`nz` must be in 2..=512, got {n}"))?;
                    c.nz = n;
                } else {
                    check((4..=4096).contains(&n) && n % 2 == 0, line, format!("`{key}` must be even in 4..=4096, got {n}"))?;
                    if canonical == "nx" {
                        c.nx = n
                    } else {
                        c.ny = n
                    }
                }
            }
            "h" => c.h = positive(parse_value(value, line, key)?, line, key)?,
            "dealias" => {
                let f: Fraction = parse_value(value, line, key)?;
                check(f.value() <= 1.0, line, "`dealias` must not exceed 1")?;
                c.dealias = f;
            }
            "dt" => c.dt = positive(parse_value(value, line, key)?, line, key)?,
            "t_end" => {
                let t: f64 = parse_value(value, line, key)?;
                check(t >= 0.0 && t.is_finite(), line, format!("`{key}` must be >= 0, got {t}"))?;
                c.t_end = t;
            }
            "scheme" => {
                c.order = match value {
                    "imex1" => 1,
                    "imex2" => 2,
                    _ => return Err(PeError::Parse { line, msg: format!("unknown scheme `{value}` (imex1 or imex2)") }),
                }
            }
            "nonlinear" => c.nonlinear = parse_bool(value, line, key)?,
            "cfl_max" => c.cfl_max = parse_value::<f64>(value, line, key).and_then(|v| {
                check(v > 0.0, line, "`cfl_max` must be positive")?;
                Ok(v)
            })?,
            "sample_every" => {
                c.sample_every = parse_value(value, line, key)?;
                check(c.sample_every >= 1, line, "`sample_every` must be >= 1")?;
            }
            "initial" => c.initial.kind = InitialKind::from_str(value).map_err(|e| PeError::Parse { line, msg: e.to_string() })?,
            "amplitude" => c.initial.amplitude = positive(parse_value(value, line, key)?, line, key)?,
            "drift" => {
                c.initial.drift = parse_value(value, line, key)?;
                check(c.initial.drift.is_finite(), line, "`drift` must be finite")?;
            }
            "mode_kx" => {
                c.initial.mode.0 = parse_value(value, line, key)?;
                mode_bound(c.initial.mode.0)?;
            }
            "mode_ky" => {
                c.initial.mode.1 = parse_value(value, line, key)?;
                mode_bound(c.initial.mode.1)?;
            }
            "mode_m" => c.initial.mode.2 = parse_value(value, line, key)?,
            "band" => {
                c.initial.band = parse_value(value, line, key)?;
                check(c.initial.band >= 0, line, "`band` must be >= 0")?;
            }
            "seed" => c.initial.seed = parse_value(value, line, key)?,
            "forcing" => {
                c.forcing = ForcingSpec::from_str(value).map_err(|e| PeError::Parse { line, msg: e.to_string() })?;
                forcing_set = true;
            }
            "ledger" => c.ledger = Some(PathBuf::from(value)),
            "report" => c.report = Some(PathBuf::from(value)),
            "checkpoint_dir" => c.checkpoint_dir = Some(PathBuf::from(value)),
            "checkpoint_every" => c.checkpoint_every = parse_value(value, line, key)?,
            "picard_intervals" => {
                c.picard_intervals = parse_value(value, line, key)?;
                check(c.picard_intervals >= 1, line, "`picard_intervals` must be >= 1")?;
            }
            "picard_nodes" => {
                c.picard_nodes = parse_value(value, line, key)?;
                check((4..=16).contains(&c.picard_nodes), line, "`picard_nodes` must be in 4..=16")?;
            }
            "picard_max_iter" => {
                c.picard_max_iter = parse_value(value, line, key)?;
                check(c.picard_max_iter >= 1, line, "`picard_max_iter` must be >= 1")?;
            }
            "picard_tol" => c.picard_tol = positive(parse_value(value, line, key)?, line, key)?,
            "picard_ceiling" => c.picard_ceiling = positive(parse_value(value, line, key)?, line, key)?,
            "mms_levels" => {
                c.mms_levels = parse_value(value, line, key)?;
                check((2..=12).contains(&c.mms_levels), line, "`mms_levels` must be in 2..=12")?;
            }
            "c3" => c.c3 = positive(parse_value(value, line, key)?, line, key)?,
            _ => unreachable!("key list and match arms agree"),
        }
    }
    if c.initial.kind == InitialKind::Manufactured && !forcing_set {
        c.forcing = ForcingSpec::Manufactured { amplitude: c.initial.amplitude, seed: c.initial.seed };
    }
    c.imex()?.validate()?;
    Ok(c)
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::with_dealias(self.nx, self.ny, self.nz, self.h, self.dealias)
    }

    pub fn imex(&self) -> Result<ImexConfig> {
        Ok(ImexConfig {
            dt: self.dt,
            order: self.order,
            t_end: self.t_end,
            nonlinear: self.nonlinear,
            sample_every: self.sample_every,
            cfl_max: self.cfl_max,
        })
    }

    pub fn picard(&self) -> PicardConfig {
        PicardConfig {
            horizon: self.t_end,
            intervals: self.picard_intervals,
            nodes: self.picard_nodes,
            max_iterations: self.picard_max_iter,
            tolerance: self.picard_tol,
            ceiling: self.picard_ceiling,
            nonlinear: self.nonlinear,
        }
    }
}
