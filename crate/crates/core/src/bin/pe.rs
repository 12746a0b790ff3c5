use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hydropde::app::{self, Outcome, EXIT_FAILURE};
use hydropde::config::{parse_config, RunConfig};
use hydropde::diagnostics::diagnose;
use hydropde::evolution::TrajectoryLedger;
use hydropde::stokes::{sector_samples, StokesOperator};
use hydropde::Result;

/// Spectral solver for the hydrostatic primitive equations.
#[derive(Parser)]
#[command(name = "pe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// IMEX integration with diagnostics ledger and checkpoints.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Picard iteration on the mild formulation over [0, T].
    Picard {
        #[arg(long)]
        config: PathBuf,
    },
    /// Eigenvalues of the Stokes operator per horizontal wavenumber.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        /// CSV output (kx,ky,index,eigenvalue); stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// |lambda| ||(lambda + A)^{-1}|| over a sector of the complex plane.
    ResolventSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sector half-opening; the rays sampled are arg = 0, pi/4, pi/2,
        /// 3pi/4 and pi - epsilon.
        #[arg(long, default_value_t = PI / 8.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 8)]
        per_decade: usize,
    },
    /// Energy, Gronwall, decay and split summary of a ledger.
    Diagnose {
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        c3: f64,
    },
    /// Manufactured-solution convergence study.
    Mms {
        #[arg(long)]
        config: PathBuf,
        /// JSON output; overrides `report` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path) -> Result<RunConfig> {
    parse_config(&fs::read_to_string(path)?)
}

fn outcome_message(o: Outcome) -> Option<String> {
    match o {
        Outcome::Completed => None,
        Outcome::NonFinite { t } => Some(format!("aborted: non-finite state at t = {t}")),
        Outcome::PicardNotConverged => Some("Picard iteration did not converge".into()),
    }
}

fn execute(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Run { config } => {
            let s = app::run(&load_config(&config)?)?;
            println!("t = {} samples = {} energy_residual = {:e}", s.t_final, s.ledger.len(), s.report.energy_residual_max);
            Ok(s.outcome)
        }
        Command::Picard { config } => {
            let s = app::run_picard(&load_config(&config)?)?;
            println!("iterations = {} converged = {} k = {:?}", s.picard.iterations, s.picard.converged, s.picard.k);
            Ok(s.outcome)
        }
        Command::Spectrum { config, out } => {
            let op = StokesOperator::new(&load_config(&config)?.grid()?);
            let report = op.spectrum();
            let mut csv = String::from("kx,ky,index,eigenvalue\n");
            for ((kx, ky), e) in &report.blocks {
                for (i, v) in e.iter().enumerate() {
                    writeln!(csv, "{kx},{ky},{i},{v:e}").unwrap();
                }
            }
            match out {
                Some(p) => {
                    fs::write(&p, csv)?;
                    println!("beta = {:.12}", report.beta);
                }
                None => print!("{csv}"),
            }
            Ok(Outcome::Completed)
        }
        Command::ResolventSweep { config, out, epsilon, per_decade } => {
            let op = StokesOperator::new(&load_config(&config)?.grid()?);
            let args = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, PI - epsilon];
            let sweep = op.sector_sweep(epsilon, &sector_samples(&args, per_decade.max(1)))?;
            let mut csv = String::from("re_lambda,im_lambda,M_lambda\n");
            for (l, m) in &sweep.samples {
                writeln!(csv, "{:e},{:e},{m:e}", l.re, l.im).unwrap();
            }
            fs::write(&out, csv)?;
            println!("sup = {:.12} bound = {:.12}", sweep.sup, 1.0 / epsilon.sin());
            Ok(Outcome::Completed)
        }
        Command::Diagnose { ledger, out, c3 } => {
            let l = TrajectoryLedger::from_csv(&fs::read_to_string(&ledger)?)?;
            app::write_json(&out, &diagnose(&l, c3))?;
            Ok(Outcome::Completed)
        }
        Command::Mms { config, out } => {
            let mut cfg = load_config(&config)?;
            if out.is_some() {
                cfg.report = out;
            }
            let r = app::run_mms(&cfg)?;
            println!("errors = {:?} orders = {:?} picard_error = {:e}", r.errors, r.orders, r.picard_error);
            Ok(Outcome::Completed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("PE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // fails only if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match execute(cli.command) {
        Ok(outcome) => {
            if let Some(msg) = outcome_message(outcome) {
                eprintln!("pe: {msg}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("pe: {e}");
            ExitCode::from(EXIT_FAILURE as u8)
        }
    }
}
