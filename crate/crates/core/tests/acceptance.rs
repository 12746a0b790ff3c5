//! Acceptance suite: one PASS/FAIL line per criterion. Run with
//! `cargo test -p hydropde --test acceptance`.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hydropde::app;
use hydropde::checkpoint;
use hydropde::config::parse_config;
use hydropde::diagnostics::{decay_fit, energy_budget, gronwall_monitor};
use hydropde::evolution::{imex_run, picard_solve, ImexConfig, PicardConfig, RunStatus};
use hydropde::forcing::Forcing;
use hydropde::initial::{make_initial, InitialConditionSpec, InitialKind};
use hydropde::nonlinear::NonlinearWorkspace;
use hydropde::norms;
use hydropde::projection::{divergence_of_average, project, project_galerkin, Velocity};
use hydropde::stokes::{sector_samples, StokesOperator};
use hydropde::{AveragedField, Grid, SpectralField};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_field(g: &Grid, rng: &mut ChaCha8Rng, kmax: i64, decay: f64) -> SpectralField {
    SpectralField::random_band(g, 2, rng, kmax, g.nz(), decay)
}

fn random_uniform(g: &Grid, rng: &mut ChaCha8Rng) -> AveragedField {
    SpectralField::random_band(g, 2, rng, g.nx() as i64, 0, 1.0).vertical_average()
}

fn constrained(g: &Grid, rng: &mut ChaCha8Rng, kmax: i64, decay: f64) -> SpectralField {
    project_galerkin(&random_field(g, rng, kmax, decay)).dealiased()
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 { a } else { a / b }
}

fn small_data_spec() -> InitialConditionSpec {
    // slowest mode (drift, eigenvalue beta) plus a sheared eigenmode
    InitialConditionSpec {
        kind: InitialKind::Eigenmode,
        amplitude: 1e-3,
        mode: (1, 0, 0),
        seed: 0,
        band: 0,
        drift: 1e-3,
    }
}

fn c1_projection() -> Outcome {
    let g = Grid::new(16, 16, 8, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut idem, mut div, mut grad, mut idem_n, mut div_n) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let v = Velocity::new(random_field(&g, &mut rng, 16, 0.5), random_uniform(&g, &mut rng)).unwrap();
        let p = project(&v).unwrap();
        let pp = project(&p).unwrap();
        idem = idem.max(rel(pp.sub(&p).l2_norm(), p.l2_norm()));
        div = div.max(rel(divergence_of_average(&p).l2_norm(), divergence_of_average(&v).l2_norm()));

        let q = SpectralField::random_band(&g, 1, &mut rng, 16, 0, 1.0).vertical_average();
        let mut gq = AveragedField::zeros(&g, 2);
        for c in 0..2 {
            let d = q.horizontal_derivative(c);
            for ix in 0..g.nx() {
                for iy in 0..g.ny() {
                    let i = gq.index(c, ix, iy);
                    gq.coeffs_mut()[i] = d.get(0, ix, iy);
                }
            }
        }
        let gv = Velocity::from_uniform(gq);
        grad = grad.max(rel(project(&gv).unwrap().l2_norm(), gv.l2_norm()));

        // the Galerkin restriction used by the dynamics
        let f = random_field(&g, &mut rng, 16, 0.5);
        let pf = project_galerkin(&f);
        idem_n = idem_n.max(rel(norms::l2_norm(&(&project_galerkin(&pf) - &pf)), norms::l2_norm(&pf)));
        div_n = div_n.max(rel(
            divergence_of_average(&Velocity::from_layered(pf)).l2_norm(),
            divergence_of_average(&Velocity::from_layered(f)).l2_norm(),
        ));
    }
    let tol = 1e-12;
    outcome(
        [idem, div, grad, idem_n, div_n].iter().all(|e| *e <= tol),
        format!("P^2-P {idem:.1e}, div {div:.1e}, grad->0 {grad:.1e}; Galerkin P^2-P {idem_n:.1e}, div {div_n:.1e} (tol {tol:.0e})"),
    )
}

fn c2_spectrum() -> Outcome {
    let g = Grid::new(16, 16, 16, 1.0).unwrap();
    let op = StokesOperator::new(&g);
    let report = op.spectrum();
    let beta_err = (report.beta - PI * PI / 4.0).abs();
    let target = 4.0 * PI * PI + PI * PI / 4.0;
    let block = report.blocks.iter().find(|(k, _)| *k == (1, 0)).map(|(_, e)| e[0]).unwrap();
    let v = make_initial(&InitialConditionSpec { drift: 0.0, ..small_data_spec() }, &g).unwrap();
    let av = op.apply(&v);
    let rayleigh = norms::inner(&av, &v) / norms::inner(&v, &v);
    let mode_err = (block - target).abs().max((rayleigh - target).abs());
    let residual = rel(norms::l2_norm(&(&av - &v.scaled(rayleigh))), norms::l2_norm(&av));
    outcome(
        beta_err <= 1e-10 && mode_err <= 1e-10 && residual <= 1e-12 && report.all_real_positive(),
        format!(
            "beta = {:.12} (err {beta_err:.1e}), mu(k=(1,0), m=0) = {:.12} (err {mode_err:.1e}), eigen-residual {residual:.1e}",
            report.beta, block
        ),
    )
}

fn c3_sector() -> Outcome {
    let g = Grid::new(32, 32, 16, 1.0).unwrap();
    let op = StokesOperator::new(&g);
    let eps = PI / 8.0;
    let args = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, PI - eps];
    let samples = sector_samples(&args, 20);
    let sweep = op.sector_sweep(eps, &samples).unwrap();
    let bound = 1.0 / eps.sin() + 1e-9;
    // cross-check the spectral formula with actual solves on random data
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut solve_max = 0.0f64;
    for &l in samples.iter().step_by(17) {
        let f = constrained(&g, &mut rng, 16, 0.0);
        let (v, _) = op.resolvent_solve(l, &f).unwrap();
        solve_max = solve_max.max(l.norm() * norms::l2_norm(&v) / norms::l2_norm(&f));
    }
    outcome(
        sweep.sup <= bound && solve_max <= sweep.sup * (1.0 + 1e-12),
        format!(
            "sup |l| ||(l+A)^-1|| = {:.12} <= {:.12} over {} samples; solves reach {:.6}",
            sweep.sup,
            bound,
            sweep.samples.len(),
            solve_max
        ),
    )
}

fn c4_semigroup() -> Outcome {
    let g = Grid::new(16, 16, 8, 1.0).unwrap();
    let op = StokesOperator::new(&g);
    let beta = op.beta();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut slack, mut law) = (f64::NEG_INFINITY, 0.0f64);
    for _ in 0..50 {
        let f = random_field(&g, &mut rng, 16, 0.0);
        let nf = norms::l2_norm(&f);
        for t in [0.01, 0.1, 1.0, 5.0] {
            let e = op.semigroup_apply(t, &f).unwrap();
            slack = slack.max((norms::l2_norm(&e) - (-beta * t).exp() * nf) / nf);
            let split = op.semigroup_apply(0.5 * t, &op.semigroup_apply(0.5 * t, &f).unwrap()).unwrap();
            law = law.max(norms::l2_norm(&(&split - &e)) / nf);
        }
    }
    outcome(
        slack <= 1e-11 && law <= 1e-11,
        format!("max (||e^-tA f|| - e^-bt ||f||)/||f|| = {slack:.2e}, semigroup-law residual {law:.1e}"),
    )
}

fn c5_smoothing() -> Outcome {
    let coarse = Grid::new(16, 16, 8, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f0 = random_field(&coarse, &mut rng, 3, 1.0);
    let times: Vec<f64> = (0..=40).map(|i| 10f64.powf(-4.0 + 0.1 * i as f64)).collect();
    let mut sups = Vec::new();
    for (n, nz) in [(16, 8), (32, 16), (64, 32)] {
        let g = Grid::new(n, n, nz, 1.0).unwrap();
        let f = f0.resample(&g).unwrap();
        let op = StokesOperator::new(&g);
        sups.push(op.smoothing_probe(0.5, 0.0, &times, &f).unwrap().sup);
    }
    let max = sups.iter().copied().fold(0.0, f64::max);
    let min = sups.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        sups.iter().all(|s| s.is_finite() && *s > 0.0) && max / min <= 2.0,
        format!("sup_t t^1/2 e^bt |e^-tA f|_H1/|f| on 16^2x8, 32^2x16, 64^2x32 = {sups:.4?} (spread x{:.3})", max / min),
    )
}

fn c6_nonlinearity() -> Outcome {
    let g = Grid::new(16, 16, 8, 1.0).unwrap();
    let ws = NonlinearWorkspace::new(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut neutral, mut homog) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let v = constrained(&g, &mut rng, 16, 1.0);
        let f = ws.nonlinear(&v).unwrap();
        let scale = norms::l2_norm(&ws.advect(&v, &v).unwrap()) * norms::l2_norm(&v);
        neutral = neutral.max(norms::inner(&f, &v).abs() / scale);
        if i % 10 == 0 {
            for c in [-2.0, 0.3, 7.0] {
                let fc = ws.nonlinear(&v.scaled(c)).unwrap();
                homog = homog.max(norms::l2_norm(&(&fc - &f.scaled(c * c))) / norms::l2_norm(&fc));
            }
        }
    }
    // bilinear-estimate ratio on a fixed band-limited sample set across
    // three refinements
    let coarse = Grid::new(16, 16, 6, 1.0).unwrap();
    let samples: Vec<SpectralField> = (0..8).map(|_| constrained(&coarse, &mut rng, 3, 1.0)).collect();
    let mut ratios = Vec::new();
    for (n, nz) in [(16, 6), (24, 10), (32, 14), (48, 20)] {
        let gg = Grid::new(n, n, nz, 1.0).unwrap();
        let s: Vec<SpectralField> = samples.iter().map(|v| project_galerkin(&v.resample(&gg).unwrap())).collect();
        ratios.push(NonlinearWorkspace::new(&gg).bilinear_estimate_probe(&s).unwrap().max_ratio);
    }
    let spread = ratios.iter().copied().fold(0.0, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        neutral <= 1e-9 && homog <= 1e-11 && spread <= 2.0,
        format!("|<F v, v>| / scale = {neutral:.1e}, F(cv)-c^2F(v) {homog:.1e}, M-hat = {ratios:.4?} (spread x{spread:.3})"),
    )
}

fn c7_picard() -> Outcome {
    let g = Grid::new(16, 16, 8, 1.0).unwrap();
    let a = make_initial(&small_data_spec(), &g).unwrap();
    let t_end = 0.5;
    let cfg = PicardConfig { horizon: t_end, intervals: 50, nodes: 8, ..Default::default() };
    let sol = picard_solve(&a, &Forcing::zero(&g), &cfg).unwrap();
    let r = &sol.report;
    let c1 = r.c1_estimates.iter().copied().fold(0.0, f64::max);
    let dominance = r.k.windows(2).all(|w| w[1] <= r.k[0] + c1 * w[0] * w[0] * (1.0 + 1e-12));
    let contraction = r.changes.windows(2).all(|w| w[1] <= w[0]);
    let imex = ImexConfig { dt: 2.5e-4, order: 2, t_end, nonlinear: true, sample_every: 2000, cfl_max: 1.0 };
    let out = imex_run(&a, Forcing::zero(&g), &imex).unwrap();
    let last = sol.states.last().unwrap();
    let gap = norms::l2_norm(&(last - &out.state)) / norms::l2_norm(last);
    outcome(
        r.converged && r.iterations <= 6 && dominance && contraction && c1.is_finite() && gap <= 1e-6,
        format!(
            "{} iterations, k_0 = {:.6e}, dominance k_m+1 <= k_0 + C1 k_m^2 with C1 = {c1:.3e} (estimates {:?}, changes {:?}), Picard vs IMEX at T={t_end}: {gap:.2e}",
            r.iterations,
            r.k[0],
            r.c1_estimates.iter().map(|c| format!("{c:.3e}")).collect::<Vec<_>>(),
            r.changes.iter().map(|c| format!("{c:.2e}")).collect::<Vec<_>>()
        ),
    )
}

fn small_data_run() -> hydropde::evolution::ImexOutcome {
    let g = Grid::new(8, 8, 4, 1.0).unwrap();
    let spec = InitialConditionSpec { amplitude: 1e-4, ..small_data_spec() };
    let a = make_initial(&spec, &g).unwrap();
    // the order-1 start-up step dissipates ~(mu dt)^2 of the stiff mode's
    // energy; dt = 1.25e-4 keeps that well below the budget tolerance
    let cfg = ImexConfig { dt: 1.25e-4, order: 2, t_end: 5.0, nonlinear: true, sample_every: 1, cfl_max: 1.0 };
    imex_run(&a, Forcing::zero(&g), &cfg).unwrap()
}

fn c8_energy(out: &hydropde::evolution::ImexOutcome) -> Outcome {
    let rep = energy_budget(&out.ledger);
    outcome(
        out.status == RunStatus::Completed && rep.relative <= 1e-6 && rep.strictly_decreasing,
        format!(
            "max |E2 + 2 int D2 - E2(0)| / E2(0) = {:.2e} over {} samples to T=5, strictly decreasing: {}",
            rep.relative,
            out.ledger.len(),
            rep.strictly_decreasing
        ),
    )
}

fn c9_decay(out: &hydropde::evolution::ImexOutcome) -> Outcome {
    let beta = PI * PI / 4.0;
    let fit = decay_fit(&out.ledger, "E2", 2.5).unwrap();
    let gw = gronwall_monitor(&out.ledger, 1.0);
    outcome(
        fit.rate >= 0.9 * 2.0 * beta && gw.dominated && gw.dissipation_integral.is_finite() && gw.max_jump < 10.0,
        format!(
            "E2 decay rate {:.6} >= {:.6}; Phi_max {:.3e}, max Phi/(Phi(0)e^intK1) = {:.4}, dissipation integral {:.3e}",
            fit.rate,
            0.9 * 2.0 * beta,
            gw.phi_max,
            gw.max_ratio,
            gw.dissipation_integral
        ),
    )
}

fn c10_mms() -> Outcome {
    let cfg = parse_config(
        "nx = 16\nny = 16\nnz = 6\ninitial = manufactured\namplitude = 0.02\nseed = 11\n\
         dt = 0.01\nT = 0.5\nmms_levels = 4\npicard_intervals = 25\npicard_nodes = 8",
    )
    .unwrap();
    let r = app::run_mms(&cfg).unwrap();
    outcome(
        r.orders.iter().all(|o| (1.8..=2.2).contains(o)) && r.picard_converged && r.picard_error <= 1e-8,
        format!(
            "IMEX errors {:?} at dt {:?}, observed orders {:.3?}; spatial (Picard) error {:.2e}",
            r.errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>(), r.dts, r.orders, r.picard_error
        ),
    )
}

fn c11_infrastructure() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let base = "nx = 8\nny = 8\nnz = 4\ninitial = random-band\namplitude = 0.05\nseed = 7\ndt = 1e-3\nT = 0.05\nsample_every = 5\n";
    let mut ledgers = Vec::new();
    for i in 0..2 {
        let text = format!("{base}ledger = {}\ncheckpoint_dir = {}\n", d.join(format!("l{i}.csv")).display(), d.join("ck").display());
        app::run(&parse_config(&text).unwrap()).unwrap();
        ledgers.push(std::fs::read(d.join(format!("l{i}.csv"))).unwrap());
    }
    let deterministic = ledgers[0] == ledgers[1];

    let g = Grid::new(8, 8, 4, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let f = random_field(&g, &mut rng, 8, 0.0);
    let path = d.join("state.bin");
    checkpoint::save_field(&path, &f).unwrap();
    let back = checkpoint::load_field(&path).unwrap();
    let bit_exact = back.grid() == f.grid()
        && back.coeffs().iter().zip(f.coeffs()).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits());

    let pe = env!("CARGO_BIN_EXE_pe");
    let nan_cfg = d.join("nan.cfg");
    std::fs::write(
        &nan_cfg,
        format!("nx = 8\nny = 8\nnz = 4\ninitial = random-band\namplitude = 50\ndt = 0.5\nT = 200\ncfl_max = 1e300\nsample_every = 1\nledger = {}\n", d.join("nan.csv").display()),
    )
    .unwrap();
    let nan_code = Command::new(pe).args(["run", "--config"]).arg(&nan_cfg).output().unwrap().status.code();
    let flushed = std::fs::read_to_string(d.join("nan.csv")).map(|s| s.lines().count() > 2).unwrap_or(false);
    let pic_cfg = d.join("picard.cfg");
    std::fs::write(&pic_cfg, "nx = 8\nny = 8\nnz = 4\ninitial = random-band\namplitude = 20\nT = 0.5\ndt = 0.5\npicard_intervals = 10\npicard_max_iter = 30\n").unwrap();
    let pic_code = Command::new(pe).args(["picard", "--config"]).arg(&pic_cfg).output().unwrap().status.code();
    outcome(
        deterministic && bit_exact && nan_code == Some(2) && flushed && pic_code == Some(3),
        format!(
            "identical ledgers {deterministic}, checkpoint bit-exact {bit_exact}, NaN exit {nan_code:?} (ledger flushed {flushed}), Picard exit {pic_code:?}"
        ),
    )
}

fn main() {
    // `cargo test` passes harness flags; a name filter restricts the run
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected = |n: &str| filter.is_empty() || filter.iter().any(|f| n.contains(f.as_str()));

    let mut failed = 0;
    let mut report = |id: usize, name: &str, run: &mut dyn FnMut() -> Outcome| {
        if !selected(name) {
            return;
        }
        let start = Instant::now();
        let o = run();
        println!(
            "[{}] {id:>2} {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed += 1;
        }
    };
    report(1, "projection", &mut c1_projection);
    report(2, "spectrum", &mut c2_spectrum);
    report(3, "sectorial-estimate", &mut c3_sector);
    report(4, "semigroup-decay", &mut c4_semigroup);
    report(5, "smoothing", &mut c5_smoothing);
    report(6, "nonlinearity", &mut c6_nonlinearity);
    report(7, "picard", &mut c7_picard);
    let mut run: Option<hydropde::evolution::ImexOutcome> = None;
    let mut cached = || run.get_or_insert_with(small_data_run).clone();
    report(8, "energy-identity", &mut || c8_energy(&cached()));
    report(9, "nonlinear-decay", &mut || c9_decay(&cached()));
    report(10, "mms", &mut c10_mms);
    report(11, "infrastructure", &mut c11_infrastructure);
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
