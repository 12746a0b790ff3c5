use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hydropde::checkpoint::{read_field, write_field};
use hydropde::config::parse_config;
use hydropde::nonlinear::NonlinearWorkspace;
use hydropde::norms;
use hydropde::projection::project_galerkin;
use hydropde::stokes::StokesOperator;
use hydropde::{Grid, SpectralField};

fn field(g: &Grid, seed: u64, decay: f64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SpectralField::random_band(g, 2, &mut rng, g.nx() as i64, g.nz(), decay)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_is_idempotent_and_contractive(seed in any::<u64>(), n in prop::sample::select(vec![6usize, 8, 12]), nz in 2usize..6) {
        let g = Grid::new(n, n, nz, 0.7).unwrap();
        let f = field(&g, seed, 0.5);
        let p = project_galerkin(&f);
        let pp = project_galerkin(&p);
        prop_assert!(norms::l2_norm(&(&pp - &p)) <= 1e-12 * norms::l2_norm(&p).max(1e-300));
        prop_assert!(norms::l2_norm(&p) <= norms::l2_norm(&f) * (1.0 + 1e-12));
    }

    #[test]
    fn transport_is_quadratic(seed in any::<u64>(), c in -5.0f64..5.0) {
        let g = Grid::new(8, 8, 3, 1.0).unwrap();
        let ws = NonlinearWorkspace::new(&g);
        let v = project_galerkin(&field(&g, seed, 1.0)).dealiased();
        let f = ws.nonlinear(&v).unwrap();
        let fc = ws.nonlinear(&v.scaled(c)).unwrap();
        prop_assert!(norms::l2_norm(&(&fc - &f.scaled(c * c))) <= 1e-11 * norms::l2_norm(&fc).max(1e-300));
        prop_assert!(norms::inner(&f, &v).abs() <= 1e-9 * norms::l2_norm(&ws.advect(&v, &v).unwrap()) * norms::l2_norm(&v) + 1e-300);
    }

    #[test]
    fn semigroup_decays_at_least_like_beta(seed in any::<u64>(), t in 1e-3f64..3.0) {
        let g = Grid::new(8, 8, 4, 1.3).unwrap();
        let op = StokesOperator::new(&g);
        let f = project_galerkin(&field(&g, seed, 0.0));
        let e = op.semigroup_apply(t, &f).unwrap();
        prop_assert!(norms::l2_norm(&e) <= (-op.beta() * t).exp() * norms::l2_norm(&f) * (1.0 + 1e-12));
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact(seed in any::<u64>(), nz in 2usize..6, decay in 0.0f64..3.0) {
        let g = Grid::new(6, 4, nz, 2.0).unwrap();
        let f = field(&g, seed, decay);
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        let back = read_field(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back.grid(), f.grid());
        for (a, b) in back.coeffs().iter().zip(f.coeffs()) {
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn config_rejects_unknown_keys(key in "[a-z_]{1,12}") {
        prop_assume!(!hydropde::config::CONFIG_KEYS.contains(&key.as_str()));
        let err = parse_config(&format!("nx = 8\n{key} = 1\n")).unwrap_err();
        prop_assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn config_round_trips_numbers(dt in 1e-5f64..1e-2, steps in 1usize..50) {
        let t_end = dt * steps as f64;
        let cfg = parse_config(&format!("dt = {dt:e}\nT = {t_end:e}\n"));
        if let Ok(cfg) = cfg {
            prop_assert_eq!(cfg.dt, dt);
            prop_assert_eq!(cfg.t_end, t_end);
        }
    }
}

#[test]
fn gram_factor_gives_half_depth() {
    let g = Grid::new(4, 4, 3, 2.0).unwrap();
    let mut f = SpectralField::zeros(&g, 1);
    f.set_mode(0, 0, 0, 2, num_complex::Complex64::new(1.0, 0.0)).unwrap();
    // |cos(lambda z)|^2 integrated over depth 2 is 1
    assert_relative_eq!(norms::l2_norm(&f), 1.0, max_relative = 1e-14);
}
