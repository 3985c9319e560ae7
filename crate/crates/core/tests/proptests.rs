use choquard_core::dynamics::SplitStepSolver;
use choquard_core::energy::{ChoquardFunctional, ModelParams};
use choquard_core::io::{read_field, write_field};
use choquard_core::landscape::{self, LandscapeConstants};
use choquard_core::potential::PotentialKind;
use choquard_core::probe::AdmissiblePair;
use choquard_core::spectral::{random_smooth_field, spectral_norm_sq};
use choquard_core::{Complex64, Field, Grid};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn field(n: usize, half_width: f64, seed: u64) -> Field {
    let g = Grid::new(3, n, half_width).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_smooth_field(&g, &mut rng, 0.2 * half_width, true)
}

fn constants() -> LandscapeConstants {
    LandscapeConstants::compute(&ModelParams::reference(), 0.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval(seed in any::<u64>(), n in prop::sample::select(vec![8usize, 16]), l in 2.0f64..10.0) {
        let u = field(n, l, seed);
        let m = u.norm_sq();
        prop_assert!((spectral_norm_sq(u.grid(), &u.spectrum()) - m).abs() <= 1e-12 * m);
    }

    #[test]
    fn energy_is_gauge_and_shift_invariant(seed in any::<u64>(), theta in -3.0f64..3.0, sx in -3i64..3, sy in -3i64..3) {
        let u = field(16, 6.0, seed);
        let f = ChoquardFunctional::new(ModelParams::reference(), u.grid(), None).unwrap();
        let e = f.energy(&u).unwrap().total;
        let e_phase = f.energy(&u.modulate(theta)).unwrap().total;
        let e_shift = f.energy(&u.shift(&[sx, sy, 0])).unwrap().total;
        let tol = 1e-11 * (1.0 + e.abs());
        prop_assert!((e - e_phase).abs() <= tol);
        prop_assert!((e - e_shift).abs() <= tol);
    }

    #[test]
    fn strang_steps_conserve_mass(seed in any::<u64>(), tau in -0.05f64..0.05, steps in 1usize..4) {
        let u0 = field(16, 6.0, seed);
        let s = SplitStepSolver::new(ChoquardFunctional::new(ModelParams::reference(), u0.grid(), None).unwrap());
        let mut u = u0.clone();
        s.advance(&mut u, tau, steps);
        prop_assert!((u.norm_sq() - u0.norm_sq()).abs() <= 1e-13 * u0.norm_sq());
    }

    #[test]
    fn field_files_round_trip_bitwise(seed in any::<u64>(), n in prop::sample::select(vec![8usize, 16]), l in 0.5f64..20.0) {
        let u = field(n, l, seed);
        let mut buf = Vec::new();
        write_field(&mut buf, &u).unwrap();
        let back = read_field(buf.as_slice()).unwrap();
        prop_assert_eq!(back.grid(), u.grid());
        for (a, b) in u.values.iter().zip(&back.values) {
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn landscape_decreases_in_mass(x in 0.01f64..3.0, y in 0.01f64..3.0, rho in 1e-4f64..1e2) {
        let (c, p) = (constants(), ModelParams::reference());
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        prop_assume!(hi - lo > 1e-9);
        prop_assert!(landscape::f_value(lo * c.a0, rho, &c, &p) >= landscape::f_value(hi * c.a0, rho, &c, &p));
    }

    #[test]
    fn max_of_f_matches_closed_form(x in 0.01f64..3.0) {
        let (c, p) = (constants(), ModelParams::reference());
        let a = x * c.a0;
        let (_, numeric) = landscape::maximize_f(a, &c, &p);
        prop_assert!((numeric - landscape::max_f_closed(a, &c, &p)).abs() < 1e-10);
    }

    #[test]
    fn sign_propagates_to_smaller_masses(x in 0.05f64..0.95, shrink in 0.05f64..1.0) {
        let (c, p) = (constants(), ModelParams::reference());
        let a1 = x * c.a0;
        let rho1 = landscape::rho_max(a1, &c, &p);
        let r = landscape::sign_propagation_check(a1, rho1, shrink * a1, 64, &c, &p).unwrap();
        prop_assert!(r.pass);
    }

    #[test]
    fn power_pairs_are_admissible(p in 2.0f64..6.0, d in 3usize..6) {
        let pair = AdmissiblePair::for_power(p, d).unwrap();
        prop_assert!((2.0 / pair.m + d as f64 / pair.n - 0.5 * d as f64).abs() <= 1e-12);
    }

    #[test]
    fn potential_specs_round_trip(depth in -5.0f64..5.0, width in 0.1f64..10.0, yukawa in any::<bool>()) {
        let kind = if yukawa {
            PotentialKind::Yukawa { strength: depth, range: width }
        } else {
            PotentialKind::GaussianWell { depth, width }
        };
        let back: PotentialKind = kind.to_string().parse().unwrap();
        prop_assert_eq!(back, kind);
    }

    #[test]
    fn gradient_norm_scales_under_dilation(s in 0.8f64..1.25) {
        let g = Grid::new(3, 32, 8.0).unwrap();
        let u = Field::from_fn(&g, |x| Complex64::new((-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp(), 0.0));
        let (us, _) = choquard_core::energy::dilate(&u, s).unwrap();
        prop_assert!((us.gradient_norm_sq() / (s * s * u.gradient_norm_sq()) - 1.0).abs() < 1e-6);
        prop_assert!((us.norm_sq() / u.norm_sq() - 1.0).abs() < 1e-6);
    }
}
