use std::f64::consts::PI;

use choquard_core::energy::ModelParams;
use choquard_core::landscape::LandscapeConstants;
use choquard_core::potential::{check_conditions, Potential, PotentialKind, Verdict};
use choquard_core::spectral::random_smooth_field;
use choquard_core::Grid;
use rand::SeedableRng;

fn constants() -> (ModelParams, LandscapeConstants) {
    let p = ModelParams::reference();
    (p, LandscapeConstants::compute(&p, 0.0).unwrap())
}

#[test]
fn yukawa_kato_matches_radial_integral() {
    let g = Grid::new(3, 128, 12.0).unwrap();
    let v = Potential::new(
        PotentialKind::Yukawa {
            strength: 1.0,
            range: 1.0,
        },
        &g,
    )
    .unwrap();
    let rel = (v.kato_norm - 4.0 * PI).abs() / (4.0 * PI);
    assert!(rel < 1e-2, "kato {} rel {rel}", v.kato_norm);
}

#[test]
fn norms_agree_across_resolutions() {
    for kind in [
        PotentialKind::GaussianWell {
            depth: -0.8,
            width: 1.5,
        },
        PotentialKind::Yukawa {
            strength: -0.5,
            range: 1.0,
        },
    ] {
        let a = Potential::new(kind.clone(), &Grid::new(3, 64, 8.0).unwrap()).unwrap();
        let b = a.regrid(&Grid::new(3, 128, 8.0).unwrap()).unwrap();
        for (x, y) in [
            (a.kato_norm, b.kato_norm),
            (a.lp_halfd_norm, b.lp_halfd_norm),
            (a.neg_lp_halfd_norm, b.neg_lp_halfd_norm),
        ] {
            assert!((x - y).abs() < 1e-2 * y, "{kind}: {x} vs {y}");
        }
        assert!(b.neg_lp_halfd_norm <= b.lp_halfd_norm);
    }
}

#[test]
fn zero_potential_passes() {
    let (p, c) = constants();
    let r = check_conditions(&Potential::zero(&Grid::new(3, 16, 4.0).unwrap()), &c, &p);
    assert!(r.all_pass);
    assert_eq!(r.neg_lp_vs_sobolev, Verdict::Pass);
}

#[test]
fn deep_well_failure_is_monotone_and_bisectable() {
    let (p, c) = constants();
    let g = Grid::new(3, 32, 8.0).unwrap();
    let norm = |depth: f64| {
        Potential::new(
            PotentialKind::GaussianWell {
                depth: -depth,
                width: 1.0,
            },
            &g,
        )
        .unwrap()
        .neg_lp_halfd_norm
    };
    let depths: Vec<f64> = (1..40).map(|i| 0.25 * i as f64).collect();
    let norms: Vec<f64> = depths.iter().map(|d| norm(*d)).collect();
    assert!(norms.windows(2).all(|w| w[1] > w[0]));
    let fails = |depth: f64| {
        let v = Potential::new(
            PotentialKind::GaussianWell {
                depth: -depth,
                width: 1.0,
            },
            &g,
        )
        .unwrap();
        check_conditions(&v, &c, &p).neg_lp_vs_sobolev == Verdict::Fail
    };
    assert!(!fails(0.5) && fails(20.0));
    let (mut lo, mut hi) = (0.5, 20.0);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if fails(mid) {
            hi = mid
        } else {
            lo = mid
        }
    }
    // ‖V₋‖_{3/2} = depth·2π/3 for width 1
    let exact = c.sobolev_s * 3.0 / (2.0 * PI);
    assert!((hi - exact).abs() < 1e-6 * exact, "{hi} vs {exact}");
}

#[test]
fn sobolev_bound_on_random_fields() {
    let (_, c) = constants();
    let g = Grid::new(3, 32, 8.0).unwrap();
    let v = Potential::new(
        PotentialKind::GaussianWell {
            depth: -2.0,
            width: 1.2,
        },
        &g,
    )
    .unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let u = random_smooth_field(&g, &mut rng, 1.5, true);
        let lhs: f64 = g.cell_volume()
            * u.values
                .iter()
                .zip(v.values())
                .map(|(z, w)| w.abs() * z.norm_sqr())
                .sum::<f64>();
        let rhs = v.lp_halfd_norm / c.sobolev_s * u.gradient_norm_sq();
        assert!(lhs <= rhs + 1e-6, "{lhs} > {rhs}");
    }
}
