use choquard_core::dynamics::{evolve, EvolveOptions, SplitStepSolver};
use choquard_core::energy::{ChoquardFunctional, ModelParams};
use choquard_core::probe::{
    admissible_pairs, picard_iterate, strichartz_ratio, worst_factor, LinearPropagator,
    MixedNormSpec,
};
use choquard_core::{Complex64, Field, Grid};

fn gaussian_h1(g: &Grid, h1: f64, sigma: f64, k0: f64) -> Field {
    let mut u = Field::from_fn(g, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Complex64::from_polar((-0.5 * r2 / (sigma * sigma)).exp(), k0 * x[0])
    });
    let s = h1 / u.h1_norm_sq().sqrt();
    u.scale(s);
    u
}

fn l2_dist(a: &Field, b: &Field) -> f64 {
    a.axpy(Complex64::new(-1.0, 0.0), b)
        .unwrap()
        .norm_sq()
        .sqrt()
}

#[test]
fn small_data_picard_matches_split_step() {
    let g = Grid::new(3, 32, 8.0).unwrap();
    let p = ModelParams::reference();
    let f = ChoquardFunctional::new(p, &g, None).unwrap();
    let phi = gaussian_h1(&g, 1e-2, 1.0, 0.0);
    let (traj, rep) = picard_iterate(&phi, &f, 0.1, 64, 6, 1).unwrap();
    assert!(worst_factor(&rep) < 1.0, "factors {:?}", rep.factors);
    let solver = SplitStepSolver::new(f);
    let opts = EvolveOptions {
        horizon: 0.1,
        tau: 1e-3,
        record_every: 100,
        translate: false,
    };
    let (_, end) = evolve(&solver, &phi, None, &opts).unwrap();
    let d = l2_dist(traj.last().unwrap(), &end);
    assert!(d < 1e-6, "picard vs split-step {d:e}");
}

#[test]
fn linear_picard_equals_free_flow() {
    let g = Grid::new(3, 32, 8.0).unwrap();
    let p = ModelParams::reference();
    let f = ChoquardFunctional::new(p, &g, None)
        .unwrap()
        .with_coupling(0.0);
    let phi = gaussian_h1(&g, 1e-2, 1.0, 0.5);
    let (traj, rep) = picard_iterate(&phi, &f, 0.1, 32, 3, 1).unwrap();
    assert!(rep.differences.iter().all(|d| *d == 0.0));
    let solver = SplitStepSolver::new(f);
    let mut u = phi.clone();
    solver.advance(&mut u, 0.1 / 32.0, 32);
    assert!(l2_dist(traj.last().unwrap(), &u) < 1e-14);
}

#[test]
fn contraction_factor_grows_with_amplitude() {
    let g = Grid::new(3, 32, 8.0).unwrap();
    let f = ChoquardFunctional::new(ModelParams::reference(), &g, None).unwrap();
    let small = gaussian_h1(&g, 1e-2, 1.0, 0.0);
    let mut big = small.clone();
    big.scale(2.0);
    let (_, a) = picard_iterate(&small, &f, 0.1, 32, 4, 1).unwrap();
    let (_, b) = picard_iterate(&big, &f, 0.1, 32, 4, 1).unwrap();
    assert!(worst_factor(&b) > worst_factor(&a));
}

#[test]
fn strichartz_ratios_stay_bounded() {
    let g = Grid::new(3, 32, 10.0).unwrap();
    let p = ModelParams::reference();
    let prop = LinearPropagator::new(&p, &g, None, 1).unwrap();
    let (one, two) = admissible_pairs(&p).unwrap();
    let spec = MixedNormSpec {
        pairs: vec![one, two],
        horizon: 0.5,
        with_derivative: true,
    };
    let mut ratios = vec![Vec::new(), Vec::new()];
    for i in 0..20 {
        let sigma = 0.8 + 0.07 * i as f64;
        let k0 = 0.15 * i as f64;
        let phi = gaussian_h1(&g, 1.0, sigma, k0);
        let r = strichartz_ratio(&phi, &prop, &spec, 16).unwrap();
        for (slot, v) in ratios.iter_mut().zip(r) {
            slot.push(v);
        }
    }
    for r in &ratios {
        let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = r.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 0.0 && hi / lo < 10.0, "spread {lo} .. {hi}");
    }
}
