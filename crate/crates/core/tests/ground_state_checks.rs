use choquard_core::dynamics::align_to_orbit;
use choquard_core::energy::ModelParams;
use choquard_core::ground_state::{
    boundary_energy_check, find_ground_state, gaussian_state, GroundStateOptions, GroundStateResult,
};
use choquard_core::landscape::LandscapeConstants;
use choquard_core::potential::PotentialKind;
use choquard_core::Grid;

fn half_a0() -> f64 {
    0.5 * LandscapeConstants::compute(&ModelParams::reference(), 0.0)
        .unwrap()
        .a0
}

fn small_opts() -> GroundStateOptions {
    GroundStateOptions {
        n: 32,
        ..Default::default()
    }
}

fn solve(n: usize) -> GroundStateResult {
    let opts = GroundStateOptions { n, ..small_opts() };
    find_ground_state(
        half_a0(),
        &PotentialKind::Zero,
        &ModelParams::reference(),
        &opts,
    )
    .unwrap()
}

fn reference() -> GroundStateResult {
    solve(32)
}

#[test]
fn boundary_states_have_positive_energy() {
    let g = Grid::new(3, 32, 6.0).unwrap();
    let r = boundary_energy_check(
        half_a0(),
        &PotentialKind::Zero,
        &ModelParams::reference(),
        &g,
        32,
        4,
    )
    .unwrap();
    assert_eq!(r.samples, 32);
    assert!(r.pass, "{r:?}");
    assert!(r.min_energy > 0.0);
    assert!(r.min_slack > -1e-9, "{r:?}");
    assert!(r.max_grad_sq_error < 1e-8 * r.rho0, "{r:?}");
}

#[test]
fn free_minimizer_is_real_radial_positive() {
    // at n = 32 the core spans about two cells and the discrete minimizer rings
    let gs = solve(64);
    let u = &gs.u_a;
    let g = u.grid();
    let peak = u.values[g.origin()];
    let rot = (peak / peak.norm()).conj();
    let scale = u.max_abs();
    let aligned: Vec<_> = u.values.iter().map(|v| v * rot).collect();
    let im = aligned.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    assert!(im < 1e-8 * scale.max(1.0), "imaginary part {im:e}");
    let min = aligned.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    assert!(min > -1e-6 * scale, "min {min:e}, peak {scale:e}");
    let n = g.n();
    let c = n / 2;
    for (i, j, k) in [(c + 3, c + 1, c), (c + 5, c + 2, c + 1)] {
        let base = aligned[g.ravel(&[i, j, k])].re;
        let mirror = |x: usize| 2 * c - x;
        for ix in [
            [j, i, k],
            [k, j, i],
            [mirror(i), j, k],
            [i, mirror(j), mirror(k)],
        ] {
            let v = aligned[g.ravel(&ix)].re;
            assert!((v - base).abs() < 1e-8 * scale, "{ix:?}: {v} vs {base}");
        }
    }
}

#[test]
fn shifted_modulated_start_lands_on_the_orbit() {
    let gs = reference();
    let g = gs.u_a.grid().clone();
    // the automatic box is twelve optimal trial widths wide
    let trial = gaussian_state(&g, half_a0(), 1.3 * g.half_width() / 12.0)
        .shift(&[2, -1, 1])
        .modulate(0.7);
    let opts = GroundStateOptions {
        grid: Some(g.clone()),
        initial: Some(trial),
        ..small_opts()
    };
    let other = find_ground_state(
        half_a0(),
        &PotentialKind::Zero,
        &ModelParams::reference(),
        &opts,
    )
    .unwrap();
    assert!((other.m_a - gs.m_a).abs() < 1e-10 * gs.m_a.abs());
    let al = align_to_orbit(&other.u_a, &gs.u_a, true).unwrap();
    assert!(al.dist_h1 < 1e-6, "{al:?}");
}

#[test]
fn repeated_runs_agree() {
    let (a, b) = (reference(), reference());
    assert!((a.m_a - b.m_a).abs() <= 1e-12 * a.m_a.abs());
    assert_eq!(a.iterations, b.iterations);
}

#[test]
fn attractive_well_lowers_the_energy() {
    let p = ModelParams::reference();
    let well = PotentialKind::GaussianWell {
        depth: -0.003,
        width: 20.0,
    };
    let free = reference();
    let opts = GroundStateOptions {
        grid: Some(free.u_a.grid().clone()),
        ..small_opts()
    };
    let r = find_ground_state(half_a0(), &well, &p, &opts).unwrap();
    assert!(r.m_a < free.m_a, "{} vs {}", r.m_a, free.m_a);
    assert!(r.rho_attained < r.constants_stamp.rho0);
}
