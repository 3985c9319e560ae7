//! Admissible pairs, mixed space-time norms, Strichartz ratios of the linear
//! flow, and Picard iteration of the Duhamel map
//! `Φ(u)(t) = e^{it𝓛}φ + i∫₀ᵗ e^{i(t−s)𝓛}N(u(s)) ds`, `𝓛 = Δ − V`.

use serde::Serialize;

use crate::dynamics::SplitStepSolver;
use crate::energy::{ChoquardFunctional, ModelError, ModelParams};
use crate::spectral::{Field, Grid, SpectralError};
use crate::{par, Complex64};

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("pair ({m}, {n}) is not admissible in d = {d}")]
    NotAdmissible { m: f64, n: f64, d: usize },
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("horizon must be positive, got {0}")]
    Horizon(f64),
    #[error("need at least 16 time nodes, got {0}")]
    Nodes(usize),
    #[error("outside contraction regime: factors {factors:?}")]
    OutsideContraction { factors: Vec<f64> },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

type Result<T> = std::result::Result<T, ProbeError>;

/// `(m, n)` with `2/m + d/n = d/2`; `m = ∞` is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissiblePair {
    pub m: f64,
    pub n: f64,
}

impl AdmissiblePair {
    pub fn new(m: f64, n: f64, d: usize) -> Result<Self> {
        let df = d as f64;
        let lhs = 2.0 / m + df / n;
        if !(m >= 2.0 && n >= 2.0) || (lhs - 0.5 * df).abs() > 1e-12 {
            return Err(ProbeError::NotAdmissible { m, n, d });
        }
        Ok(AdmissiblePair { m, n })
    }

    /// Pair with time exponent `2p`: `(2p, 2dp/(dp − 2))`.
    pub fn for_power(p: f64, d: usize) -> Result<Self> {
        let df = d as f64;
        AdmissiblePair::new(2.0 * p, 2.0 * df * p / (df * p - 2.0), d)
    }
}

/// The two pairs attached to the exponents `q` and `2*`.
pub fn admissible_pairs(params: &ModelParams) -> Result<(AdmissiblePair, AdmissiblePair)> {
    Ok((
        AdmissiblePair::for_power(params.q, params.d)?,
        AdmissiblePair::for_power(params.critical_exponent(), params.d)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedNormSpec {
    pub pairs: Vec<AdmissiblePair>,
    pub horizon: f64,
    /// `W^{1,n}` in space instead of `L^n`.
    pub with_derivative: bool,
}

/// Spatial `L^n` or `W^{1,n}` norm (`‖u‖_n + ‖|∇u|‖_n`).
pub fn spatial_norm(u: &Field, n: f64, with_derivative: bool) -> f64 {
    let base = u.lp_norm(n).expect("valid exponent");
    if !with_derivative {
        return base;
    }
    let grads = u.gradient();
    let g = u.grid();
    let mags = par::collect(g.len(), |i| {
        grads
            .iter()
            .map(|c| c.values[i].norm_sqr())
            .sum::<f64>()
            .sqrt()
    });
    let lp = if n.is_infinite() {
        mags.iter().cloned().fold(0.0, f64::max)
    } else {
        (g.cell_volume() * mags.iter().map(|m| m.powf(n)).sum::<f64>()).powf(1.0 / n)
    };
    base + lp
}

/// Trapezoid in time of `‖u(t)‖^m` on a uniform trajectory over `[0, T]`.
pub fn mixed_norm(traj: &[Field], spec: &MixedNormSpec) -> Result<Vec<f64>> {
    if traj.is_empty() {
        return Err(ProbeError::EmptyTrajectory);
    }
    if !(spec.horizon > 0.0) {
        return Err(ProbeError::Horizon(spec.horizon));
    }
    Ok(spec
        .pairs
        .iter()
        .map(|pair| {
            let norms: Vec<f64> = traj
                .iter()
                .map(|u| spatial_norm(u, pair.n, spec.with_derivative))
                .collect();
            time_norm(&norms, pair.m, spec.horizon)
        })
        .collect())
}

fn time_norm(norms: &[f64], m: f64, horizon: f64) -> f64 {
    if m.is_infinite() {
        return norms.iter().cloned().fold(0.0, f64::max);
    }
    if norms.len() == 1 {
        return horizon.powf(1.0 / m) * norms[0];
    }
    let dt = horizon / (norms.len() - 1) as f64;
    let last = norms.len() - 1;
    let s: f64 = norms
        .iter()
        .enumerate()
        .map(|(i, v)| if i == 0 || i == last { 0.5 } else { 1.0 } * v.powf(m))
        .sum();
    (dt * s).powf(1.0 / m)
}

/// Linear propagator `e^{it𝓛}`: exact in Fourier for `V = 0`, otherwise
/// Strang splitting with `substeps` steps per call.
#[derive(Debug, Clone)]
pub struct LinearPropagator {
    solver: SplitStepSolver,
    substeps: usize,
}

impl LinearPropagator {
    pub fn new(
        params: &ModelParams,
        grid: &Grid,
        potential: Option<Vec<f64>>,
        substeps: usize,
    ) -> Result<Self> {
        let f = ChoquardFunctional::new(*params, grid, potential)?.with_coupling(0.0);
        Ok(LinearPropagator {
            solver: SplitStepSolver::new(f),
            substeps: substeps.max(1),
        })
    }

    pub fn apply(&self, u: &mut Field, t: f64) {
        if self.solver.functional().has_potential() {
            self.solver
                .advance(u, t / self.substeps as f64, self.substeps);
        } else {
            self.solver.linear_flow(u, t);
        }
    }

    /// `e^{it_j𝓛}φ` on `nodes + 1` uniform times over `[0, T]`.
    pub fn trajectory(&self, phi: &Field, horizon: f64, nodes: usize) -> Vec<Field> {
        let dt = horizon / nodes as f64;
        let mut out = Vec::with_capacity(nodes + 1);
        let mut u = phi.clone();
        out.push(u.clone());
        for _ in 0..nodes {
            self.apply(&mut u, dt);
            out.push(u.clone());
        }
        out
    }
}

/// `mixed_norm(e^{it𝓛}φ) / ‖φ‖_{H¹}` per pair.
pub fn strichartz_ratio(
    phi: &Field,
    prop: &LinearPropagator,
    spec: &MixedNormSpec,
    nodes: usize,
) -> Result<Vec<f64>> {
    if nodes < 16 {
        return Err(ProbeError::Nodes(nodes));
    }
    let traj = prop.trajectory(phi, spec.horizon, nodes);
    let h1 = phi.h1_norm_sq().sqrt();
    Ok(mixed_norm(&traj, spec)?
        .into_iter()
        .map(|v| v / h1)
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardReport {
    pub horizon: f64,
    pub nodes: usize,
    /// `‖u^{k+1} − u^k‖` in `L^{m₁}_T L^{n₁}_x`; iteration stops once this
    /// reaches roundoff relative to `free_norm`.
    pub differences: Vec<f64>,
    pub factors: Vec<f64>,
    /// `L^{m₁}_T L^{n₁}_x` norm of the free evolution of `φ`.
    pub free_norm: f64,
}

/// Picard iterates of the Duhamel map; returns the last trajectory.
///
/// The integral is the composite trapezoid rule, accumulated as
/// `v_{j+1} = e^{iΔt𝓛}(v_j + ½Δt N_j) + ½Δt N_{j+1}`.
pub fn picard_iterate(
    phi: &Field,
    functional: &ChoquardFunctional,
    horizon: f64,
    nodes: usize,
    iters: usize,
    substeps: usize,
) -> Result<(Vec<Field>, PicardReport)> {
    if !(horizon > 0.0) {
        return Err(ProbeError::Horizon(horizon));
    }
    if nodes < 16 {
        return Err(ProbeError::Nodes(nodes));
    }
    let grid = functional.grid().clone();
    let params = *functional.params();
    let prop = LinearPropagator::new(
        &params,
        &grid,
        functional.potential().map(<[f64]>::to_vec),
        substeps,
    )?;
    let (pair, _) = admissible_pairs(&params)?;
    let spec = MixedNormSpec {
        pairs: vec![pair],
        horizon,
        with_derivative: false,
    };
    let dt = horizon / nodes as f64;
    let free = prop.trajectory(phi, horizon, nodes);
    let free_norm = mixed_norm(&free, &spec)?[0];
    let coupling = functional.coupling();
    let nonlinearity = |u: &Field| -> Field {
        if coupling == 0.0 {
            return Field::zeros(&grid);
        }
        let nl = functional.potentials(u);
        let (hq, hc) = (
            0.5 * (params.q - 2.0),
            0.5 * (params.critical_exponent() - 2.0),
        );
        let vals = par::collect(grid.len(), |i| {
            let z = u.values[i];
            let m2 = z.norm_sqr();
            if m2 == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            z * (coupling * (nl.sub[i] * m2.powf(hq) + nl.crit[i] * m2.powf(hc)))
        });
        Field::new(&grid, vals).expect("same grid")
    };
    let mut current = free.clone();
    let mut differences = Vec::with_capacity(iters);
    let mut factors: Vec<f64> = Vec::new();
    let half = Complex64::new(0.0, 0.5 * dt);
    for _ in 0..iters {
        let mut next = Vec::with_capacity(nodes + 1);
        let mut v = Field::zeros(&grid);
        let mut n_prev = nonlinearity(&current[0]);
        next.push(free[0].clone());
        for j in 0..nodes {
            let mut w = v.axpy(half, &n_prev)?;
            prop.apply(&mut w, dt);
            let n_next = nonlinearity(&current[j + 1]);
            v = w.axpy(half, &n_next)?;
            next.push(free[j + 1].axpy(Complex64::new(1.0, 0.0), &v)?);
            n_prev = n_next;
        }
        let diff: Vec<Field> = next
            .iter()
            .zip(&current)
            .map(|(a, b)| a.axpy(Complex64::new(-1.0, 0.0), b))
            .collect::<std::result::Result<_, _>>()?;
        let d = mixed_norm(&diff, &spec)?[0];
        if let Some(prev) = differences.last() {
            factors.push(if *prev == 0.0 { 0.0 } else { d / prev });
        }
        differences.push(d);
        current = next;
        if factors.len() >= 3 && factors[factors.len() - 3..].iter().all(|f| *f > 1.0) {
            return Err(ProbeError::OutsideContraction { factors });
        }
        // converged to roundoff: further ratios are noise
        if d <= 64.0 * f64::EPSILON * free_norm {
            break;
        }
    }
    Ok((
        current,
        PicardReport {
            horizon,
            nodes,
            differences,
            factors,
            free_norm,
        },
    ))
}

/// Largest contraction factor of a Picard run (0 without factors).
pub fn worst_factor(report: &PicardReport) -> f64 {
    report.factors.iter().cloned().fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct SmallDataRadius {
    /// Free-evolution `X_T` norm at the largest amplitude that still
    /// contracts (factors < 1).
    pub rho0_smalldata: f64,
    pub amplitude: f64,
}

/// Scales `phi` by doubling, then bisects the amplitude where the Picard
/// iteration stops contracting.
pub fn small_data_radius(
    phi: &Field,
    functional: &ChoquardFunctional,
    horizon: f64,
    nodes: usize,
) -> Result<SmallDataRadius> {
    let contracts = |c: f64| -> Result<Option<f64>> {
        let mut u = phi.clone();
        u.scale(c);
        match picard_iterate(&u, functional, horizon, nodes, 5, 4) {
            Ok((_, r)) => Ok((worst_factor(&r) < 1.0).then_some(r.free_norm)),
            Err(ProbeError::OutsideContraction { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let mut lo = 1.0;
    let mut lo_norm = match contracts(lo)? {
        Some(v) => v,
        None => {
            let mut c = 1.0;
            loop {
                c *= 0.5;
                if let Some(v) = contracts(c)? {
                    break {
                        lo = c;
                        v
                    };
                }
                if c < 1e-8 {
                    return Ok(SmallDataRadius {
                        rho0_smalldata: 0.0,
                        amplitude: 0.0,
                    });
                }
            }
        }
    };
    let mut hi = lo * 2.0;
    while let Some(v) = contracts(hi)? {
        lo = hi;
        lo_norm = v;
        hi *= 2.0;
        if hi > 1e8 {
            break;
        }
    }
    for _ in 0..12 {
        let mid = 0.5 * (lo + hi);
        match contracts(mid)? {
            Some(v) => {
                lo = mid;
                lo_norm = v;
            }
            None => hi = mid,
        }
    }
    Ok(SmallDataRadius {
        rho0_smalldata: lo_norm,
        amplitude: lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(g: &Grid, amp: f64) -> Field {
        Field::from_fn(g, |x| {
            Complex64::new(
                amp * (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp(),
                0.0,
            )
        })
    }

    #[test]
    fn pairs_satisfy_identity() {
        let end = AdmissiblePair::new(f64::INFINITY, 2.0, 3).unwrap();
        assert_eq!(end.n, 2.0);
        let p = ModelParams::new(3, 1.0, 2.2).unwrap();
        let (_, two) = admissible_pairs(&p).unwrap();
        assert!((two.m - 10.0).abs() < 1e-12 && (two.n - 30.0 / 13.0).abs() < 1e-12);
        let q2 = AdmissiblePair::for_power(2.0, 3).unwrap();
        assert_eq!((q2.m, q2.n), (4.0, 3.0));
        assert!(AdmissiblePair::new(4.0, 4.0, 3).is_err());
        let (one, two) = admissible_pairs(&ModelParams::reference()).unwrap();
        for pr in [one, two] {
            assert!((2.0 / pr.m + 3.0 / pr.n - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_trajectory_norm() {
        let g = Grid::new(3, 16, 4.0).unwrap();
        let u = gaussian(&g, 1.0);
        let spec = MixedNormSpec {
            pairs: vec![AdmissiblePair::for_power(2.0, 3).unwrap()],
            horizon: 0.7,
            with_derivative: false,
        };
        let traj = vec![u.clone(); 9];
        let got = mixed_norm(&traj, &spec).unwrap()[0];
        let want = 0.7f64.powf(0.25) * u.lp_norm(3.0).unwrap();
        assert!((got - want).abs() < 1e-13 * want);
        assert!(matches!(
            mixed_norm(&[], &spec),
            Err(ProbeError::EmptyTrajectory)
        ));
    }

    #[test]
    fn nonlinearity_off_is_a_fixed_point() {
        let g = Grid::new(3, 16, 6.0).unwrap();
        let f = ChoquardFunctional::new(ModelParams::reference(), &g, None)
            .unwrap()
            .with_coupling(0.0);
        let (_, r) = picard_iterate(&gaussian(&g, 0.1), &f, 0.1, 16, 3, 1).unwrap();
        assert!(r.differences.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn ratio_is_homogeneous() {
        let g = Grid::new(3, 16, 6.0).unwrap();
        let p = ModelParams::reference();
        let prop = LinearPropagator::new(&p, &g, None, 1).unwrap();
        let (one, two) = admissible_pairs(&p).unwrap();
        let spec = MixedNormSpec {
            pairs: vec![one, two],
            horizon: 1.0,
            with_derivative: true,
        };
        let u = gaussian(&g, 1.0);
        let r1 = strichartz_ratio(&u, &prop, &spec, 16).unwrap();
        let mut v = u.clone();
        v.scale(3.7);
        let r2 = strichartz_ratio(&v, &prop, &spec, 16).unwrap();
        for (a, b) in r1.iter().zip(&r2) {
            assert!(a.is_finite() && *a > 0.0);
            assert!((a - b).abs() < 1e-12 * a);
        }
        assert!(strichartz_ratio(&u, &prop, &spec, 8).is_err());
    }
}
