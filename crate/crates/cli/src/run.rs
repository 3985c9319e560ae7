//! Experiment dispatch and artifact emission.

use std::fmt::Write as _;
use std::path::PathBuf;

use choquard_core::dynamics::{evolve_with, stability_experiment, EvolveOptions, SplitStepSolver};
use choquard_core::energy::{ChoquardFunctional, ModelParams};
use choquard_core::ground_state::{
    auto_grid, constants_for, find_ground_state, m_curve, GroundStateError, GroundStateOptions,
    GroundStateResult, StopReason,
};
use choquard_core::io::{load_field, save_field};
use choquard_core::landscape::{self, LandscapeConstants};
use choquard_core::potential::{check_conditions, Potential};
use choquard_core::probe::{self, picard_iterate, worst_factor, ProbeError};
use choquard_core::{dynamics, Complex64, Field, Grid};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Experiment, GridSpec, RunConfig};
use crate::CliError;

/// What a run produced and whether its checks held.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub artifacts: Vec<PathBuf>,
    pub summary: Value,
}

struct Emitter<'a> {
    config: &'a RunConfig,
    stamp: Option<LandscapeConstants>,
    artifacts: Vec<PathBuf>,
}

impl<'a> Emitter<'a> {
    fn new(config: &'a RunConfig, stamp: Option<LandscapeConstants>) -> Result<Self, CliError> {
        std::fs::create_dir_all(&config.output_dir)?;
        Ok(Emitter {
            config,
            stamp,
            artifacts: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn header(&self) -> String {
        let cfg = serde_json::to_string(self.config).expect("config serializes");
        let stamp = serde_json::to_string(&self.stamp).expect("stamp serializes");
        format!("# config: {cfg}\n# constants: {stamp}\n")
    }

    fn csv(
        &mut self,
        name: &str,
        columns: &[&str],
        rows: impl IntoIterator<Item = Vec<f64>>,
    ) -> Result<(), CliError> {
        let mut out = self.header();
        out.push_str(&columns.join(","));
        out.push('\n');
        for row in rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", line.join(",")).expect("string write");
        }
        let p = self.path(name);
        std::fs::write(&p, out)?;
        self.artifacts.push(p);
        Ok(())
    }

    fn field(&mut self, name: &str, u: &Field) -> Result<(), CliError> {
        let p = self.path(name);
        save_field(&p, u).map_err(|e| CliError::Io(e.to_string()))?;
        self.artifacts.push(p);
        Ok(())
    }

    fn finish(mut self, pass: bool, result: Value) -> Result<Outcome, CliError> {
        let summary = json!({
            "experiment": self.config.experiment.name(),
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
            "constants": self.stamp,
            "pass": pass,
            "result": result,
        });
        let p = self.path(&format!("{}.json", self.config.experiment.stem()));
        std::fs::write(&p, serde_json::to_string_pretty(&summary)? + "\n")?;
        self.artifacts.push(p);
        Ok(Outcome {
            pass,
            artifacts: self.artifacts,
            summary,
        })
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn make_grid(params: &ModelParams, spec: GridSpec) -> Result<Grid, CliError> {
    Grid::new(params.d, spec.n, spec.half_width).map_err(|e| CliError::Usage(format!("grid: {e}")))
}

fn failure(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

/// Grid used when neither the config nor the experiment fixes one.
const DEFAULT_GRID: GridSpec = GridSpec {
    n: 64,
    half_width: 12.0,
};

/// Runs a validated configuration.
pub fn run(config: &RunConfig) -> Result<Outcome, CliError> {
    config.validate()?;
    match config.experiment {
        Experiment::Constants => constants(config),
        Experiment::Landscape => landscape_run(config),
        Experiment::GroundState => ground_state(config),
        Experiment::MCurve => m_curve_run(config),
        Experiment::Evolve => evolve_run(config),
        Experiment::Stability => stability(config),
        Experiment::Kato => kato(config),
        Experiment::Probe => probe_run(config),
    }
}

fn potential_on(config: &RunConfig, grid: &Grid) -> Result<Potential, CliError> {
    Potential::new(config.potential_kind()?, grid)
        .map_err(|e| CliError::Usage(format!("potential: {e}")))
}

/// Constants with `‖V₋‖_{d/2}` measured on `grid`.
fn stamp_on(config: &RunConfig, grid: &Grid) -> Result<(Potential, LandscapeConstants), CliError> {
    let pot = potential_on(config, grid)?;
    let c = constants_for(&config.params, &pot).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((pot, c))
}

fn constants(config: &RunConfig) -> Result<Outcome, CliError> {
    let grid = make_grid(&config.params, config.grid.unwrap_or(DEFAULT_GRID))?;
    let (_, c) = stamp_on(config, &grid)?;
    let result = json!({
        "critical_exponent": config.params.critical_exponent(),
        "gn_exponent": landscape::gn_exponent(&config.params),
        "max_exponent": landscape::max_exponent(&config.params),
    });
    Emitter::new(config, Some(c))?.finish(true, result)
}

fn landscape_run(config: &RunConfig) -> Result<Outcome, CliError> {
    let p = &config.params;
    let grid = make_grid(p, config.grid.unwrap_or(DEFAULT_GRID))?;
    let (_, c) = stamp_on(config, &grid)?;
    let tri = landscape::trichotomy(&c, p);
    let closed = [0.5, 1.0, 2.0].map(|f| {
        let a = f * c.a0;
        json!({"a": a, "rho_a": landscape::rho_max(a, &c, p), "max_f_closed": landscape::max_f_closed(a, &c, p)})
    });
    let a0_bisect = landscape::a0_by_bisection(&c, p);
    let mut em = Emitter::new(config, Some(c))?;
    let rows = (0..=200).map(|i| {
        let rho = c.rho0 * 10f64.powf(-2.0 + 4.0 * i as f64 / 200.0);
        vec![
            rho,
            landscape::f_value(0.5 * c.a0, rho, &c, p),
            landscape::f_value(c.a0, rho, &c, p),
            landscape::f_value(2.0 * c.a0, rho, &c, p),
        ]
    });
    em.csv(
        "landscape.csv",
        &["rho", "f_half_a0", "f_a0", "f_two_a0"],
        rows,
    )?;
    let pass = tri.pass();
    em.finish(
        pass,
        json!({
            "trichotomy": tri,
            "closed_form": closed,
            "a0_bisection": a0_bisect,
        }),
    )
}

/// Mass from `options.a` or `options.a_fraction·a₀`.
fn resolve_mass(config: &RunConfig, a0: f64, fraction: f64) -> f64 {
    config
        .options
        .a
        .unwrap_or(config.options.a_fraction.unwrap_or(fraction) * a0)
}

fn check_below(a: f64, a0: f64) -> Result<(), CliError> {
    if a >= a0 {
        return Err(CliError::Usage(format!(
            "mass a = {a} is above threshold a0 = {a0}"
        )));
    }
    Ok(())
}

/// Grid for a ground-state style run: the configured one or a box sized
/// for mass `a`.
fn ground_state_grid(config: &RunConfig, a: f64) -> Result<Grid, CliError> {
    let p = &config.params;
    match config.grid {
        Some(g) => make_grid(p, g),
        None => {
            let free = LandscapeConstants::compute(p, 0.0).map_err(failure)?;
            auto_grid(a, p, &free, config.options.n_auto.unwrap_or(64), 12.0).map_err(failure)
        }
    }
}

struct Prepared {
    a: f64,
    grid: Grid,
    potential: Potential,
    stamp: LandscapeConstants,
    opts: GroundStateOptions,
}

fn prepare_ground_state(config: &RunConfig) -> Result<Prepared, CliError> {
    let p = &config.params;
    // a₀ on the reference grid, then the run grid for that mass
    let reference = make_grid(p, config.grid.unwrap_or(DEFAULT_GRID))?;
    let (_, c_ref) = stamp_on(config, &reference)?;
    let a = resolve_mass(config, c_ref.a0, 0.5);
    check_below(a, c_ref.a0)?;
    let grid = ground_state_grid(config, a)?;
    let (potential, stamp) = stamp_on(config, &grid)?;
    check_below(a, stamp.a0)?;
    let o = &config.options;
    let mut opts = GroundStateOptions {
        grid: Some(grid.clone()),
        ..Default::default()
    };
    if let Some(t) = o.tol {
        opts.tol = t;
    }
    if let Some(m) = o.max_iter {
        opts.max_iter = m;
    }
    Ok(Prepared {
        a,
        grid,
        potential,
        stamp,
        opts,
    })
}

/// Runs the minimizer; a non-converged result is returned with `false`.
fn solve(config: &RunConfig, prep: &Prepared) -> Result<(GroundStateResult, bool), CliError> {
    let kind = config.potential_kind()?;
    let gs = match find_ground_state(prep.a, &kind, &config.params, &prep.opts) {
        Ok(gs) => (gs, true),
        Err(GroundStateError::NotConverged { last }) => (*last, false),
        Err(e @ GroundStateError::AboveThreshold { .. }) => {
            return Err(CliError::Usage(e.to_string()))
        }
        Err(e) => return Err(failure(e)),
    };
    if gs.0.constants_stamp != prep.stamp {
        return Err(failure("constants stamp changed during the run"));
    }
    Ok(gs)
}

fn ground_state_pass(gs: &GroundStateResult, converged: bool) -> bool {
    converged
        && gs.stop_reason != StopReason::MaxIter
        && gs.m_a < 0.0
        && gs.rho_attained < gs.constants_stamp.rho0
}

fn ground_state(config: &RunConfig) -> Result<Outcome, CliError> {
    let mut prep = prepare_ground_state(config)?;
    prep.opts.record_trace = true;
    let (gs, converged) = solve(config, &prep)?;
    let mut em = Emitter::new(config, Some(prep.stamp))?;
    em.field("ground_state.chqf", &gs.u_a)?;
    em.csv(
        "ground_state.csv",
        &["iteration", "energy"],
        gs.energy_trace
            .iter()
            .enumerate()
            .map(|(i, e)| vec![i as f64, *e]),
    )?;
    let pass = ground_state_pass(&gs, converged);
    em.finish(
        pass,
        json!({"converged": converged, "summary": gs.summary(prep.a)}),
    )
}

fn m_curve_run(config: &RunConfig) -> Result<Outcome, CliError> {
    let p = &config.params;
    let reference = make_grid(p, config.grid.unwrap_or(DEFAULT_GRID))?;
    let (_, c_ref) = stamp_on(config, &reference)?;
    let fractions = config
        .options
        .fractions
        .clone()
        .unwrap_or_else(|| vec![0.2, 0.3, 0.4, 0.5]);
    let masses: Vec<f64> = fractions.iter().map(|f| f * c_ref.a0).collect();
    for a in &masses {
        check_below(*a, c_ref.a0)?;
    }
    // without an explicit grid every mass gets its own box; the stamp is
    // taken on the box of the largest mass
    let largest = masses.iter().cloned().fold(0.0, f64::max);
    let (_, stamp) = stamp_on(config, &ground_state_grid(config, largest)?)?;
    let mut opts = GroundStateOptions {
        grid: match config.grid {
            Some(g) => Some(make_grid(p, g)?),
            None => None,
        },
        n: config.options.n_auto.unwrap_or(64),
        ..Default::default()
    };
    if let Some(t) = config.options.tol {
        opts.tol = t;
    }
    if let Some(m) = config.options.max_iter {
        opts.max_iter = m;
    }
    let kind = config.potential_kind()?;
    let points = m_curve(
        &masses,
        &kind,
        p,
        &opts,
        config.options.cold_starts.unwrap_or(false),
    )
    .map_err(failure)?;
    let mut em = Emitter::new(config, Some(stamp))?;
    em.csv(
        "m_curve.csv",
        &["a", "m", "lambda", "grad_residual", "L"],
        points
            .iter()
            .map(|q| vec![q.a, q.m, q.lambda, q.grad_residual, q.grid_half_width]),
    )?;
    let pass = points.iter().all(|q| q.m < 0.0);
    em.finish(pass, json!({"points": points}))
}

fn solver_for(
    config: &RunConfig,
    potential: &Potential,
    grid: &Grid,
) -> Result<SplitStepSolver, CliError> {
    let f = ChoquardFunctional::new(config.params, grid, potential.for_functional())
        .map_err(failure)?;
    Ok(SplitStepSolver::new(f))
}

fn evolve_run(config: &RunConfig) -> Result<Outcome, CliError> {
    let o = &config.options;
    let opts_base = |translate| EvolveOptions {
        horizon: o.horizon.unwrap_or(1.0),
        tau: o.tau.unwrap_or(1e-2),
        record_every: o.record_every.unwrap_or(10),
        translate,
    };
    let (phi, reference, potential, stamp, gs) = match &o.input {
        Some(path) => {
            let u = load_field(path).map_err(|e| CliError::Usage(format!("options.input: {e}")))?;
            let (pot, c) = stamp_on(config, u.grid())?;
            (u, None, pot, c, None)
        }
        None => {
            let prep = prepare_ground_state(config)?;
            let (gs, converged) = solve(config, &prep)?;
            if !converged {
                return Err(failure("ground state did not converge"));
            }
            (
                gs.u_a.clone(),
                Some(gs.u_a.clone()),
                prep.potential,
                prep.stamp,
                Some(gs),
            )
        }
    };
    let grid = phi.grid().clone();
    let solver = solver_for(config, &potential, &grid)?;
    let opts = opts_base(!solver.functional().has_potential());
    let mut em = Emitter::new(config, Some(stamp))?;
    let mut checkpoints = Vec::new();
    let evolved = evolve_with(&solver, &phi, reference.as_ref(), &opts, |_, u| {
        checkpoints.push(u.clone())
    });
    let (trace, blow_up) = match evolved {
        Ok((trace, _)) => (Some(trace), None),
        Err(e @ dynamics::DynamicsError::BlowUp { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(failure(e)),
    };
    for (k, u) in checkpoints.iter().enumerate() {
        em.field(&format!("evolve_{k:05}.chqf"), u)?;
    }
    let Some(trace) = trace else {
        return em.finish(false, json!({"blow_up": blow_up}));
    };
    em.csv(
        "evolve.csv",
        &["t", "mass", "energy", "orbit_dist"],
        trace.times.iter().enumerate().map(|(i, t)| {
            vec![
                *t,
                trace.mass[i],
                trace.energy[i],
                trace.orbit_dist.get(i).copied().unwrap_or(f64::NAN),
            ]
        }),
    )?;
    let standing = gs.as_ref().map(|gs| {
        let measured = -dynamics::phase_winding_rate(&trace.times, &trace.phase);
        json!({
            "lambda_measured": measured,
            "lambda_reported": gs.lambda,
            "lambda_rel_err": (measured - gs.lambda).abs() / gs.lambda.abs(),
        })
    });
    let result = json!({
        "max_mass_drift": trace.max_mass_drift(),
        "energy_drift": trace.energy_drift(),
        "sup_orbit_dist": reference.as_ref().map(|_| trace.sup_orbit_dist()),
        "standing_wave": standing,
    });
    em.finish(true, result)
}

fn stability(config: &RunConfig) -> Result<Outcome, CliError> {
    let o = &config.options;
    let prep = prepare_ground_state(config)?;
    let (gs, converged) = solve(config, &prep)?;
    if !converged {
        return Err(failure("ground state did not converge"));
    }
    let solver = solver_for(config, &prep.potential, &prep.grid)?;
    let deltas = o.deltas.clone().unwrap_or_else(|| vec![1e-4, 1e-3, 1e-2]);
    let report = stability_experiment(
        &gs,
        &solver,
        &deltas,
        o.horizon.unwrap_or(10.0),
        o.tau.unwrap_or(1e-2),
        o.record_every.unwrap_or(10),
        config.seed,
    )
    .map_err(failure)?;
    let mut em = Emitter::new(config, Some(prep.stamp))?;
    em.csv(
        "stability.csv",
        &[
            "delta",
            "sup_orbit_dist",
            "initial_orbit_dist",
            "max_mass_drift",
            "energy_drift",
        ],
        report.runs.iter().map(|r| {
            vec![
                r.delta,
                r.sup_orbit_dist,
                r.initial_orbit_dist,
                r.max_mass_drift,
                r.energy_drift,
            ]
        }),
    )?;
    em.finish(report.pass, to_value(&report))
}

fn kato(config: &RunConfig) -> Result<Outcome, CliError> {
    let p = &config.params;
    let grid = make_grid(p, config.grid.unwrap_or(DEFAULT_GRID))?;
    let pot = potential_on(config, &grid)?;
    let free = LandscapeConstants::compute(p, 0.0).map_err(failure)?;
    let report = check_conditions(&pot, &free, p);
    // a potential deeper than the Sobolev bound has no landscape
    let stamp = constants_for(p, &pot).ok();
    Emitter::new(config, stamp)?.finish(report.all_pass, to_value(&report))
}

fn gaussian_datum(grid: &Grid, h1: f64) -> Field {
    let mut u = Field::from_fn(grid, |x| {
        Complex64::new((-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp(), 0.0)
    });
    let s = h1 / u.h1_norm_sq().sqrt();
    u.scale(s);
    u
}

fn probe_run(config: &RunConfig) -> Result<Outcome, CliError> {
    let o = &config.options;
    let p = &config.params;
    let grid = make_grid(
        p,
        config.grid.unwrap_or(GridSpec {
            n: 32,
            half_width: 8.0,
        }),
    )?;
    let pot = potential_on(config, &grid)?;
    let stamp = constants_for(p, &pot).ok();
    let f = ChoquardFunctional::new(*p, &grid, pot.for_functional()).map_err(failure)?;
    let horizon = o.horizon.unwrap_or(0.1);
    let nodes = o.nodes.unwrap_or(64);
    let phi = gaussian_datum(&grid, o.amplitude.unwrap_or(1e-2));
    let pairs = probe::admissible_pairs(p).map_err(failure)?;
    let mut em = Emitter::new(config, stamp)?;
    let (traj, report) =
        match picard_iterate(&phi, &f, horizon, nodes, o.iterations.unwrap_or(8), 4) {
            Ok(r) => r,
            Err(ProbeError::OutsideContraction { factors }) => {
                return em.finish(
                    false,
                    json!({"pairs": pairs, "outside_contraction": factors}),
                );
            }
            Err(e) => return Err(failure(e)),
        };
    em.csv(
        "probe.csv",
        &["iteration", "difference", "factor"],
        report.differences.iter().enumerate().map(|(k, d)| {
            let factor = if k == 0 {
                f64::NAN
            } else {
                report.factors[k - 1]
            };
            vec![k as f64, *d, factor]
        }),
    )?;
    let solver = SplitStepSolver::new(f.clone());
    let tau = o.tau.unwrap_or(1e-3);
    let opts = EvolveOptions {
        horizon,
        tau,
        record_every: usize::MAX,
        translate: false,
    };
    let (_, end) = dynamics::evolve(&solver, &phi, None, &opts).map_err(failure)?;
    let picard_end = traj.last().expect("nonempty trajectory");
    let l2 = picard_end
        .axpy(Complex64::new(-1.0, 0.0), &end)
        .map_err(failure)?
        .norm_sq()
        .sqrt();
    let radius = if o.radius.unwrap_or(false) {
        Some(probe::small_data_radius(&phi, &f, horizon, nodes.min(32)).map_err(failure)?)
    } else {
        None
    };
    let worst = worst_factor(&report);
    let pass = worst < 1.0 && l2 < 1e-6;
    em.finish(
        pass,
        json!({
            "pairs": pairs,
            "picard": report,
            "worst_factor": worst,
            "split_step_l2_distance": l2,
            "split_step_tau": tau,
            "small_data": radius,
        }),
    )
}
