//! Command-line driver: configuration, dispatch and artifacts.
//!
//! Exit codes: 0 when every check of the experiment holds, 2 when a check
//! fails, 1 on usage or configuration errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Experiment, GridSpec, Options, RunConfig};
pub use crate::run::{run, Outcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("check failed: {0}")]
    Failure(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failure(_) => 2,
            CliError::Usage(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "choquard",
    version,
    about = "Normalized solutions of critical Choquard equations with potential"
)]
pub struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct ModelArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    /// Potential spec, e.g. `zero`, `gaussian_well:depth=-0.5,width=2`,
    /// `yukawa:strength=1,range=1`.
    #[arg(long)]
    pub potential: Option<String>,
    /// Grid as `n,L`.
    #[arg(long)]
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct MassArgs {
    #[arg(long)]
    pub a: Option<f64>,
    /// Mass as a fraction of a0.
    #[arg(long)]
    pub a_fraction: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Points per axis of the automatically sized box.
    #[arg(long)]
    pub n_auto: Option<usize>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct TimeArgs {
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub record_every: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sharp constants and landscape thresholds.
    Constants(ModelArgs),
    /// Trichotomy of max f(a, ·) around a0.
    Landscape(ModelArgs),
    /// Local minimizer at mass a.
    GroundState {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mass: MassArgs,
    },
    /// m(a) over masses given as fractions of a0.
    MCurve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mass: MassArgs,
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
        #[arg(long)]
        cold_starts: bool,
    },
    /// Split-step evolution of a CHQF field or of the ground state.
    Evolve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mass: MassArgs,
        #[command(flatten)]
        time: TimeArgs,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Perturbed ground states and their orbit distance.
    Stability {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mass: MassArgs,
        #[command(flatten)]
        time: TimeArgs,
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
    },
    /// Kato and L^{d/2} conditions of the potential.
    Kato(ModelArgs),
    /// Picard iteration of the Duhamel map for small Gaussian data.
    Probe {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        time: TimeArgs,
        /// H¹ norm of the datum.
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        /// Also bisect the empirical small-data radius.
        #[arg(long)]
        radius: bool,
    },
}

impl Command {
    fn split(self) -> (Experiment, ModelArgs, Options) {
        let mass_opts = |m: MassArgs| Options {
            a: m.a,
            a_fraction: m.a_fraction,
            tol: m.tol,
            max_iter: m.max_iter,
            n_auto: m.n_auto,
            ..Default::default()
        };
        let with_time = |mut o: Options, t: TimeArgs| {
            o.horizon = t.horizon;
            o.tau = t.tau;
            o.record_every = t.record_every;
            o
        };
        match self {
            Command::Constants(m) => (Experiment::Constants, m, Options::default()),
            Command::Landscape(m) => (Experiment::Landscape, m, Options::default()),
            Command::Kato(m) => (Experiment::Kato, m, Options::default()),
            Command::GroundState { model, mass } => {
                (Experiment::GroundState, model, mass_opts(mass))
            }
            Command::MCurve {
                model,
                mass,
                fractions,
                cold_starts,
            } => {
                let mut o = mass_opts(mass);
                o.fractions = fractions;
                o.cold_starts = cold_starts.then_some(true);
                (Experiment::MCurve, model, o)
            }
            Command::Evolve {
                model,
                mass,
                time,
                input,
            } => {
                let mut o = with_time(mass_opts(mass), time);
                o.input = input;
                (Experiment::Evolve, model, o)
            }
            Command::Stability {
                model,
                mass,
                time,
                deltas,
            } => {
                let mut o = with_time(mass_opts(mass), time);
                o.deltas = deltas;
                (Experiment::Stability, model, o)
            }
            Command::Probe {
                model,
                time,
                amplitude,
                nodes,
                iterations,
                radius,
            } => {
                let mut o = with_time(Options::default(), time);
                o.amplitude = amplitude;
                o.nodes = nodes;
                o.iterations = iterations;
                o.radius = radius.then_some(true);
                (Experiment::Probe, model, o)
            }
        }
    }
}

/// Merges the config file (if any) with the command line.
pub fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
    let file = cli.config.as_deref().map(RunConfig::load).transpose()?;
    let mut cfg = match (file, cli.command) {
        (None, None) => return Err(CliError::Usage("give a subcommand or --config".into())),
        (Some(cfg), None) => cfg,
        (base, Some(cmd)) => {
            let (experiment, model, opts) = cmd.split();
            let mut cfg = match base {
                Some(c) if c.experiment != experiment => {
                    return Err(CliError::Usage(format!(
                        "config key `experiment` is {:?} but the subcommand is {:?}",
                        c.experiment.name(),
                        experiment.name()
                    )))
                }
                Some(c) => c,
                None => RunConfig::new(experiment),
            };
            if let Some(d) = model.d {
                cfg.params.d = d;
            }
            if let Some(a) = model.alpha {
                cfg.params.alpha = a;
            }
            if let Some(q) = model.q {
                cfg.params.q = q;
            }
            if let Some(p) = model.potential {
                cfg.potential = p;
            }
            if model.grid.is_some() {
                cfg.grid = model.grid;
            }
            cfg.options.overlay(opts);
            cfg
        }
    };
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `args`, runs, prints a one-line status, returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = choquard_core::par::set_threads(n) {
            eprintln!("error: --threads: {e}");
            return 1;
        }
    }
    let outcome = resolve(cli).and_then(|cfg| run(&cfg).map(|o| (cfg, o)));
    match outcome {
        Ok((cfg, o)) => {
            let status = if o.pass { "pass" } else { "FAIL" };
            println!(
                "{}: {status} ({})",
                cfg.experiment.name(),
                cfg.output_dir.display()
            );
            if o.pass {
                0
            } else {
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
