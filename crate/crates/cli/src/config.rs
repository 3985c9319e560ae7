//! Run configuration: JSON file, command-line overlay, validation.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use choquard_core::energy::ModelParams;
use choquard_core::potential::PotentialKind;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Constants,
    Landscape,
    GroundState,
    MCurve,
    Evolve,
    Stability,
    Kato,
    Probe,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Constants => "constants",
            Experiment::Landscape => "landscape",
            Experiment::GroundState => "ground-state",
            Experiment::MCurve => "m-curve",
            Experiment::Evolve => "evolve",
            Experiment::Stability => "stability",
            Experiment::Kato => "kato",
            Experiment::Probe => "probe",
        }
    }

    /// File stem for artifacts.
    pub fn stem(&self) -> String {
        self.name().replace('-', "_")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
}

impl FromStr for GridSpec {
    type Err = String;

    /// `"n,L"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (n, l) = s
            .split_once(',')
            .ok_or_else(|| format!("grid must be n,L, got {s:?}"))?;
        Ok(GridSpec {
            n: n.trim().parse().map_err(|e| format!("grid n: {e}"))?,
            half_width: l.trim().parse().map_err(|e| format!("grid L: {e}"))?,
        })
    }
}

/// Experiment-specific settings; unset fields take per-experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Options {
    /// Mass; overrides `a_fraction`.
    pub a: Option<f64>,
    /// Mass as a fraction of `a₀` (default 0.5).
    pub a_fraction: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    /// Points per axis of the automatically sized ground-state box.
    pub n_auto: Option<usize>,
    /// `m-curve` masses as fractions of `a₀`.
    pub fractions: Option<Vec<f64>>,
    pub cold_starts: Option<bool>,
    pub horizon: Option<f64>,
    pub tau: Option<f64>,
    pub record_every: Option<usize>,
    pub deltas: Option<Vec<f64>>,
    /// Initial datum for `evolve` (CHQF).
    pub input: Option<PathBuf>,
    /// `H¹` norm of the Gaussian datum for `probe`.
    pub amplitude: Option<f64>,
    pub nodes: Option<usize>,
    pub iterations: Option<usize>,
    /// Also bisect the empirical small-data radius in `probe`.
    pub radius: Option<bool>,
}

impl Options {
    /// Fields set in `other` replace ours.
    pub fn overlay(&mut self, other: Options) {
        macro_rules! take {
            ($($f:ident),*) => {$(if other.$f.is_some() { self.$f = other.$f; })*};
        }
        take!(
            a,
            a_fraction,
            tol,
            max_iter,
            n_auto,
            fractions,
            cold_starts,
            horizon,
            tau,
            record_every,
            deltas,
            input,
            amplitude,
            nodes,
            iterations,
            radius
        );
    }
}

fn default_params() -> ModelParams {
    ModelParams::reference()
}

fn default_potential() -> String {
    "zero".into()
}

fn default_output() -> PathBuf {
    PathBuf::from("choquard-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default = "default_params")]
    pub params: ModelParams,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default = "default_potential")]
    pub potential: String,
    #[serde(default)]
    pub options: Options,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        RunConfig {
            experiment,
            params: default_params(),
            grid: None,
            potential: default_potential(),
            options: Options::default(),
            seed: 0,
            output_dir: default_output(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        if text.trim().is_empty() {
            return Err(CliError::Usage(
                "config is empty (missing key `experiment`)".into(),
            ));
        }
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                CliError::Usage(format!("config: {}", e.inner()))
            } else {
                CliError::Usage(format!("config key `{path}`: {}", e.inner()))
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks exponents, grid and potential before dispatch.
    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.params;
        ModelParams::new(p.d, p.alpha, p.q).map_err(|e| CliError::Usage(format!("params: {e}")))?;
        if let Some(g) = &self.grid {
            if !g.n.is_power_of_two() || g.n < 4 {
                return Err(CliError::Usage(format!(
                    "grid.n must be a power of two >= 4, got {}",
                    g.n
                )));
            }
            if !(g.half_width > 0.0) {
                return Err(CliError::Usage(format!(
                    "grid.L must be positive, got {}",
                    g.half_width
                )));
            }
        }
        self.potential_kind()?;
        let o = &self.options;
        let positive = [
            ("options.a", o.a),
            ("options.a_fraction", o.a_fraction),
            ("options.tol", o.tol),
            ("options.horizon", o.horizon),
            ("options.tau", o.tau),
            ("options.amplitude", o.amplitude),
        ];
        for (key, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CliError::Usage(format!("{key} must be positive, got {v}")));
                }
            }
        }
        if let Some(f) = &o.fractions {
            if f.is_empty() || f.iter().any(|x| !(*x > 0.0)) {
                return Err(CliError::Usage(
                    "options.fractions must be non-empty and positive".into(),
                ));
            }
        }
        if let Some(d) = &o.deltas {
            if d.is_empty() || d.iter().any(|x| !(*x >= 0.0)) {
                return Err(CliError::Usage(
                    "options.deltas must be non-empty and non-negative".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn potential_kind(&self) -> Result<PotentialKind, CliError> {
        self.potential
            .parse::<PotentialKind>()
            .map_err(|e| CliError::Usage(format!("potential: {e}")))
    }
}
