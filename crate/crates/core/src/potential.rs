//! External potentials, their Kato and `L^{d/2}` norms, and the
//! admissibility conditions on `V₋`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::energy::ModelParams;
use crate::landscape::LandscapeConstants;
use crate::special;
use crate::spectral::{self, Field, Grid, SpectralError};
use crate::{par, Complex64};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PotentialError {
    #[error("Kato quadrature needs d = 3, got d = {0}")]
    UnsupportedDimension(usize),
    #[error("sampled potential lives on a different grid")]
    GridMismatch,
    #[error("cannot parse potential spec {spec:?}: {reason}")]
    Parse { spec: String, reason: String },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Zero,
    /// `depth · exp(−|x|²/width²)`.
    GaussianWell {
        depth: f64,
        width: f64,
    },
    /// `strength · exp(−|x|/range)/|x|`.
    Yukawa {
        strength: f64,
        range: f64,
    },
    GridSampled(Field),
}

impl fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialKind::Zero => write!(f, "zero"),
            PotentialKind::GaussianWell { depth, width } => {
                write!(f, "gaussian_well:depth={depth},width={width}")
            }
            PotentialKind::Yukawa { strength, range } => {
                write!(f, "yukawa:strength={strength},range={range}")
            }
            PotentialKind::GridSampled(u) => write!(f, "grid_sampled:n={}", u.grid().n()),
        }
    }
}

/// Parses `zero`, `gaussian_well:depth=D,width=W` or
/// `yukawa:strength=S,range=R` (keys optional, defaulting to 1).
impl FromStr for PotentialKind {
    type Err = PotentialError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let err = |reason: String| PotentialError::Parse {
            spec: spec.to_string(),
            reason,
        };
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let mut keys = Vec::new();
        for item in rest.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {item:?}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| err(format!("bad number {v:?}")))?;
            if !v.is_finite() {
                return Err(err(format!("{k} is not finite")));
            }
            keys.push((k.trim().to_string(), v));
        }
        let take = |allowed: &[&str]| -> Result<Vec<f64>, PotentialError> {
            for (k, _) in &keys {
                if !allowed.contains(&k.as_str()) {
                    return Err(err(format!("unknown key {k:?}")));
                }
            }
            Ok(allowed
                .iter()
                .map(|a| {
                    keys.iter()
                        .rev()
                        .find(|(k, _)| k == a)
                        .map_or(1.0, |(_, v)| *v)
                })
                .collect())
        };
        match name.trim() {
            "zero" => {
                take(&[])?;
                Ok(PotentialKind::Zero)
            }
            "gaussian_well" => {
                let v = take(&["depth", "width"])?;
                if v[1] <= 0.0 {
                    return Err(err("width must be positive".into()));
                }
                Ok(PotentialKind::GaussianWell {
                    depth: v[0],
                    width: v[1],
                })
            }
            "yukawa" => {
                let v = take(&["strength", "range"])?;
                if v[1] <= 0.0 {
                    return Err(err("range must be positive".into()));
                }
                Ok(PotentialKind::Yukawa {
                    strength: v[0],
                    range: v[1],
                })
            }
            other => Err(err(format!("unknown kind {other:?}"))),
        }
    }
}

/// Node value of `e^{−r/R}/r` at `r = 0`.
///
/// Chosen so that the lattice sum of `V(y)/|y|` with the corrected `1/|y|`
/// origin weight carries the singular corrections of both `1/|y|²` and
/// `−1/(R|y|)`: `V(0) = Z₃(1)/(Z₃(½) h) − 1/R`.
fn coulomb_node_value(h: f64, range: f64) -> f64 {
    special::epstein_zeta(3, 1.0) / special::epstein_zeta(3, 0.5) / h - 1.0 / range
}

/// Samples a closed-form kind on the grid nodes; sampled fields pass through.
pub fn sample(kind: &PotentialKind, grid: &Grid) -> Result<Vec<f64>, PotentialError> {
    let h = grid.spacing();
    Ok(match kind {
        PotentialKind::Zero => vec![0.0; grid.len()],
        PotentialKind::GaussianWell { depth, width } => {
            let w2 = width * width;
            par::collect(grid.len(), |i| depth * (-grid.radius_sq(i) / w2).exp())
        }
        PotentialKind::Yukawa { strength, range } => {
            let origin = if grid.d() == 3 {
                coulomb_node_value(h, *range)
            } else {
                1.0 / h
            };
            par::collect(grid.len(), |i| {
                let r = grid.radius_sq(i).sqrt();
                if r == 0.0 {
                    strength * origin
                } else {
                    strength * (-r / range).exp() / r
                }
            })
        }
        PotentialKind::GridSampled(u) => {
            if u.grid() != grid {
                return Err(PotentialError::GridMismatch);
            }
            u.values.iter().map(|v| v.re).collect()
        }
    })
}

/// `(Σ h^d |v|^{d/2})^{2/d}`.
pub fn lp_halfd_norm(v: &[f64], grid: &Grid) -> f64 {
    let p = 0.5 * grid.d() as f64;
    (grid.cell_volume() * par::sum(v.len(), |i| v[i].abs().powf(p))).powf(1.0 / p)
}

/// `sup_x Σ_y h³ |V(y)|/|x−y|` over grid nodes, with the corrected weight at
/// `y = x`.
pub fn kato_norm(v: &[f64], grid: &Grid) -> Result<f64, PotentialError> {
    if grid.d() != 3 {
        return Err(PotentialError::UnsupportedDimension(grid.d()));
    }
    if v.iter().all(|x| *x == 0.0) {
        return Ok(0.0);
    }
    let abs: Vec<Complex64> = v.iter().map(|x| Complex64::new(x.abs(), 0.0)).collect();
    let conv = spectral::free_space_power_convolve(&Field::new(grid, abs)?, 1.0)?;
    Ok(par::max(conv.values.len(), |i| conv.values[i].re))
}

/// `L^{d/2}` norm of a sampled kind. For Yukawa in d = 3 the origin cell
/// uses the corrected weight of `r^{−3/2}`, `−Z₃(¾) h^{3/2}|strength|^{3/2}`.
fn kind_lp_halfd_norm(kind: &PotentialKind, v: &[f64], grid: &Grid) -> f64 {
    match kind {
        PotentialKind::Yukawa { strength, .. } if grid.d() == 3 && v.iter().any(|x| *x != 0.0) => {
            let o = grid.origin();
            let h = grid.spacing();
            let rest = grid.cell_volume()
                * par::sum(v.len(), |i| if i == o { 0.0 } else { v[i].abs().powf(1.5) });
            let origin = -special::epstein_zeta(3, 0.75) * h.powf(1.5) * strength.abs().powf(1.5);
            (rest + origin).powf(2.0 / 3.0)
        }
        _ => lp_halfd_norm(v, grid),
    }
}

/// `V₋ = max(−V, 0)`.
pub fn negative_part(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (-x).max(0.0)).collect()
}

/// A potential bound to a grid, with its norms.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    kind: PotentialKind,
    grid: Grid,
    values: Vec<f64>,
    pub kato_norm: f64,
    pub neg_kato_norm: f64,
    pub lp_halfd_norm: f64,
    pub neg_lp_halfd_norm: f64,
}

impl Potential {
    pub fn new(kind: PotentialKind, grid: &Grid) -> Result<Self, PotentialError> {
        let values = sample(&kind, grid)?;
        let neg = negative_part(&values);
        let kato = |v: &[f64]| match kato_norm(v, grid) {
            Err(PotentialError::UnsupportedDimension(_)) => Ok(f64::NAN),
            other => other,
        };
        Ok(Potential {
            kato_norm: kato(&values)?,
            neg_kato_norm: kato(&neg)?,
            lp_halfd_norm: kind_lp_halfd_norm(&kind, &values, grid),
            neg_lp_halfd_norm: kind_lp_halfd_norm(&kind, &neg, grid),
            kind,
            grid: grid.clone(),
            values,
        })
    }

    pub fn zero(grid: &Grid) -> Self {
        Potential {
            kind: PotentialKind::Zero,
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
            kato_norm: 0.0,
            neg_kato_norm: 0.0,
            lp_halfd_norm: 0.0,
            neg_lp_halfd_norm: 0.0,
        }
    }

    /// The same kind on another grid, norms recomputed.
    pub fn regrid(&self, grid: &Grid) -> Result<Self, PotentialError> {
        Potential::new(self.kind.clone(), grid)
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// Samples for the energy functional; `None` for the zero potential.
    pub fn for_functional(&self) -> Option<Vec<f64>> {
        (!self.is_zero()).then(|| self.values.clone())
    }

    pub fn to_field(&self) -> Field {
        Field::from_real(&self.grid, &self.values).expect("sampled on own grid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    /// Equality within roundoff: the coercivity constant degenerates.
    Marginal,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub potential: String,
    pub kato_norm: f64,
    pub neg_kato_norm: f64,
    pub lp_halfd_norm: f64,
    pub neg_lp_halfd_norm: f64,
    pub kato_threshold: f64,
    pub sobolev_s: f64,
    /// `V ∈ 𝒦 ∩ L^{d/2}` (finite norms).
    pub kato_and_lp: bool,
    /// `‖V₋‖_𝒦 < d(d−2)|B₁|`.
    pub neg_kato_below_threshold: bool,
    /// `‖V₋‖_{d/2}` against `𝒮`.
    pub neg_lp_vs_sobolev: Verdict,
    pub all_pass: bool,
}

/// `d(d−2)|B₁|`, the bound on `‖V₋‖_𝒦`.
pub fn kato_threshold(d: usize) -> f64 {
    let df = d as f64;
    df * (df - 2.0) * special::unit_ball_volume(d)
}

pub fn check_conditions(
    v: &Potential,
    c: &LandscapeConstants,
    params: &ModelParams,
) -> ConditionReport {
    let threshold = kato_threshold(params.d);
    let kato_and_lp = v.kato_norm.is_finite() && v.lp_halfd_norm.is_finite();
    let neg_kato_below_threshold = v.neg_kato_norm < threshold;
    let gap = c.sobolev_s - v.neg_lp_halfd_norm;
    let neg_lp_vs_sobolev = if gap.abs() <= 1e-12 * c.sobolev_s {
        Verdict::Marginal
    } else if gap > 0.0 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    ConditionReport {
        potential: v.kind.to_string(),
        kato_norm: v.kato_norm,
        neg_kato_norm: v.neg_kato_norm,
        lp_halfd_norm: v.lp_halfd_norm,
        neg_lp_halfd_norm: v.neg_lp_halfd_norm,
        kato_threshold: threshold,
        sobolev_s: c.sobolev_s,
        kato_and_lp,
        neg_kato_below_threshold,
        neg_lp_vs_sobolev,
        all_pass: kato_and_lp && neg_kato_below_threshold && neg_lp_vs_sobolev == Verdict::Pass,
    }
}
