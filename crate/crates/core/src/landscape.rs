//! Sharp constants and the landscape function
//! `f(a, ρ) = ½(1 − v/𝒮) − C a^{(2q−e)/2} ρ^{(e−2)/2}/(2q) − ρ^{2*−1}/(2·2*·S_α^{2*})`
//! with `e = d(q−2)+α` and `v = ‖V₋‖_{d/2}`.
//!
//! `𝒮` and the Gagliardo–Nirenberg constant are computed (radial quadrature
//! and a radial ground-state solve); the remaining quantities are closed
//! forms in them.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::energy::ModelParams;
use crate::quad;
use crate::spectral::{self, Field, Grid};
use crate::Complex64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LandscapeError {
    #[error("alpha = {alpha} outside (0, {d})")]
    Alpha { alpha: f64, d: usize },
    #[error("dimension d = {0} must be at least 3")]
    Dimension(usize),
    #[error("exponent p = {p} outside [2, {hi})")]
    Exponent { p: f64, hi: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("‖V₋‖_(d/2) = {v} exceeds the Sobolev constant {s}")]
    PotentialTooDeep { v: f64, s: f64 },
}

/// `C(d,α) = π^{α/2} Γ((d−α)/2)/Γ(d−α/2) · (Γ(d/2)/Γ(d))^{−1+α/d}`.
pub fn hls_constant(d: usize, alpha: f64) -> Result<f64, LandscapeError> {
    let df = d as f64;
    if !(alpha > 0.0 && alpha < df) {
        return Err(LandscapeError::Alpha { alpha, d });
    }
    Ok(
        PI.powf(0.5 * alpha) * gamma(0.5 * (df - alpha)) / gamma(df - 0.5 * alpha)
            * (gamma(0.5 * df) / gamma(df)).powf(-1.0 + alpha / df),
    )
}

/// Surface area of the unit sphere in `ℝ^d`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(0.5 * d as f64) / gamma(0.5 * d as f64)
}

/// Rayleigh quotient `‖∇U‖²/‖U‖²_{2d/(d−2)}` of `U = (λ² + |x|²)^{−(d−2)/2}`.
pub fn talenti_quotient(d: usize, lambda: f64) -> f64 {
    let df = d as f64;
    let l2 = lambda * lambda;
    let grad = quad::integrate_to_infinity(
        |r| (df - 2.0).powi(2) * r.powf(df + 1.0) * (l2 + r * r).powf(-df),
        0.0,
        1e-15,
    );
    let crit =
        quad::integrate_to_infinity(|r| r.powf(df - 1.0) * (l2 + r * r).powf(-df), 0.0, 1e-15);
    let w = sphere_area(d);
    w * grad / (w * crit).powf((df - 2.0) / df)
}

/// Sharp Sobolev constant `𝒮` from the Talenti profile.
pub fn sobolev_constant(d: usize) -> Result<f64, LandscapeError> {
    if d < 3 {
        return Err(LandscapeError::Dimension(d));
    }
    Ok(talenti_quotient(d, 1.0))
}

/// Upper end `2d/(d−2)` of the Gagliardo–Nirenberg range.
fn gn_upper(d: usize) -> f64 {
    2.0 * d as f64 / (d as f64 - 2.0)
}

/// Best constant in `‖u‖_p ≤ C ‖∇u‖^β ‖u‖^{1−β}`, `β = d(1/2 − 1/p)`.
///
/// Solves `−ΔQ + Q = Q^{p−1}` for the radial profile on a cell-centred
/// grid of `cells` points over `[0, 30]` (Petviashvili iteration), evaluates
/// the Weinstein quotient on it, and extrapolates from `cells` and
/// `2·cells` to remove the `O(Δr²)` error. Results are memoized.
pub fn gn_constant_at(d: usize, p: f64, cells: usize) -> Result<f64, LandscapeError> {
    if d < 3 {
        return Err(LandscapeError::Dimension(d));
    }
    let hi = gn_upper(d);
    if !(p >= 2.0 && p < hi) {
        return Err(LandscapeError::Exponent { p, hi });
    }
    if p == 2.0 {
        return Ok(1.0);
    }
    type Cache = Mutex<HashMap<(usize, u64, usize), f64>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let key = (d, p.to_bits(), cells);
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().expect("cache lock").get(&key) {
        return Ok(*v);
    }
    let coarse = RadialWeinstein::new(d, p, cells, 30.0).solve();
    let fine = RadialWeinstein::new(d, p, 2 * cells, 30.0).solve();
    let value = (4.0 * fine - coarse) / 3.0;
    cache.lock().expect("cache lock").insert(key, value);
    Ok(value)
}

/// [`gn_constant_at`] with 256 cells.
pub fn gn_constant(d: usize, p: f64) -> Result<f64, LandscapeError> {
    gn_constant_at(d, p, 256)
}

struct RadialWeinstein {
    d: usize,
    p: f64,
    dr: f64,
    cell: Vec<f64>,
    face: Vec<f64>,
}

impl RadialWeinstein {
    fn new(d: usize, p: f64, cells: usize, radius: f64) -> Self {
        let dr = radius / cells as f64;
        let e = d as f64 - 1.0;
        let cell = (0..cells)
            .map(|i| ((i as f64 + 0.5) * dr).powf(e) * dr)
            .collect();
        let face = (0..cells)
            .map(|i| ((i as f64 + 1.0) * dr).powf(e) / dr)
            .collect();
        RadialWeinstein {
            d,
            p,
            dr,
            cell,
            face,
        }
    }

    /// `w·(A + 1)u` with `A` the discrete `−Δ` and `u = 0` beyond the last cell.
    fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        (0..n)
            .map(|i| {
                let right = self.face[i] * (u[i] - if i + 1 < n { u[i + 1] } else { 0.0 });
                let left = if i > 0 {
                    self.face[i - 1] * (u[i] - u[i - 1])
                } else {
                    0.0
                };
                right + left + self.cell[i] * u[i]
            })
            .collect()
    }

    /// Solves `w·(A + 1)x = b` (symmetric tridiagonal, Thomas algorithm).
    fn solve_shifted(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let diag: Vec<f64> = (0..n)
            .map(|i| self.face[i] + if i > 0 { self.face[i - 1] } else { 0.0 } + self.cell[i])
            .collect();
        let off: Vec<f64> = (0..n - 1).map(|i| -self.face[i]).collect();
        let mut c = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut denom = diag[0];
        c[0] = if n > 1 { off[0] / denom } else { 0.0 };
        x[0] = b[0] / denom;
        for i in 1..n {
            denom = diag[i] - off[i - 1] * c[i - 1];
            if i + 1 < n {
                c[i] = off[i] / denom;
            }
            x[i] = (b[i] - off[i - 1] * x[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        x
    }

    fn quotient(&self, u: &[f64]) -> f64 {
        let n = u.len();
        let w = sphere_area(self.d);
        let beta = self.d as f64 * (0.5 - 1.0 / self.p);
        let grad: f64 = (0..n)
            .map(|i| {
                let next = if i + 1 < n { u[i + 1] } else { 0.0 };
                self.face[i] * (next - u[i]).powi(2)
            })
            .sum::<f64>()
            * w;
        let mass: f64 = w * (0..n).map(|i| self.cell[i] * u[i] * u[i]).sum::<f64>();
        let lp: f64 = w
            * (0..n)
                .map(|i| self.cell[i] * u[i].abs().powf(self.p))
                .sum::<f64>();
        lp.powf(1.0 / self.p) / (grad.powf(0.5 * beta) * mass.powf(0.5 * (1.0 - beta)))
    }

    fn solve(&self) -> f64 {
        let n = self.cell.len();
        let mut u: Vec<f64> = (0..n)
            .map(|i| {
                let r = (i as f64 + 0.5) * self.dr;
                2.0 * (-0.5 * r * r).exp()
            })
            .collect();
        let gamma_exp = (self.p - 1.0) / (self.p - 2.0);
        let mut last = f64::NAN;
        for _ in 0..2000 {
            let lu = self.apply(&u);
            let nl: Vec<f64> = (0..n)
                .map(|i| self.cell[i] * u[i].abs().powf(self.p - 1.0))
                .collect();
            let num: f64 = lu.iter().zip(&u).map(|(a, b)| a * b).sum();
            let den: f64 = nl.iter().zip(&u).map(|(a, b)| a * b).sum();
            let m = (num / den).powf(gamma_exp);
            let next = self.solve_shifted(&nl);
            u = next.into_iter().map(|v| m * v).collect();
            let q = self.quotient(&u);
            if (q - last).abs() <= 1e-15 * q {
                break;
            }
            last = q;
        }
        self.quotient(&u)
    }
}

/// `C_{d,q,α} = C(d,α)·C_{d,p}^{2q}` with `p = 2dq/(2d−α)`.
pub fn chained_constant(params: &ModelParams, gn: f64, hls: f64) -> f64 {
    hls * gn.powf(2.0 * params.q)
}

/// Exponent `p = 2dq/(2d−α)` fed to Gagliardo–Nirenberg.
pub fn gn_exponent(params: &ModelParams) -> f64 {
    let d = params.d as f64;
    2.0 * d * params.q / (2.0 * d - params.alpha)
}

/// Every constant that enters the landscape thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeConstants {
    pub sobolev_s: f64,
    pub hls_c: f64,
    pub s_alpha: f64,
    pub gn_c: f64,
    pub chained_c: f64,
    pub v_minus_halfd: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub a0: f64,
    pub rho0: f64,
    pub beta0: f64,
}

impl LandscapeConstants {
    /// Computes 𝒮, C(d,α) and C_{d,p}, then the derived thresholds.
    pub fn compute(params: &ModelParams, v_minus_halfd: f64) -> Result<Self, LandscapeError> {
        let s = sobolev_constant(params.d)?;
        let hls = hls_constant(params.d, params.alpha)?;
        let gn = gn_constant(params.d, gn_exponent(params))?;
        Self::from_constants(params, s, hls, gn, v_minus_halfd)
    }

    /// Derived quantities from externally supplied sharp constants.
    pub fn from_constants(
        params: &ModelParams,
        sobolev_s: f64,
        hls_c: f64,
        gn_c: f64,
        v_minus_halfd: f64,
    ) -> Result<Self, LandscapeError> {
        if v_minus_halfd > sobolev_s {
            return Err(LandscapeError::PotentialTooDeep {
                v: v_minus_halfd,
                s: sobolev_s,
            });
        }
        let two_star = params.critical_exponent();
        let mut c = LandscapeConstants {
            sobolev_s,
            hls_c,
            s_alpha: sobolev_s * hls_c.powf(-1.0 / two_star),
            gn_c,
            chained_c: chained_constant(params, gn_c, hls_c),
            v_minus_halfd,
            k: 0.0,
            a0: 0.0,
            rho0: 0.0,
            beta0: 0.0,
        };
        c.k = k_const(&c, params);
        c.a0 = a0(&c, params);
        c.rho0 = rho_max(c.a0, &c, params);
        c.beta0 = beta0(&c, params);
        Ok(c)
    }

    /// `½(1 − v/𝒮)`.
    pub fn half_margin(&self) -> f64 {
        0.5 * (1.0 - self.v_minus_halfd / self.sobolev_s)
    }
}

struct Exps {
    e_sub: f64,
    e_rest: f64,
    two_star: f64,
    den: f64,
}

fn exps(p: &ModelParams) -> Exps {
    let e_sub = p.subcritical_scaling();
    let two_star = p.critical_exponent();
    Exps {
        e_sub,
        e_rest: 2.0 * p.q - e_sub,
        two_star,
        den: 2.0 * two_star - e_sub,
    }
}

fn crit_coeff(c: &LandscapeConstants, two_star: f64) -> f64 {
    1.0 / (2.0 * two_star * c.s_alpha.powf(two_star))
}

pub fn f_value(a: f64, rho: f64, c: &LandscapeConstants, p: &ModelParams) -> f64 {
    let e = exps(p);
    c.half_margin()
        - c.chained_c * a.powf(0.5 * e.e_rest) / (2.0 * p.q) * rho.powf(0.5 * (e.e_sub - 2.0))
        - crit_coeff(c, e.two_star) * rho.powf(e.two_star - 1.0)
}

/// `∂f/∂ρ`.
pub fn f_prime(a: f64, rho: f64, c: &LandscapeConstants, p: &ModelParams) -> f64 {
    let e = exps(p);
    -c.chained_c * a.powf(0.5 * e.e_rest) * (e.e_sub - 2.0) / (4.0 * p.q)
        * rho.powf(0.5 * (e.e_sub - 4.0))
        - (e.two_star - 1.0) * crit_coeff(c, e.two_star) * rho.powf(e.two_star - 2.0)
}

fn x_const(c: &LandscapeConstants, p: &ModelParams) -> f64 {
    let e = exps(p);
    e.two_star * (2.0 - e.e_sub) * c.chained_c * c.s_alpha.powf(e.two_star)
        / (2.0 * p.q * (e.two_star - 1.0))
}

/// Unique critical point `ρₐ = X^{2/den} a^{(2q−e)/den}` of `f(a, ·)`.
pub fn rho_max(a: f64, c: &LandscapeConstants, p: &ModelParams) -> f64 {
    let e = exps(p);
    x_const(c, p).powf(2.0 / e.den) * a.powf(e.e_rest / e.den)
}

/// `K` in `max_ρ f(a, ρ) = ½(1 − v/𝒮) − K a^{(d+2−α)/d}`.
pub fn k_const(c: &LandscapeConstants, p: &ModelParams) -> f64 {
    let e = exps(p);
    let x = x_const(c, p);
    c.chained_c / (2.0 * p.q) * x.powf((e.e_sub - 2.0) / e.den)
        + crit_coeff(c, e.two_star) * x.powf(2.0 * (e.two_star - 1.0) / e.den)
}

/// Exponent `(d+2−α)/d` of `a` in the maximum of `f(a, ·)`.
pub fn max_exponent(p: &ModelParams) -> f64 {
    (p.d as f64 + 2.0 - p.alpha) / p.d as f64
}

/// Mass at which `max_ρ f(a, ρ) = 0`.
pub fn a0(c: &LandscapeConstants, p: &ModelParams) -> f64 {
    (c.half_margin() / k_const(c, p)).powf(1.0 / max_exponent(p))
}

/// `β₀ = ½(1 − v/𝒮) − ρ₀^{2*−1}/(2·2*·S_α^{2*})`.
pub fn beta0(c: &LandscapeConstants, p: &ModelParams) -> f64 {
    let two_star = p.critical_exponent();
    let rho0 = rho_max(a0(c, p), c, p);
    c.half_margin() - crit_coeff(c, two_star) * rho0.powf(two_star - 1.0)
}

/// Closed-form maximum `½(1 − v/𝒮) − K a^{(d+2−α)/d}`.
pub fn max_f_closed(a: f64, c: &LandscapeConstants, p: &ModelParams) -> f64 {
    c.half_margin() - k_const(c, p) * a.powf(max_exponent(p))
}

/// Golden-section maximization of `f(a, ·)` on `[ρₐ/10, 10ρₐ]` (in `ln ρ`).
pub fn maximize_f(a: f64, c: &LandscapeConstants, p: &ModelParams) -> (f64, f64) {
    let center = rho_max(a, c, p);
    let g = |t: f64| f_value(a, t.exp(), c, p);
    let (mut lo, mut hi) = ((center / 10.0).ln(), (center * 10.0).ln());
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (g(x1), g(x2));
    while hi - lo > 1e-12 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = g(x1);
        }
    }
    let t = 0.5 * (lo + hi);
    (t.exp(), g(t))
}

/// One line of the trichotomy report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrichotomyCase {
    pub a: f64,
    pub rho_star: f64,
    pub max_f: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrichotomyReport {
    pub below: TrichotomyCase,
    pub at: TrichotomyCase,
    pub above: TrichotomyCase,
}

impl TrichotomyReport {
    pub fn pass(&self) -> bool {
        self.below.pass && self.at.pass && self.above.pass
    }
}

/// Maximizes `f` at `a₀/2`, `a₀` and `2a₀`: positive above `1e-6`, zero
/// within `1e-9`, negative below `−1e-6`.
pub fn trichotomy(c: &LandscapeConstants, p: &ModelParams) -> TrichotomyReport {
    let case = |a: f64, ok: &dyn Fn(f64) -> bool| {
        let (rho_star, max_f) = maximize_f(a, c, p);
        TrichotomyCase {
            a,
            rho_star,
            max_f,
            pass: ok(max_f),
        }
    };
    TrichotomyReport {
        below: case(0.5 * c.a0, &|m| m > 1e-6),
        at: case(c.a0, &|m| m.abs() < 1e-9),
        above: case(2.0 * c.a0, &|m| m < -1e-6),
    }
}

/// Result of sampling `f(a₂, ·)` on `[a₂ρ₁/a₁, ρ₁]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignReport {
    pub a1: f64,
    pub rho1: f64,
    pub a2: f64,
    pub min_f: f64,
    pub left_endpoint_f: f64,
    pub pass: bool,
}

pub fn sign_propagation_check(
    a1: f64,
    rho1: f64,
    a2: f64,
    samples: usize,
    c: &LandscapeConstants,
    p: &ModelParams,
) -> Result<SignReport, LandscapeError> {
    if f_value(a1, rho1, c, p) < 0.0 {
        return Err(LandscapeError::Precondition(format!("f({a1}, {rho1}) < 0")));
    }
    if !(a2 > 0.0 && a2 <= a1) {
        return Err(LandscapeError::Precondition(format!(
            "a2 = {a2} not in (0, {a1}]"
        )));
    }
    let lo = a2 * rho1 / a1;
    let samples = samples.max(2);
    let min_f = (0..samples)
        .map(|i| {
            let t = i as f64 / (samples - 1) as f64;
            f_value(a2, lo + t * (rho1 - lo), c, p)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(SignReport {
        a1,
        rho1,
        a2,
        min_f,
        left_endpoint_f: f_value(a2, lo, c, p),
        pass: min_f >= -1e-12,
    })
}

/// Number of sign changes of `f′(a, ·)` on a log grid over `[1e-8, 1e8]`.
pub fn f_prime_sign_changes(
    a: f64,
    c: &LandscapeConstants,
    p: &ModelParams,
    points: usize,
) -> usize {
    let vals: Vec<f64> = (0..points)
        .map(|i| {
            let t = -8.0 + 16.0 * i as f64 / (points - 1) as f64;
            f_prime(a, 10f64.powf(t), c, p)
        })
        .collect();
    vals.windows(2)
        .filter(|w| (w[0] > 0.0) != (w[1] > 0.0))
        .count()
}

/// Bisection for the `a` where the numerical maximum of `f(a, ·)` vanishes.
pub fn a0_by_bisection(c: &LandscapeConstants, p: &ModelParams) -> f64 {
    let (mut lo, mut hi) = (c.a0 * 0.25, c.a0 * 4.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if maximize_f(mid, c, p).1 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Grid Rayleigh quotient of the HLS optimizer
/// `h(x) = (γ² + |x|²)^{−(2d−α)/2}` on `grid`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HlsWitness {
    /// `∫(|x|^{−α} ∗ h)h / ‖h‖²_{2d/(2d−α)}`, free-space convolution.
    pub quotient: f64,
    /// Same quotient with the periodic `|k|^{α−d}` surrogate (mean removed).
    pub periodic_quotient: f64,
    pub hls_c: f64,
    /// `quotient / C(d,α)`.
    pub ratio: f64,
}

pub fn hls_witness(
    grid: &Grid,
    alpha: f64,
    gamma_width: f64,
) -> Result<HlsWitness, LandscapeError> {
    let d = grid.d();
    let hls_c = hls_constant(d, alpha)?;
    let df = d as f64;
    let expo = -0.5 * (2.0 * df - alpha);
    let g2 = gamma_width * gamma_width;
    let h = Field::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Complex64::new((g2 + r2).powf(expo), 0.0)
    });
    let r = 2.0 * df / (2.0 * df - alpha);
    let denom = h
        .lp_norm(r)
        .map_err(|e| LandscapeError::Precondition(e.to_string()))?
        .powi(2);
    let pair = |conv: &Field| h.inner(conv).expect("same grid").re / denom;
    let free = spectral::free_space_power_convolve(&h, alpha)
        .map_err(|e| LandscapeError::Precondition(e.to_string()))?;
    // |x|^{−α} has symbol κ|k|^{α−d}
    let kappa =
        PI.powf(0.5 * df) * 2f64.powf(df - alpha) * gamma(0.5 * (df - alpha)) / gamma(0.5 * alpha);
    let periodic = spectral::riesz_convolve(&h, df - alpha)
        .map_err(|e| LandscapeError::Precondition(e.to_string()))?;
    let quotient = pair(&free);
    Ok(HlsWitness {
        quotient,
        periodic_quotient: kappa * pair(&periodic),
        hls_c,
        ratio: quotient / hls_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> (ModelParams, LandscapeConstants) {
        let p = ModelParams::reference();
        (p, LandscapeConstants::compute(&p, 0.0).unwrap())
    }

    #[test]
    fn hls_closed_form_values() {
        let v = hls_constant(4, 2.0).unwrap();
        assert!((v - 0.5 * PI * 6f64.sqrt()).abs() < 1e-12);
        assert!(hls_constant(3, 3.0).is_err() && hls_constant(3, 0.0).is_err());
        let three_two = PI.powf(1.5) * (PI.sqrt() / 4.0).powf(-1.0 / 3.0);
        assert!((hls_constant(3, 2.0).unwrap() - three_two).abs() < 1e-12 * three_two);
        assert!((three_two - 7.303872).abs() < 1e-6);
    }

    #[test]
    fn sobolev_matches_aubin_talenti_closed_form() {
        for d in 3..7 {
            let df = d as f64;
            let exact = PI * df * (df - 2.0) * (gamma(0.5 * df) / gamma(df)).powf(2.0 / df);
            assert!(
                (sobolev_constant(d).unwrap() - exact).abs() < 1e-10 * exact,
                "d = {d}"
            );
        }
        assert!(sobolev_constant(2).is_err());
    }

    #[test]
    fn talenti_quotient_is_scale_invariant() {
        let base = talenti_quotient(3, 1.0);
        for l in [0.1, 0.5, 3.0, 20.0] {
            assert!((talenti_quotient(3, l) - base).abs() < 1e-8 * base);
        }
    }

    #[test]
    fn gn_degenerate_and_range() {
        assert_eq!(gn_constant(3, 2.0).unwrap(), 1.0);
        assert!(gn_constant(3, 6.0).is_err());
        assert!(gn_constant(3, 1.5).is_err());
    }

    #[test]
    fn gn_resolution_study() {
        let a = gn_constant_at(3, 2.85, 128).unwrap();
        let b = gn_constant_at(3, 2.85, 256).unwrap();
        assert!((a - b).abs() < 1e-3 * b, "{a} {b}");
    }

    #[test]
    fn exponent_bookkeeping() {
        let p = ModelParams::reference();
        let e = exps(&p);
        assert!((e.e_sub + e.e_rest - 2.0 * p.q).abs() < 1e-15);
        let lhs = e.e_rest * (e.two_star - 1.0) / e.den;
        assert!((lhs - max_exponent(&p)).abs() < 1e-14);
    }

    #[test]
    fn constants_are_consistent() {
        let (p, c) = reference();
        assert!((c.s_alpha - c.sobolev_s * c.hls_c.powf(-1.0 / 4.0)).abs() < 1e-14);
        assert!(c.k > 0.0);
        assert!(f_value(c.a0, c.rho0, &c, &p).abs() < 1e-10);
        assert!(f_prime(c.a0, c.rho0, &c, &p).abs() < 1e-10);
        assert!(c.beta0 > 0.0);
    }

    #[test]
    fn limits_are_negative() {
        let (p, c) = reference();
        for a in [0.1 * c.a0, c.a0, 3.0 * c.a0] {
            assert!(f_value(a, 1e-8, &c, &p) < 0.0);
            assert!(f_value(a, 1e8, &c, &p) < 0.0);
        }
    }

    #[test]
    fn single_critical_point_and_monotone_in_a() {
        let (p, c) = reference();
        for a in [1e-3, 0.1, 1.0, 2.0, 10.0, 100.0] {
            assert_eq!(f_prime_sign_changes(a, &c, &p, 4001), 1, "a = {a}");
        }
        for rho in [0.01, 0.5, 2.0, 8.0] {
            let vals: Vec<f64> = (1..50)
                .map(|i| f_value(0.1 * i as f64, rho, &c, &p))
                .collect();
            assert!(vals.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn a0_bisection_reproduces_closed_form() {
        let (p, c) = reference();
        let b = a0_by_bisection(&c, &p);
        assert!((b - c.a0).abs() < 1e-8 * c.a0, "{b} {}", c.a0);
    }

    #[test]
    fn sign_propagation() {
        let (p, c) = reference();
        let a1 = 0.7 * c.a0;
        let rho1 = rho_max(a1, &c, &p);
        let same = sign_propagation_check(a1, rho1, a1, 1, &c, &p).unwrap();
        assert!(same.pass && (same.min_f - f_value(a1, rho1, &c, &p)).abs() < 1e-15);
        let half = sign_propagation_check(a1, rho1, 0.5 * a1, 64, &c, &p).unwrap();
        assert!(half.pass);
        assert!(half.left_endpoint_f >= f_value(a1, rho1, &c, &p) - 1e-12);
        assert!(sign_propagation_check(2.0 * c.a0, c.rho0, c.a0, 8, &c, &p).is_err());
        assert!(sign_propagation_check(a1, rho1, 2.0 * a1, 8, &c, &p).is_err());
    }

    #[test]
    fn trichotomy_holds() {
        let (p, c) = reference();
        let t = trichotomy(&c, &p);
        assert!(t.pass(), "{t:?}");
    }

    #[test]
    fn deep_potential_is_rejected() {
        let p = ModelParams::reference();
        let err = LandscapeConstants::from_constants(&p, 5.0, 7.0, 0.5, 6.0).unwrap_err();
        assert!(matches!(err, LandscapeError::PotentialTooDeep { .. }));
    }
}
