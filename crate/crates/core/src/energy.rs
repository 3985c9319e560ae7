//! Energy functional, nonlocal terms, gradient, dilations and fiber maps.
//!
//! `I(u) = ½‖∇u‖² + ½∫V|u|² − D_q(u)/(2q) − D_{2*}(u)/(2·2*)` with
//! `D_p(u) = ∫(|x|^{-α} ∗ |u|^p)|u|^p` and `2* = (2d−α)/(d−2)`.
//!
//! The convolution uses the ball-truncated kernel `|x|^{-α}1_{|x|<L}` (see
//! [`truncated_power_symbol`]), which is exact while the state fits in a
//! ball of radius `L/2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::par;
use crate::spectral::{self, truncated_power_symbol, Field, Grid, SpectralError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("dimension d = {0} must be at least 3")]
    Dimension(usize),
    #[error("alpha = {alpha} outside (0, {d})")]
    Alpha { alpha: f64, d: usize },
    #[error("q = {q} outside the window ({lo}, {hi})")]
    Window { q: f64, lo: f64, hi: f64 },
    #[error("potential has {got} samples, grid has {expected}")]
    PotentialLength { expected: usize, got: usize },
    #[error("dilation factor must be positive, got {0}")]
    Dilation(f64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Model exponents: dimension `d`, Riesz order `alpha`, subcritical `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub alpha: f64,
    pub q: f64,
}

impl ModelParams {
    pub fn new(d: usize, alpha: f64, q: f64) -> Result<Self, ModelError> {
        if d < 3 {
            return Err(ModelError::Dimension(d));
        }
        if !(alpha > 0.0 && alpha < d as f64) {
            return Err(ModelError::Alpha { alpha, d });
        }
        let (lo, hi) = Self::q_window(d, alpha);
        if !(q > lo && q < hi) {
            return Err(ModelError::Window { q, lo, hi });
        }
        Ok(ModelParams { d, alpha, q })
    }

    /// `(d, α, q) = (3, 2, 1.9)`.
    pub fn reference() -> Self {
        ModelParams {
            d: 3,
            alpha: 2.0,
            q: 1.9,
        }
    }

    /// Open interval `((2d−α)/d, (2d−α+2)/d)` for `q`.
    pub fn q_window(d: usize, alpha: f64) -> (f64, f64) {
        let d = d as f64;
        ((2.0 * d - alpha) / d, (2.0 * d - alpha + 2.0) / d)
    }

    /// `2* = (2d−α)/(d−2)`.
    pub fn critical_exponent(&self) -> f64 {
        let d = self.d as f64;
        (2.0 * d - self.alpha) / (d - 2.0)
    }

    /// Exponent of `s` in `D_q(u_s) = s^{d(q−2)+α} D_q(u)`.
    pub fn subcritical_scaling(&self) -> f64 {
        self.d as f64 * (self.q - 2.0) + self.alpha
    }

    /// Exponent of `s` in `D_{2*}(u_s)`, equal to `2·2*`.
    pub fn critical_scaling(&self) -> f64 {
        2.0 * self.critical_exponent()
    }
}

/// Parts of the energy; `total = kinetic + potential − subcrit − crit`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub subcrit: f64,
    pub crit: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn assemble(kinetic: f64, potential: f64, subcrit: f64, crit: f64) -> Self {
        EnergyBreakdown {
            kinetic,
            potential,
            subcrit,
            crit,
            total: kinetic + potential - subcrit - crit,
        }
    }

    /// `‖∇u‖₂²`.
    pub fn grad_sq(&self) -> f64 {
        2.0 * self.kinetic
    }

    /// `D_q(u)`.
    pub fn d_sub(&self, params: &ModelParams) -> f64 {
        2.0 * params.q * self.subcrit
    }

    /// `D_{2*}(u)`.
    pub fn d_crit(&self, params: &ModelParams) -> f64 {
        2.0 * params.critical_exponent() * self.crit
    }

    /// `⟨I′(u), u⟩ = ‖∇u‖² + ∫V|u|² − D_q − D_{2*}`.
    pub fn virial(&self, params: &ModelParams) -> f64 {
        self.grad_sq() + 2.0 * self.potential - self.d_sub(params) - self.d_crit(params)
    }
}

/// Nonlocal coefficients `φ_p = |x|^{-α} ∗ |u|^p` for both exponents.
#[derive(Debug, Clone)]
pub struct NonlocalPotentials {
    pub sub: Vec<f64>,
    pub crit: Vec<f64>,
    pub d_sub: f64,
    pub d_crit: f64,
}

/// Energy functional on a fixed grid with a sampled potential.
#[derive(Debug, Clone)]
pub struct ChoquardFunctional {
    params: ModelParams,
    grid: Grid,
    potential: Option<Vec<f64>>,
    kernel: Vec<f64>,
    coupling: f64,
}

/// `|u|^p` from `|u|²`, with `0^p = 0`.
#[inline]
pub(crate) fn abs_pow(m2: f64, half_p: f64, integer: Option<i32>) -> f64 {
    if m2 == 0.0 {
        0.0
    } else if let Some(k) = integer {
        m2.powi(k)
    } else {
        m2.powf(half_p)
    }
}

#[inline]
pub(crate) fn integer_half(p: f64) -> Option<i32> {
    let h = 0.5 * p;
    (h.fract() == 0.0 && h.abs() < 64.0).then_some(h as i32)
}

impl ChoquardFunctional {
    /// `potential` holds real samples of `V` on `grid`; `None` means `V = 0`.
    pub fn new(
        params: ModelParams,
        grid: &Grid,
        potential: Option<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        if let Some(v) = &potential {
            if v.len() != grid.len() {
                return Err(ModelError::PotentialLength {
                    expected: grid.len(),
                    got: v.len(),
                });
            }
        }
        let potential = potential.filter(|v| v.iter().any(|&x| x != 0.0));
        let kernel = truncated_power_symbol(grid, params.alpha)?;
        Ok(ChoquardFunctional {
            params,
            grid: grid.clone(),
            potential,
            kernel,
            coupling: 1.0,
        })
    }

    /// Same functional with both nonlocal terms scaled by `c` (`c = 0`
    /// switches the nonlinearity off).
    pub fn with_coupling(mut self, c: f64) -> Self {
        self.coupling = c;
        self
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn potential(&self) -> Option<&[f64]> {
        self.potential.as_deref()
    }

    pub fn has_potential(&self) -> bool {
        self.potential.is_some()
    }

    /// Kernel symbol in FFT order.
    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    /// Convolves one real density with the kernel.
    pub fn convolve(&self, density: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = density.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        self.grid.forward(&mut buf);
        let k = &self.kernel;
        par::for_each_mut(&mut buf, |i, v| *v *= k[i]);
        self.grid.inverse(&mut buf);
        buf.into_iter().map(|v| v.re).collect()
    }

    /// Both nonlocal coefficients with one packed transform pair.
    pub fn potentials(&self, u: &Field) -> NonlocalPotentials {
        let p = &self.params;
        let (hq, iq) = (0.5 * p.q, integer_half(p.q));
        let c = p.critical_exponent();
        let (hc, ic) = (0.5 * c, integer_half(c));
        let vals = &u.values;
        let mut buf = par::collect(vals.len(), |i| {
            let m2 = vals[i].norm_sqr();
            Complex64::new(abs_pow(m2, hq, iq), abs_pow(m2, hc, ic))
        });
        let dens = buf.clone();
        self.grid.forward(&mut buf);
        let k = &self.kernel;
        par::for_each_mut(&mut buf, |i, v| *v *= k[i]);
        self.grid.inverse(&mut buf);
        let w = self.grid.cell_volume();
        let d_sub = w * par::sum(buf.len(), |i| buf[i].re * dens[i].re);
        let d_crit = w * par::sum(buf.len(), |i| buf[i].im * dens[i].im);
        NonlocalPotentials {
            sub: buf.iter().map(|v| v.re).collect(),
            crit: buf.iter().map(|v| v.im).collect(),
            d_sub,
            d_crit,
        }
    }

    /// `½∫V|u|²`.
    pub fn potential_energy(&self, u: &Field) -> f64 {
        match &self.potential {
            None => 0.0,
            Some(v) => {
                let vals = &u.values;
                0.5 * self.grid.cell_volume() * par::sum(v.len(), |i| v[i] * vals[i].norm_sqr())
            }
        }
    }

    fn breakdown(&self, u: &Field, spec: &[Complex64], nl: &NonlocalPotentials) -> EnergyBreakdown {
        let p = &self.params;
        let kinetic = 0.5 * spectral::spectral_gradient_norm_sq(&self.grid, spec);
        EnergyBreakdown::assemble(
            kinetic,
            self.potential_energy(u),
            self.coupling * nl.d_sub / (2.0 * p.q),
            self.coupling * nl.d_crit / (2.0 * p.critical_exponent()),
        )
    }

    pub fn energy(&self, u: &Field) -> Result<EnergyBreakdown, ModelError> {
        self.check(u)?;
        let nl = self.potentials(u);
        Ok(self.breakdown(u, &u.spectrum(), &nl))
    }

    /// Energy when the spectrum of `u` is already known.
    pub fn energy_with_spectrum(&self, u: &Field, spec: &[Complex64]) -> EnergyBreakdown {
        let nl = self.potentials(u);
        self.breakdown(u, spec, &nl)
    }

    /// Pointwise part of the gradient: `Vu − c(φ_q|u|^{q−2} + φ_{2*}|u|^{2*−2})u`.
    pub fn local_gradient(&self, u: &Field, nl: &NonlocalPotentials) -> Vec<Complex64> {
        let p = &self.params;
        let (hq, iq) = (0.5 * (p.q - 2.0), integer_half(p.q - 2.0));
        let c = p.critical_exponent() - 2.0;
        let (hc, ic) = (0.5 * c, integer_half(c));
        let vals = &u.values;
        let pot = self.potential.as_deref();
        let g = self.coupling;
        par::collect(vals.len(), |i| {
            let m2 = vals[i].norm_sqr();
            let mut coef = 0.0;
            if m2 > 0.0 {
                coef -= g * (nl.sub[i] * abs_pow(m2, hq, iq) + nl.crit[i] * abs_pow(m2, hc, ic));
            }
            if let Some(v) = pot {
                coef += v[i];
            }
            vals[i] * coef
        })
    }

    /// Energy and the spectrum of the `L²` gradient `I′(u)`, given `û`.
    pub fn energy_and_gradient_spectrum(
        &self,
        u: &Field,
        spec: &[Complex64],
    ) -> (EnergyBreakdown, Vec<Complex64>) {
        let nl = self.potentials(u);
        let e = self.breakdown(u, spec, &nl);
        let mut g = self.local_gradient(u, &nl);
        self.grid.forward(&mut g);
        let k2 = self.grid.k_squared();
        par::for_each_mut(&mut g, |i, v| *v += k2[i] * spec[i]);
        (e, g)
    }

    /// `I′(u) = −Δu + Vu − (φ_q|u|^{q−2} + φ_{2*}|u|^{2*−2})u`.
    pub fn gradient(&self, u: &Field) -> Result<Field, ModelError> {
        Ok(self.energy_and_gradient(u)?.1)
    }

    pub fn energy_and_gradient(&self, u: &Field) -> Result<(EnergyBreakdown, Field), ModelError> {
        self.check(u)?;
        let spec = u.spectrum();
        let (e, g) = self.energy_and_gradient_spectrum(u, &spec);
        Ok((e, Field::from_spectrum(&self.grid, g)?))
    }

    /// `D_p(u)` for an arbitrary exponent with this functional's kernel.
    pub fn choquard_term(&self, u: &Field, p: f64) -> f64 {
        let (h, i) = (0.5 * p, integer_half(p));
        let dens: Vec<f64> = u
            .values
            .iter()
            .map(|v| abs_pow(v.norm_sqr(), h, i))
            .collect();
        let conv = self.convolve(&dens);
        self.grid.cell_volume() * par::sum(dens.len(), |j| conv[j] * dens[j])
    }

    fn check(&self, u: &Field) -> Result<(), ModelError> {
        if u.grid() != &self.grid {
            return Err(SpectralError::GridMismatch.into());
        }
        Ok(())
    }
}

/// `D_p(u) = ∫(|x|^{-α} ∗ |u|^p)|u|^p` on `u`'s grid.
pub fn choquard_term(u: &Field, p: f64, alpha: f64) -> Result<f64, ModelError> {
    let sym = truncated_power_symbol(u.grid(), alpha)?;
    let (h, i) = (0.5 * p, integer_half(p));
    let dens: Vec<Complex64> = u
        .values
        .iter()
        .map(|v| Complex64::new(abs_pow(v.norm_sqr(), h, i), 0.0))
        .collect();
    let mut buf = dens.clone();
    u.grid().forward(&mut buf);
    par::for_each_mut(&mut buf, |j, v| *v *= sym[j]);
    u.grid().inverse(&mut buf);
    Ok(u.grid().cell_volume() * par::sum(buf.len(), |j| buf[j].re * dens[j].re))
}

/// Energy breakdown of `u` with potential samples `v` (`None` for `V = 0`).
pub fn energy(
    u: &Field,
    v: Option<&[f64]>,
    params: &ModelParams,
) -> Result<EnergyBreakdown, ModelError> {
    ChoquardFunctional::new(*params, u.grid(), v.map(|s| s.to_vec()))?.energy(u)
}

/// `L²` gradient of the energy.
pub fn energy_gradient(
    u: &Field,
    v: Option<&[f64]>,
    params: &ModelParams,
) -> Result<Field, ModelError> {
    ChoquardFunctional::new(*params, u.grid(), v.map(|s| s.to_vec()))?.gradient(u)
}

/// Quality report for a resampled field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DilationDiagnostics {
    /// Fraction of `‖v‖²` carried by modes beyond two thirds of the cutoff.
    pub spectral_tail: f64,
    /// Relative change of `‖·‖₂²` (zero for an exact dilation).
    pub mass_defect: f64,
}

impl DilationDiagnostics {
    pub const TAIL_LIMIT: f64 = 1e-8;

    pub fn warning(&self) -> Option<String> {
        (self.spectral_tail > Self::TAIL_LIMIT).then(|| {
            format!(
                "under-resolved dilation: spectral tail {:.3e} above {:.0e}",
                self.spectral_tail,
                Self::TAIL_LIMIT
            )
        })
    }
}

/// Periodic cardinal function of an even-`n` trigonometric interpolant.
fn cardinal(theta: f64, n: usize) -> f64 {
    let t = theta.rem_euclid(2.0 * std::f64::consts::PI);
    let t = if t > std::f64::consts::PI {
        t - 2.0 * std::f64::consts::PI
    } else {
        t
    };
    if t.abs() < 1e-12 {
        return 1.0;
    }
    (0.5 * n as f64 * t).sin() / (n as f64 * (0.5 * t).tan())
}

/// Evaluates `s^{d/2} u(s x)` at the nodes of `target` by trigonometric
/// interpolation of `u`; points with `s x` outside `u`'s box are set to zero.
pub fn resample(
    u: &Field,
    target: &Grid,
    s: f64,
) -> Result<(Field, DilationDiagnostics), ModelError> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(ModelError::Dilation(s));
    }
    let src = u.grid();
    let d = src.d();
    if target.d() != d {
        return Err(SpectralError::Dimension(target.d()).into());
    }
    let (ns, nt) = (src.n(), target.n());
    let l = src.half_width();
    let scale = std::f64::consts::PI / l;
    let mut m = vec![0.0; nt * ns];
    for i in 0..nt {
        let y = s * target.axis_coord(i);
        if y < -l || y >= l {
            continue;
        }
        for j in 0..ns {
            m[i * ns + j] = cardinal(scale * (y - src.axis_coord(j)), ns);
        }
    }
    let mut data = u.values.clone();
    let mut shape = [ns; 3];
    for axis in 0..d {
        let inner: usize = shape[axis + 1..d].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let mut out = vec![Complex64::default(); outer * nt * inner];
        let src_data = &data;
        let mat = &m;
        par::for_each_chunk_mut(&mut out, inner, |row, chunk| {
            let (o, i) = (row / nt, row % nt);
            for j in 0..ns {
                let w = mat[i * ns + j];
                if w == 0.0 {
                    continue;
                }
                let base = (o * ns + j) * inner;
                for (c, v) in chunk.iter_mut().enumerate() {
                    *v += w * src_data[base + c];
                }
            }
        });
        data = out;
        shape[axis] = nt;
    }
    let amp = s.powf(0.5 * d as f64);
    par::for_each_mut(&mut data, |_, v| *v *= amp);
    let v = Field::new(target, data)?;
    let spec = v.spectrum();
    let total = spectral::spectral_norm_sq(target, &spec);
    let cut = (2.0 / 3.0) * std::f64::consts::PI / target.spacing();
    let k = target.wavenumbers();
    let tail = spectral::plancherel_weight(target)
        * par::sum(spec.len(), |idx| {
            let ix = target.unravel(idx);
            if ix[..d].iter().any(|&j| k[j].abs() > cut) {
                spec[idx].norm_sqr()
            } else {
                0.0
            }
        });
    let m0 = u.norm_sq();
    let diag = DilationDiagnostics {
        spectral_tail: if total > 0.0 { tail / total } else { 0.0 },
        mass_defect: if m0 > 0.0 {
            (total - m0).abs() / m0
        } else {
            0.0
        },
    };
    Ok((v, diag))
}

/// Mass-preserving dilation `u_s(x) = s^{d/2} u(s x)` on the same grid.
pub fn dilate(u: &Field, s: f64) -> Result<(Field, DilationDiagnostics), ModelError> {
    resample(u, &u.grid().clone(), s)
}

/// Fiber map `ψ_u(s) = I(u_s)` for `V = 0` from three base quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberMap {
    pub grad_sq: f64,
    pub d_sub: f64,
    pub d_crit: f64,
    pub params: ModelParams,
}

impl FiberMap {
    pub fn from_breakdown(b: &EnergyBreakdown, params: &ModelParams) -> Self {
        FiberMap {
            grad_sq: b.grad_sq(),
            d_sub: b.d_sub(params),
            d_crit: b.d_crit(params),
            params: *params,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        let p = &self.params;
        let c = p.critical_exponent();
        0.5 * s * s * self.grad_sq
            - s.powf(p.subcritical_scaling()) * self.d_sub / (2.0 * p.q)
            - s.powf(2.0 * c) * self.d_crit / (2.0 * c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiBranch {
    Exact,
    Resampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiValue {
    pub value: f64,
    pub branch: PsiBranch,
    pub diagnostics: Option<DilationDiagnostics>,
}

/// `ψ_u(s)`: exact scaling law when `V = 0`, otherwise `I(dilate(u, s))`.
pub fn psi(f: &ChoquardFunctional, u: &Field, s: f64) -> Result<PsiValue, ModelError> {
    if f.has_potential() || f.coupling() != 1.0 {
        return psi_resampled(f, u, s);
    }
    let b = f.energy(u)?;
    Ok(PsiValue {
        value: FiberMap::from_breakdown(&b, f.params()).eval(s),
        branch: PsiBranch::Exact,
        diagnostics: None,
    })
}

/// `I(dilate(u, s))` regardless of the potential.
pub fn psi_resampled(f: &ChoquardFunctional, u: &Field, s: f64) -> Result<PsiValue, ModelError> {
    let (us, diag) = dilate(u, s)?;
    Ok(PsiValue {
        value: f.energy(&us)?.total,
        branch: PsiBranch::Resampled,
        diagnostics: Some(diag),
    })
}
