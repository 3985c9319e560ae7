//! Periodic tensor grids on `[-L, L)^d`, discrete Fourier transforms,
//! spectral derivatives, quadrature norms and Riesz multipliers.
//!
//! Wavenumbers are angular, `k_j = π j / L`. The forward transform is
//! unnormalized and the inverse divides by `n^d`, so Plancherel reads
//! `h^d Σ|u|² = (h^d / n^d) Σ|û|²`. Under this convention the Riesz potential
//! of order `α` is the multiplier `|k|^{-α}` with no further constants.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::par;
use crate::special;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("points per axis must be a power of two and at least 8, got {0}")]
    Points(usize),
    #[error("dimension must be 1, 2 or 3, got {0}")]
    Dimension(usize),
    #[error("half width must be positive and finite, got {0}")]
    HalfWidth(f64),
    #[error("order {alpha} outside (0, {d})")]
    Order { alpha: f64, d: usize },
    #[error("exponent p = {0} must be at least 1")]
    Exponent(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("expected {expected} samples, got {got}")]
    Length { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, SpectralError>;

struct GridInner {
    d: usize,
    n: usize,
    half_width: f64,
    h: f64,
    k: Vec<f64>,
    k2: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Periodic grid with `n` points per axis on `[-L, L)^d`.
///
/// Cloning is cheap; wavenumber tables and FFT plans are shared.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("d", &self.d())
            .field("n", &self.n())
            .field("half_width", &self.half_width())
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.d() == other.d()
                && self.n() == other.n()
                && self.half_width() == other.half_width())
    }
}

impl Grid {
    pub fn new(d: usize, n: usize, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(SpectralError::Dimension(d));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(SpectralError::Points(n));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(SpectralError::HalfWidth(half_width));
        }
        Ok(Self::build(d, n, half_width))
    }

    fn build(d: usize, n: usize, half_width: f64) -> Self {
        let h = 2.0 * half_width / n as f64;
        let k: Vec<f64> = (0..n)
            .map(|j| {
                let s = if j < n / 2 {
                    j as i64
                } else {
                    j as i64 - n as i64
                };
                std::f64::consts::PI * s as f64 / half_width
            })
            .collect();
        let total = n.pow(d as u32);
        let k2 = (0..total)
            .map(|idx| {
                let mut rem = idx;
                let mut s = 0.0;
                for _ in 0..d {
                    let kj = k[rem % n];
                    s += kj * kj;
                    rem /= n;
                }
                s
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Grid {
            inner: Arc::new(GridInner {
                d,
                n,
                half_width,
                h,
                k,
                k2,
                fwd,
                inv,
            }),
        }
    }

    pub fn d(&self) -> usize {
        self.inner.d
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn half_width(&self) -> f64 {
        self.inner.half_width
    }

    /// Grid spacing `h = 2L/n`.
    pub fn spacing(&self) -> f64 {
        self.inner.h
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.inner.h.powi(self.inner.d as i32)
    }

    /// Total number of samples `n^d`.
    pub fn len(&self) -> usize {
        self.inner.k2.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Per-axis wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.k
    }

    /// `|k|²` for every mode, in FFT order.
    pub fn k_squared(&self) -> &[f64] {
        &self.inner.k2
    }

    /// Coordinate of node `i` along one axis.
    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.inner.half_width + i as f64 * self.inner.h
    }

    /// Splits a flat index into per-axis indices (last axis fastest).
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let (d, n) = (self.d(), self.n());
        let mut out = [0usize; 3];
        let mut rem = idx;
        for a in (0..d).rev() {
            out[a] = rem % n;
            rem /= n;
        }
        out
    }

    pub fn ravel(&self, ix: &[usize]) -> usize {
        let n = self.n();
        ix.iter().fold(0, |acc, &i| acc * n + i)
    }

    /// Physical coordinates of a flat index; unused trailing slots are zero.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let ix = self.unravel(idx);
        let mut x = [0.0; 3];
        for a in 0..self.d() {
            x[a] = self.axis_coord(ix[a]);
        }
        x
    }

    /// `|x|²` at a flat index.
    pub fn radius_sq(&self, idx: usize) -> f64 {
        self.point(idx).iter().map(|v| v * v).sum()
    }

    /// Flat index of the node at the origin.
    pub fn origin(&self) -> usize {
        let half = [self.n() / 2; 3];
        self.ravel(&half[..self.d()])
    }

    /// Same spacing, twice the points and twice the extent.
    pub fn padded(&self) -> Grid {
        Grid::build(self.d(), 2 * self.n(), 2.0 * self.half_width())
    }

    /// In-place unnormalized forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.fwd);
    }

    /// In-place inverse transform including the `1/n^d` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.inv);
        let s = 1.0 / self.len() as f64;
        par::for_each_mut(data, |_, v| *v *= s);
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len(), "buffer does not match grid");
        let n = self.n();
        let lines_per_task = (4096 / n).max(1);
        let run_lines = |_: usize, chunk: &mut [Complex64]| {
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            plan.process_with_scratch(chunk, &mut scratch);
        };
        par::for_each_chunk_mut(data, n * lines_per_task, run_lines);
        if self.d() == 1 {
            return;
        }
        const TILE: usize = 16;
        let ptr = SharedMut(data.as_mut_ptr());
        for axis in 0..self.d() - 1 {
            let stride = n.pow((self.d() - 1 - axis) as u32);
            let width = TILE.min(stride);
            let tiles = stride / width;
            let outer = self.len() / (n * stride);
            par::for_each_index(outer * tiles, |task| {
                let base = (task / tiles) * n * stride + (task % tiles) * width;
                let mut buf = vec![Complex64::default(); width * n];
                let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
                let p = &ptr;
                // SAFETY: every task touches the disjoint index set
                // {base + i*stride + c : i < n, c < width}.
                unsafe {
                    for i in 0..n {
                        let row = p.0.add(base + i * stride);
                        for c in 0..width {
                            buf[c * n + i] = *row.add(c);
                        }
                    }
                }
                plan.process_with_scratch(&mut buf, &mut scratch);
                unsafe {
                    for i in 0..n {
                        let row = p.0.add(base + i * stride);
                        for c in 0..width {
                            *row.add(c) = buf[c * n + i];
                        }
                    }
                }
            });
        }
    }
}

struct SharedMut(*mut Complex64);
unsafe impl Send for SharedMut {}
unsafe impl Sync for SharedMut {}

/// Complex samples on a grid, row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    pub values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(SpectralError::Length {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Field {
            grid: grid.clone(),
            values,
        })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Field {
            grid: grid.clone(),
            values: vec![Complex64::default(); grid.len()],
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn<F>(grid: &Grid, f: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64 + Sync + Send,
    {
        let d = grid.d();
        let values = par::collect(grid.len(), |idx| f(&grid.point(idx)[..d]));
        Field {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_real(grid: &Grid, re: &[f64]) -> Result<Self> {
        Field::new(grid, re.iter().map(|&r| Complex64::new(r, 0.0)).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(SpectralError::GridMismatch)
        }
    }

    /// Unnormalized forward transform of the samples.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut s = self.values.clone();
        self.grid.forward(&mut s);
        s
    }

    pub fn from_spectrum(grid: &Grid, mut spec: Vec<Complex64>) -> Result<Self> {
        if spec.len() != grid.len() {
            return Err(SpectralError::Length {
                expected: grid.len(),
                got: spec.len(),
            });
        }
        grid.inverse(&mut spec);
        Field::new(grid, spec)
    }

    /// `‖u‖₂²` by `h^d` quadrature.
    pub fn norm_sq(&self) -> f64 {
        let v = &self.values;
        self.grid.cell_volume() * par::sum(v.len(), |i| v[i].norm_sqr())
    }

    /// `(h^d Σ|u|^p)^{1/p}`; `p = ∞` gives the max modulus.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm(self, p)
    }

    pub fn max_abs(&self) -> f64 {
        let v = &self.values;
        par::max(v.len(), |i| v[i].norm())
    }

    /// `‖∇u‖₂²` from the spectrum.
    pub fn gradient_norm_sq(&self) -> f64 {
        spectral_gradient_norm_sq(&self.grid, &self.spectrum())
    }

    /// Spectral gradient components `∂_j u`.
    pub fn gradient(&self) -> Vec<Field> {
        let spec = self.spectrum();
        (0..self.grid.d())
            .map(|axis| {
                let mut s = spec.clone();
                multiply_axis_wavenumber(&self.grid, &mut s, axis);
                Field::from_spectrum(&self.grid, s).expect("grid-sized spectrum")
            })
            .collect()
    }

    /// `⟨u, v⟩ = ∫ conj(u) v`.
    pub fn inner(&self, other: &Field) -> Result<Complex64> {
        self.same_grid(other)?;
        let (a, b) = (&self.values, &other.values);
        let re = par::sum(a.len(), |i| (a[i].conj() * b[i]).re);
        let im = par::sum(a.len(), |i| (a[i].conj() * b[i]).im);
        Ok(Complex64::new(re, im) * self.grid.cell_volume())
    }

    /// `⟨u, v⟩_{L²} + ⟨∇u, ∇v⟩_{L²}`, conjugate-linear in `self`.
    pub fn h1_inner(&self, other: &Field) -> Result<Complex64> {
        h1_inner(self, other)
    }

    /// `‖u‖_{H¹}²`.
    pub fn h1_norm_sq(&self) -> f64 {
        spectral_h1_norm_sq(&self.grid, &self.spectrum())
    }

    /// Circular shift by the lattice vector `y`: `out(x) = u(x - y h)`.
    pub fn shift(&self, y: &[i64]) -> Field {
        let g = &self.grid;
        let n = g.n() as i64;
        let d = g.d();
        let src = &self.values;
        let values = par::collect(g.len(), |idx| {
            let ix = g.unravel(idx);
            let mut from = [0usize; 3];
            for a in 0..d {
                let off = y.get(a).copied().unwrap_or(0);
                from[a] = (ix[a] as i64 - off).rem_euclid(n) as usize;
            }
            src[g.ravel(&from[..d])]
        });
        Field {
            grid: g.clone(),
            values,
        }
    }

    /// Global phase `e^{iθ} u`.
    pub fn modulate(&self, theta: f64) -> Field {
        let z = Complex64::from_polar(1.0, theta);
        let mut out = self.clone();
        par::for_each_mut(&mut out.values, |_, v| *v *= z);
        out
    }

    pub fn scale(&mut self, c: f64) {
        par::for_each_mut(&mut self.values, |_, v| *v *= c);
    }

    /// `self + c·other` on the same grid.
    pub fn axpy(&self, c: Complex64, other: &Field) -> Result<Field> {
        self.same_grid(other)?;
        let mut out = self.clone();
        let b = &other.values;
        par::for_each_mut(&mut out.values, |i, v| *v += c * b[i]);
        Ok(out)
    }

    /// Rescales so that `‖u‖₂² = mass`; a zero field is returned unchanged.
    pub fn normalized_to(&self, mass: f64) -> Field {
        let m = self.norm_sq();
        let mut out = self.clone();
        if m > 0.0 {
            out.scale((mass / m).sqrt());
        }
        out
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }
}

/// `(h^d Σ|u|^p)^{1/p}`; `p = ∞` gives the max modulus.
pub fn lp_norm(u: &Field, p: f64) -> Result<f64> {
    if p.is_infinite() && p > 0.0 {
        return Ok(u.max_abs());
    }
    if !(p >= 1.0) {
        return Err(SpectralError::Exponent(p));
    }
    let v = &u.values;
    let s = par::sum(v.len(), |i| v[i].norm().powf(p));
    Ok((u.grid.cell_volume() * s).powf(1.0 / p))
}

pub fn gradient_norm_sq(u: &Field) -> f64 {
    u.gradient_norm_sq()
}

pub fn h1_inner(u: &Field, v: &Field) -> Result<Complex64> {
    u.same_grid(v)?;
    let g = &u.grid;
    let (a, b) = (u.spectrum(), v.spectrum());
    let k2 = g.k_squared();
    let re = par::sum(a.len(), |i| (1.0 + k2[i]) * (a[i].conj() * b[i]).re);
    let im = par::sum(a.len(), |i| (1.0 + k2[i]) * (a[i].conj() * b[i]).im);
    Ok(Complex64::new(re, im) * plancherel_weight(g))
}

pub fn shift(u: &Field, y: &[i64]) -> Field {
    u.shift(y)
}

pub fn modulate(u: &Field, theta: f64) -> Field {
    u.modulate(theta)
}

/// `h^d / n^d`, the weight turning `Σ|û|²` into `‖u‖₂²`.
pub fn plancherel_weight(grid: &Grid) -> f64 {
    grid.cell_volume() / grid.len() as f64
}

pub fn spectral_norm_sq(grid: &Grid, spec: &[Complex64]) -> f64 {
    plancherel_weight(grid) * par::sum(spec.len(), |i| spec[i].norm_sqr())
}

pub fn spectral_gradient_norm_sq(grid: &Grid, spec: &[Complex64]) -> f64 {
    let k2 = grid.k_squared();
    plancherel_weight(grid) * par::sum(spec.len(), |i| k2[i] * spec[i].norm_sqr())
}

pub fn spectral_h1_norm_sq(grid: &Grid, spec: &[Complex64]) -> f64 {
    let k2 = grid.k_squared();
    plancherel_weight(grid) * par::sum(spec.len(), |i| (1.0 + k2[i]) * spec[i].norm_sqr())
}

fn multiply_axis_wavenumber(grid: &Grid, spec: &mut [Complex64], axis: usize) {
    let k = grid.wavenumbers();
    let n = grid.n();
    let stride = n.pow((grid.d() - 1 - axis) as u32);
    par::for_each_mut(spec, |idx, v| {
        let j = (idx / stride) % n;
        *v *= Complex64::new(0.0, k[j]);
    });
}

/// Multiplies a spectrum by `|k|^{-alpha}` and zeroes the `k = 0` mode.
pub fn apply_riesz_symbol(grid: &Grid, spec: &mut [Complex64], alpha: f64) {
    let k2 = grid.k_squared();
    let e = -0.5 * alpha;
    par::for_each_mut(spec, |i, v| {
        if k2[i] == 0.0 {
            *v = Complex64::default();
        } else {
            *v *= k2[i].powf(e);
        }
    });
}

/// Periodic Riesz potential: the multiplier `|k|^{-alpha}` with the mean
/// mode removed.
pub fn riesz_convolve(f: &Field, alpha: f64) -> Result<Field> {
    let d = f.grid.d();
    if !(alpha > 0.0 && alpha < d as f64) {
        return Err(SpectralError::Order { alpha, d });
    }
    let mut spec = f.spectrum();
    apply_riesz_symbol(&f.grid, &mut spec, alpha);
    Field::from_spectrum(&f.grid, spec)
}

/// Fourier symbol of the ball-truncated power kernel `|x|^{-beta} 1_{|x|<L}`
/// in three dimensions, sampled at the grid wavenumbers.
///
/// Circular convolution with this symbol reproduces the free-space
/// convolution with `|x|^{-beta}` exactly for densities whose support has
/// diameter at most `L`: every pair inside the support sees the full kernel
/// and every periodic image lies beyond the cutoff.
pub fn truncated_power_symbol(grid: &Grid, beta: f64) -> Result<Vec<f64>> {
    use std::f64::consts::PI;
    if grid.d() != 3 {
        return Err(SpectralError::Dimension(grid.d()));
    }
    if !(beta > 0.0 && beta < 3.0) {
        return Err(SpectralError::Order { alpha: beta, d: 3 });
    }
    let n = grid.n() as i64;
    let radius = grid.half_width();
    let dk = PI / radius;
    // |k|² = dk² · m with integer m; evaluate each shell once
    let max_shell = 3 * (n / 2) * (n / 2);
    let mut present = vec![false; max_shell as usize + 1];
    for idx in 0..grid.len() {
        let ix = grid.unravel(idx);
        let m: i64 = ix
            .iter()
            .map(|&j| {
                let s = if (j as i64) < n / 2 {
                    j as i64
                } else {
                    j as i64 - n
                };
                s * s
            })
            .sum();
        present[m as usize] = true;
    }
    // F(X) = ∫_0^X t^{1-β} sin t dt, accumulated over increasing X
    let integrand = |t: f64| t.powf(1.0 - beta) * t.sin();
    let mut table = vec![0.0; present.len()];
    table[0] = 4.0 * PI * radius.powf(3.0 - beta) / (3.0 - beta);
    let mut x_prev = 0.0;
    let mut acc = 0.0;
    for (m, &used) in present.iter().enumerate().skip(1) {
        if !used {
            continue;
        }
        let k = dk * (m as f64).sqrt();
        let x = k * radius;
        let mut lo = x_prev;
        while lo < x {
            let hi = (lo + PI).min(x);
            acc += crate::quad::integrate(integrand, lo, hi, 1e-14);
            lo = hi;
        }
        x_prev = x;
        table[m] = 4.0 * PI * k.powf(beta - 3.0) * acc;
    }
    Ok(par::collect(grid.len(), |idx| {
        let ix = grid.unravel(idx);
        let m: i64 = ix
            .iter()
            .map(|&j| {
                let s = if (j as i64) < n / 2 {
                    j as i64
                } else {
                    j as i64 - n
                };
                s * s
            })
            .sum();
        table[m as usize]
    }))
}

/// Free-space convolution with `|x|^{-beta}` by zero padding to `2n` per
/// axis.
///
/// The singular node uses the corrected weight `-Z_d(β/2) h^{-β}` with `Z_d`
/// the cubic-lattice Epstein zeta, which makes the punctured trapezoid rule
/// accurate to `O(h^{d-β+2})` for smooth densities. Requires `0 < beta < d`.
pub fn free_space_power_convolve(f: &Field, beta: f64) -> Result<Field> {
    let g = f.grid();
    let d = g.d();
    if !(beta > 0.0 && beta < d as f64) {
        return Err(SpectralError::Order { alpha: beta, d });
    }
    let big = g.padded();
    let (n, m) = (g.n(), big.n());
    let h = g.spacing();
    let origin_weight = -special::epstein_zeta(d, 0.5 * beta) * h.powf(-beta);
    let mut kernel = par::collect(big.len(), |idx| {
        let ix = big.unravel(idx);
        let mut r2 = 0.0;
        for &j in &ix[..d] {
            let s = if j <= n {
                j as f64
            } else {
                j as f64 - m as f64
            };
            r2 += s * s;
        }
        if r2 == 0.0 {
            Complex64::new(origin_weight, 0.0)
        } else {
            Complex64::new((r2 * h * h).powf(-0.5 * beta), 0.0)
        }
    });
    big.forward(&mut kernel);
    let mut padded = vec![Complex64::default(); big.len()];
    for (idx, v) in f.values.iter().enumerate() {
        let ix = g.unravel(idx);
        padded[big.ravel(&ix[..d])] = *v;
    }
    big.forward(&mut padded);
    par::for_each_mut(&mut padded, |i, v| *v *= kernel[i]);
    big.inverse(&mut padded);
    let w = g.cell_volume();
    let values = par::collect(g.len(), |idx| {
        let ix = g.unravel(idx);
        padded[big.ravel(&ix[..d])] * w
    });
    Field::new(g, values)
}

/// A smooth, localized random field: a Gaussian envelope of width `width`
/// around a random center carrying a few random low plane waves.
pub fn random_smooth_field<R: Rng>(grid: &Grid, rng: &mut R, width: f64, complex: bool) -> Field {
    let d = grid.d();
    let reach = 0.25 * grid.half_width();
    let mut center = [0.0; 3];
    for c in center.iter_mut().take(d) {
        *c = rng.random_range(-reach..reach);
    }
    let w = width * rng.random_range(0.7..1.3);
    let modes: Vec<([f64; 3], Complex64)> = (0..4)
        .map(|_| {
            let mut kv = [0.0; 3];
            for kj in kv.iter_mut().take(d) {
                *kj = rng.random_range(-1.5..1.5) / w;
            }
            let amp = if complex {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            } else {
                Complex64::new(rng.random_range(-1.0..1.0), 0.0)
            };
            (kv, amp)
        })
        .collect();
    Field::from_fn(grid, |x| {
        let mut r2 = 0.0;
        for a in 0..d {
            r2 += (x[a] - center[a]).powi(2);
        }
        let env = (-0.5 * r2 / (w * w)).exp();
        let mut s = Complex64::new(1.0, 0.0);
        for (kv, amp) in &modes {
            let mut ph = 0.0;
            for a in 0..d {
                ph += kv[a] * (x[a] - center[a]);
            }
            s += if complex {
                amp * Complex64::from_polar(1.0, ph)
            } else {
                amp * ph.cos()
            };
        }
        s * env
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn gaussian(grid: &Grid, c: f64) -> Field {
        Field::from_fn(grid, |x| {
            Complex64::new((-c * x.iter().map(|v| v * v).sum::<f64>()).exp(), 0.0)
        })
    }

    #[test]
    fn grid_validation() {
        assert_eq!(
            Grid::new(3, 12, 1.0).unwrap_err(),
            SpectralError::Points(12)
        );
        assert_eq!(Grid::new(3, 4, 1.0).unwrap_err(), SpectralError::Points(4));
        assert_eq!(
            Grid::new(4, 8, 1.0).unwrap_err(),
            SpectralError::Dimension(4)
        );
        assert!(matches!(
            Grid::new(2, 8, 0.0),
            Err(SpectralError::HalfWidth(_))
        ));
        let g = Grid::new(2, 16, 3.0).unwrap();
        assert_eq!(g.spacing() * 16.0, 6.0);
        assert_eq!(g.len(), 256);
        assert_eq!(g.point(g.origin()), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn transform_round_trip_and_single_mode() {
        let g = Grid::new(3, 16, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_smooth_field(&g, &mut rng, 0.6, true);
        let back = Field::from_spectrum(&g, u.spectrum()).unwrap();
        for (a, b) in u.values.iter().zip(&back.values) {
            assert!((a - b).norm() < 1e-13);
        }
        // e^{i k x} along axis 1 lands in exactly one bin
        let j = 3usize;
        let k = g.wavenumbers()[j];
        let m = Field::from_fn(&g, |x| Complex64::from_polar(1.0, k * x[1]));
        let s = m.spectrum();
        let peak = s.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let hits = s.iter().filter(|v| v.norm() > 1e-9 * peak).count();
        assert_eq!(hits, 1);
        let idx = s.iter().position(|v| v.norm() > 1e-9 * peak).unwrap();
        assert_eq!(g.unravel(idx), [0, j, 0]);
    }

    #[test]
    fn gradient_of_plane_wave_is_exact() {
        let g = Grid::new(2, 32, 5.0).unwrap();
        for j in [1usize, 7, 15, 16, 31] {
            let k = g.wavenumbers()[j];
            let mut u = Field::from_fn(&g, |x| Complex64::from_polar(1.0, k * x[0]));
            u = u.normalized_to(1.0);
            assert!((u.gradient_norm_sq() - k * k).abs() < 1e-11 * (1.0 + k * k));
            let grad = u.gradient();
            for (gu, uu) in grad[0].values.iter().zip(&u.values) {
                assert!((gu - Complex64::new(0.0, k) * uu).norm() < 1e-11 * (1.0 + k.abs()));
            }
            assert!(grad[1].max_abs() < 1e-11);
        }
    }

    #[test]
    fn constant_has_no_gradient() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        let u = Field::from_fn(&g, |_| Complex64::new(2.0, -1.0));
        assert!(u.gradient_norm_sq() < 1e-24);
    }

    #[test]
    fn gaussian_norms_match_closed_forms() {
        let g = Grid::new(3, 64, 12.0).unwrap();
        let u = gaussian(&g, 1.0);
        let l2 = u.lp_norm(2.0).unwrap();
        assert!((l2 * l2 - (PI / 2.0).powf(1.5)).abs() < 1e-10);
        let v = gaussian(&g, 0.5);
        let exact = 1.5 * PI.powf(1.5);
        assert!((v.gradient_norm_sq() - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn single_point_lp_norm() {
        let g = Grid::new(2, 16, 2.0).unwrap();
        let mut u = Field::zeros(&g);
        u.values[37] = Complex64::new(0.0, 3.0);
        let h = g.spacing();
        for p in [1.0, 2.0, 3.5] {
            let expect = 3.0 * h.powf(2.0 / p);
            assert!((u.lp_norm(p).unwrap() - expect).abs() < 1e-13 * expect);
        }
        assert_eq!(u.lp_norm(f64::INFINITY).unwrap(), 3.0);
        assert_eq!(u.lp_norm(0.5), Err(SpectralError::Exponent(0.5)));
    }

    #[test]
    fn parseval_on_random_fields() {
        let g = Grid::new(3, 16, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let u = random_smooth_field(&g, &mut rng, 1.0, true);
            let a = u.norm_sq();
            let b = spectral_norm_sq(&g, &u.spectrum());
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn h1_inner_properties() {
        let g = Grid::new(2, 32, 6.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_smooth_field(&g, &mut rng, 1.0, true);
        let v = random_smooth_field(&g, &mut rng, 1.5, true);
        let uu = h1_inner(&u, &u).unwrap();
        assert!(uu.im.abs() < 1e-12 * uu.re);
        assert!((uu.re - u.norm_sq() - u.gradient_norm_sq()).abs() < 1e-12 * uu.re);
        let uv = h1_inner(&u, &v).unwrap();
        let vu = h1_inner(&v, &u).unwrap();
        assert!((uv - vu.conj()).norm() < 1e-12 * uv.norm().max(1e-300));
        let k = g.wavenumbers();
        let a = Field::from_fn(&g, |x| Complex64::from_polar(1.0, k[2] * x[0]));
        let b = Field::from_fn(&g, |x| Complex64::from_polar(1.0, k[5] * x[1]));
        assert!(h1_inner(&a, &b).unwrap().norm() < 1e-10);
        let other = Grid::new(2, 16, 6.0).unwrap();
        assert_eq!(
            h1_inner(&u, &Field::zeros(&other)).unwrap_err(),
            SpectralError::GridMismatch
        );
    }

    #[test]
    fn shift_and_modulate_preserve_norms() {
        let g = Grid::new(3, 16, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_smooth_field(&g, &mut rng, 0.8, true);
        assert_eq!(u.shift(&[0, 0, 0]), u);
        assert_eq!(u.modulate(0.0), u);
        let s = u.shift(&[3, -2, 17]).modulate(1.3);
        assert!((s.norm_sq() - u.norm_sq()).abs() < 1e-13 * u.norm_sq());
        assert!((s.gradient_norm_sq() - u.gradient_norm_sq()).abs() < 1e-12 * u.gradient_norm_sq());
        let idx = g.ravel(&[4, 4, 4]);
        assert_eq!(
            u.shift(&[1, 2, 3]).values[g.ravel(&[5, 6, 7])],
            u.values[idx]
        );
    }

    #[test]
    fn riesz_composition_and_zero() {
        let g = Grid::new(3, 16, 4.0).unwrap();
        let zero = riesz_convolve(&Field::zeros(&g), 1.0).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_smooth_field(&g, &mut rng, 1.0, true);
        let two = riesz_convolve(&riesz_convolve(&f, 0.7).unwrap(), 1.1).unwrap();
        let one = riesz_convolve(&f, 1.8).unwrap();
        let scale = one.max_abs();
        for (a, b) in two.values.iter().zip(&one.values) {
            assert!((a - b).norm() < 1e-12 * scale);
        }
        assert!(matches!(
            riesz_convolve(&f, 3.0),
            Err(SpectralError::Order { .. })
        ));
        assert!(matches!(
            riesz_convolve(&f, 0.0),
            Err(SpectralError::Order { .. })
        ));
    }

    #[test]
    fn riesz_is_self_adjoint_and_positive() {
        let g = Grid::new(3, 16, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut f = random_smooth_field(&g, &mut rng, 1.0, false);
        let mut h = random_smooth_field(&g, &mut rng, 1.3, false);
        for w in [&mut f, &mut h] {
            let mean = w.values.iter().map(|v| v.re).sum::<f64>() / g.len() as f64;
            w.values.iter_mut().for_each(|v| *v -= mean);
        }
        let rf = riesz_convolve(&f, 1.5).unwrap();
        let rh = riesz_convolve(&h, 1.5).unwrap();
        assert!(rf.inner(&f).unwrap().re >= 0.0);
        let a = rf.inner(&h).unwrap();
        let b = f.inner(&rh).unwrap();
        assert!((a - b).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn riesz_mean_bias_decays_with_box() {
        // |k|^{-2} is the kernel 1/(4π|x|); at the origin the free-space
        // value on e^{-|x|²} is 1/2. The zeroed mean shifts it by O(1/L).
        let bias = |half: f64, n: usize| {
            let g = Grid::new(3, n, half).unwrap();
            let f = gaussian(&g, 1.0);
            riesz_convolve(&f, 2.0).unwrap().values[g.origin()].re - 0.5
        };
        let (b1, b2) = (bias(8.0, 32), bias(16.0, 64));
        assert!(b1 < 0.0 && b2 < 0.0);
        let ratio = b1 / b2;
        assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn truncated_symbol_convolution_of_gaussian() {
        // ∫ e^{-|y|²} / |y|^β dy = 2π Γ((3-β)/2)
        let g = Grid::new(3, 32, 6.0).unwrap();
        let f = gaussian(&g, 1.0);
        for beta in [0.5, 1.0, 2.0, 2.5] {
            let sym = truncated_power_symbol(&g, beta).unwrap();
            let mut spec = f.spectrum();
            spec.iter_mut().zip(&sym).for_each(|(v, s)| *v *= s);
            let c = Field::from_spectrum(&g, spec).unwrap();
            let exact = 2.0 * PI * statrs::function::gamma::gamma(0.5 * (3.0 - beta));
            let got = c.values[g.origin()].re;
            assert!(
                (got - exact).abs() < 1e-9 * exact,
                "beta {beta}: {got} vs {exact}"
            );
        }
        assert!(truncated_power_symbol(&Grid::new(2, 8, 1.0).unwrap(), 1.0).is_err());
    }

    #[test]
    fn free_space_convolution_of_gaussian() {
        // ∫ e^{-|y|²} / |y| dy = 2π in three dimensions
        let mut errs = Vec::new();
        for n in [32, 64] {
            let g = Grid::new(3, n, 6.0).unwrap();
            let f = gaussian(&g, 1.0);
            let c = free_space_power_convolve(&f, 1.0).unwrap();
            errs.push((c.values[g.origin()].re - 2.0 * PI).abs() / (2.0 * PI));
        }
        // fourth-order corrected rule
        assert!(errs[1] < 1e-4, "{errs:?}");
        assert!(errs[0] / errs[1] > 10.0, "{errs:?}");
    }
}
