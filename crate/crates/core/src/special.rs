//! Special functions that the standard crates do not provide.

use statrs::function::gamma::{gamma, gamma_ur};
use std::f64::consts::PI;

/// Upper incomplete gamma `Γ(a, x)` for `a > 0`.
pub fn upper_gamma(a: f64, x: f64) -> f64 {
    gamma_ur(a, x) * gamma(a)
}

/// Epstein zeta of the cubic lattice, `Z_d(s) = Σ'_{m ∈ ℤ^d} |m|^{-2s}`,
/// analytically continued, for `0 < s < d/2`.
///
/// Uses the Ewald split with parameter `π`:
/// `π^{-s} Γ(s) Z(s) = -1/s + 1/(s - d/2)
///   + Σ' [Γ(s, π|m|²)(π|m|²)^{-s} + Γ(d/2 - s, π|m|²)(π|m|²)^{s - d/2}]`.
pub fn epstein_zeta(d: usize, s: f64) -> f64 {
    let half = 0.5 * d as f64;
    assert!(s > 0.0 && s < half, "epstein_zeta needs 0 < s < d/2");
    const M: i64 = 6;
    let side = (2 * M + 1) as usize;
    let total = side.pow(d as u32);
    // count lattice points by |m|² so each shell is evaluated once
    let mut shells = vec![0u64; (d as i64 * M * M + 1) as usize];
    for idx in 0..total {
        let mut rem = idx;
        let mut r2 = 0i64;
        for _ in 0..d {
            let c = (rem % side) as i64 - M;
            rem /= side;
            r2 += c * c;
        }
        shells[r2 as usize] += 1;
    }
    let mut sum = -1.0 / s + 1.0 / (s - half);
    for (r2, &count) in shells.iter().enumerate().skip(1) {
        if count == 0 {
            continue;
        }
        let x = PI * r2 as f64;
        let t = upper_gamma(s, x) * x.powf(-s) + upper_gamma(half - s, x) * x.powf(s - half);
        sum += count as f64 * t;
    }
    sum * PI.powf(s) / gamma(s)
}

/// Volume of the unit ball in `ℝ^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let h = 0.5 * d as f64;
    PI.powf(h) / gamma(h + 1.0)
}
