//! Numerical estimates of the kernel regularity exponents.
//!
//! The integrability modulus `eta_hat(d)` and continuity modulus `eta(d)` are
//! defined through a supremum over all `t` in `[0, T]`; here the supremum is
//! taken over grid nodes only, so the reported values are lower bounds.
//! Exponents are least-squares slopes of `log eta` against `log d`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::KernelSpec;
use crate::quadrature::{integrate, integrate_left_singular, DEFAULT_REL_TOL};
use crate::stats::ols;

/// Moduli below this are treated as exact zeros.
const ZERO_MODULUS: f64 = 1e-300;

#[derive(Debug, Clone, Serialize)]
pub struct KernelDiagnostics {
    pub deltas: Vec<f64>,
    pub eta_hat: Vec<f64>,
    pub eta: Vec<f64>,
    pub fitted_theta_hat: f64,
    /// Zero when `eta` vanishes identically; see `continuity_degenerate`.
    pub fitted_theta: f64,
    /// The continuity modulus is zero at every width (time-constant kernel).
    pub continuity_degenerate: bool,
    pub beta: f64,
    /// `sup_t int_0^t K^(2 beta / (beta + 1)) ds`.
    pub int_beta_drift: f64,
    /// `sup_t int_0^t K^(2 beta) ds`.
    pub int_beta_diffusion: f64,
    /// Sum of the two parts; infinite if either diverges.
    pub int_beta_sup: f64,
    pub int_beta_divergent: bool,
}

/// Estimates the regularity of `kernel` (used in both the drift and the
/// diffusion slot) from probe widths `deltas`.
pub fn diagnose(
    kernel: &KernelSpec,
    grid: &TimeGrid,
    deltas: &[f64],
    beta: f64,
) -> Result<KernelDiagnostics> {
    if deltas.is_empty() {
        return Err(Error::invalid("diagnostics need at least one probe width"));
    }
    if let Some(d) = deltas.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(Error::invalid(format!(
            "probe widths must be positive, got {d}"
        )));
    }
    if !(beta.is_finite() && beta > 1.0) {
        return Err(Error::invalid(format!("beta must exceed 1, got {beta}")));
    }

    let mut eta_hat = Vec::with_capacity(deltas.len());
    let mut eta = Vec::with_capacity(deltas.len());
    for &d in deltas {
        eta_hat.push(integrability_modulus(kernel, grid, d)?);
        eta.push(continuity_modulus(kernel, grid, d)?);
    }

    let fitted_theta_hat = log_slope(deltas, &eta_hat).unwrap_or(f64::NAN);
    let continuity_degenerate = eta.iter().all(|e| *e <= ZERO_MODULUS);
    let fitted_theta = if continuity_degenerate {
        0.0
    } else {
        log_slope(deltas, &eta).unwrap_or(f64::NAN)
    };

    let p = kernel.singular_exponent();
    let q_drift = 2.0 * beta / (beta + 1.0);
    let q_diff = 2.0 * beta;
    let int_beta_drift = power_integral_sup(kernel, grid, q_drift, p)?;
    let int_beta_diffusion = power_integral_sup(kernel, grid, q_diff, p)?;
    let int_beta_sup = int_beta_drift + int_beta_diffusion;

    Ok(KernelDiagnostics {
        deltas: deltas.to_vec(),
        eta_hat,
        eta,
        fitted_theta_hat,
        fitted_theta,
        continuity_degenerate,
        beta,
        int_beta_drift,
        int_beta_diffusion,
        int_beta_sup,
        int_beta_divergent: !int_beta_sup.is_finite(),
    })
}

fn log_slope(deltas: &[f64], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = deltas
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > ZERO_MODULUS)
        .map(|(d, v)| (d.ln(), v.ln()))
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    ols(&xs, &ys).map(|f| f.slope)
}

/// `int_0^len |k(v)|^power dv`, with `k(v) ~ v^p` at the origin.
fn lag_power_integral(kernel: &KernelSpec, len: f64, power: f64, p: f64) -> Result<f64> {
    if len == 0.0 {
        return Ok(0.0);
    }
    let exponent = if p < 0.0 { power * p } else { 0.0 };
    integrate_left_singular(
        |v| kernel.at_lag(v).abs().powf(power),
        0.0,
        len,
        exponent,
        DEFAULT_REL_TOL,
    )
}

/// `max_i max_t [int_{(t-d)+}^t K(t,u)^i du]^(1/i)` over grid nodes `t`.
fn integrability_modulus(kernel: &KernelSpec, grid: &TimeGrid, d: f64) -> Result<f64> {
    let p = kernel.singular_exponent();
    // The integral depends on t only through min(d, t).
    let mut widths: Vec<f64> = grid.nodes().filter(|t| *t > 0.0 && *t < d).collect();
    if grid.horizon() >= d {
        widths.push(d);
    }
    let mut best = 0.0f64;
    for w in widths {
        let first = lag_power_integral(kernel, w, 1.0, p)?;
        let second = lag_power_integral(kernel, w, 2.0, p)?.sqrt();
        best = best.max(first).max(second);
    }
    Ok(best)
}

/// `max_i max_t [int_0^t |K((t+d) ^ T, s) - K(t, s)|^i ds]^(1/i)` over grid nodes `t`.
fn continuity_modulus(kernel: &KernelSpec, grid: &TimeGrid, d: f64) -> Result<f64> {
    let p = kernel.singular_exponent();
    let horizon = grid.horizon();
    let mut best = 0.0f64;
    for t in grid.nodes().filter(|t| *t > 0.0) {
        let shift = (t + d).min(horizon) - t;
        if shift <= 0.0 {
            continue;
        }
        for power in [1.0, 2.0] {
            let exponent = if p < 0.0 { power * p } else { 0.0 };
            let v = integrate_left_singular(
                |v| {
                    (kernel.at_lag(v + shift) - kernel.at_lag(v))
                        .abs()
                        .powf(power)
                },
                0.0,
                t,
                exponent,
                DEFAULT_REL_TOL,
            )?;
            best = best.max(v.powf(1.0 / power));
        }
    }
    Ok(best)
}

/// `max_t int_0^t |K|^power ds` over grid nodes, or infinity when divergent.
fn power_integral_sup(kernel: &KernelSpec, grid: &TimeGrid, power: f64, p: f64) -> Result<f64> {
    if p < 0.0 && power * p <= -1.0 {
        return Ok(f64::INFINITY);
    }
    let h = grid.step_size();
    let mut acc = lag_power_integral(kernel, h, power, p)?;
    let mut best = acc;
    for m in 1..grid.steps() {
        let lo = m as f64 * h;
        acc += integrate(
            |v| kernel.at_lag(v).abs().powf(power),
            lo,
            lo + h,
            DEFAULT_REL_TOL,
        )?;
        best = best.max(acc);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dyadic() -> Vec<f64> {
        (4..=10).map(|e| 2f64.powi(-e)).collect()
    }

    #[test]
    fn markovian_kernel() {
        let g = TimeGrid::new(1.0, 32).unwrap();
        let d = diagnose(&KernelSpec::markovian(), &g, &[0.1, 0.05, 0.025], 2.0).unwrap();
        // the L2 part sqrt(d) dominates the L1 part d
        assert!((d.fitted_theta_hat - 0.5).abs() < 1e-12);
        assert!(d.continuity_degenerate);
        assert_eq!(d.fitted_theta, 0.0);
        assert!(d.eta.iter().all(|e| *e == 0.0));
        assert!((d.int_beta_sup - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fractional_exponents() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        for a in [0.6, 0.9] {
            let d = diagnose(&KernelSpec::fractional(a).unwrap(), &g, &dyadic(), 1.5).unwrap();
            assert!(
                (d.fitted_theta_hat - (a - 0.5)).abs() < 0.05,
                "{a}: {}",
                d.fitted_theta_hat
            );
            assert!(
                (d.fitted_theta - (a - 0.5)).abs() < 0.05,
                "{a}: {}",
                d.fitted_theta
            );
            assert!(d.eta_hat.iter().chain(&d.eta).all(|v| *v > 0.0));
        }
    }

    #[test]
    fn integrability_flags() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let k = KernelSpec::fractional(0.6).unwrap();
        // 2 beta (alpha - 1) = -2.4: K^(2 beta) is not integrable
        let d = diagnose(&k, &g, &[0.1], 3.0).unwrap();
        assert!(d.int_beta_drift.is_finite());
        assert!(d.int_beta_diffusion.is_infinite());
        assert!(d.int_beta_divergent);
        // 2 beta (alpha - 1) = -0.96 > -1: finite
        let d = diagnose(&k, &g, &[0.1], 1.2).unwrap();
        assert!(!d.int_beta_divergent);
        let expect = 1.0 / (0.04 * statrs::function::gamma::gamma(0.6).powf(2.4));
        assert!((d.int_beta_diffusion - expect).abs() / expect < 1e-8);
    }

    #[test]
    fn input_validation() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let k = KernelSpec::fractional(0.9).unwrap();
        assert!(diagnose(&k, &g, &[], 2.0).is_err());
        assert!(diagnose(&k, &g, &[0.1, -0.1], 2.0).is_err());
        assert!(diagnose(&k, &g, &[0.1], 1.0).is_err());
    }
}
