//! Convolutive Volterra kernels `K(t, s) = k(t - s)` and the moment integrals
//! the scheme needs over one grid step.
//!
//! All moments are expressed through the lag `u = t - s`. With `h` the step
//! size, the one-step integrals only depend on lag offsets measured in steps,
//! which is what lets the covariance of every column family be read off a
//! single matrix.

use std::fmt;
use std::sync::Arc;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::quadrature::{integrate, integrate_left_singular, DEFAULT_REL_TOL};

/// Admissible fractional exponents, open interval.
pub const ALPHA_RANGE: (f64, f64) = (0.5, 1.5);

/// A user-supplied convolutive kernel `u -> k(u)`, `u > 0`.
#[derive(Clone)]
pub struct TabulatedKernel {
    func: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    singular_exponent: f64,
}

impl TabulatedKernel {
    /// `singular_exponent` is the power `p` with `k(u) ~ u^p` as `u -> 0`;
    /// use 0 for kernels bounded at the origin.
    pub fn new<F>(func: F, singular_exponent: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if singular_exponent <= -0.5 {
            return Err(Error::invalid(format!(
                "kernel exponent {singular_exponent} is not square integrable"
            )));
        }
        Ok(Self {
            func: Arc::new(func),
            singular_exponent,
        })
    }
}

impl fmt::Debug for TabulatedKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TabulatedKernel")
            .field("singular_exponent", &self.singular_exponent)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum KernelKind {
    /// `u^(alpha-1) / Gamma(alpha)`
    Fractional {
        alpha: f64,
    },
    /// `exp(-rho u) u^(alpha-1) / Gamma(alpha)`
    ExponentialFractional {
        alpha: f64,
        rho: f64,
    },
    /// `K = 1`
    Markovian,
    Tabulated(TabulatedKernel),
}

/// A validated kernel together with its cached normalization.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    kind: KernelKind,
    inv_gamma: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > ALPHA_RANGE.0 && alpha < ALPHA_RANGE.1) {
        return Err(Error::invalid(format!(
            "alpha must lie in ({}, {}), got {alpha}",
            ALPHA_RANGE.0, ALPHA_RANGE.1
        )));
    }
    Ok(())
}

impl KernelSpec {
    pub fn fractional(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            kind: KernelKind::Fractional { alpha },
            inv_gamma: 1.0 / gamma(alpha),
        })
    }

    pub fn exponential_fractional(alpha: f64, rho: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::invalid(format!("rho must be >= 0, got {rho}")));
        }
        Ok(Self {
            kind: KernelKind::ExponentialFractional { alpha, rho },
            inv_gamma: 1.0 / gamma(alpha),
        })
    }

    pub fn markovian() -> Self {
        Self {
            kind: KernelKind::Markovian,
            inv_gamma: 1.0,
        }
    }

    pub fn tabulated(kernel: TabulatedKernel) -> Self {
        Self {
            kind: KernelKind::Tabulated(kernel),
            inv_gamma: 1.0,
        }
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    /// Fractional order; 1 for the Markovian kernel, `None` for tabulated kernels.
    pub fn alpha(&self) -> Option<f64> {
        match self.kind {
            KernelKind::Fractional { alpha } | KernelKind::ExponentialFractional { alpha, .. } => {
                Some(alpha)
            }
            KernelKind::Markovian => Some(1.0),
            KernelKind::Tabulated(_) => None,
        }
    }

    /// Exponent `p` in `k(u) ~ u^p` at the origin.
    pub fn singular_exponent(&self) -> f64 {
        match &self.kind {
            KernelKind::Fractional { alpha } | KernelKind::ExponentialFractional { alpha, .. } => {
                alpha - 1.0
            }
            KernelKind::Markovian => 0.0,
            KernelKind::Tabulated(t) => t.singular_exponent,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.singular_exponent() < 0.0
    }

    /// Closed-form branch applies: pure power kernel with no damping.
    fn power_alpha(&self) -> Option<f64> {
        match self.kind {
            KernelKind::Fractional { alpha } => Some(alpha),
            KernelKind::ExponentialFractional { alpha, rho: 0.0 } => Some(alpha),
            _ => None,
        }
    }

    /// `k(u)` for a lag `u > 0`.
    pub fn at_lag(&self, u: f64) -> f64 {
        match &self.kind {
            KernelKind::Fractional { alpha } => u.powf(alpha - 1.0) * self.inv_gamma,
            KernelKind::ExponentialFractional { alpha, rho } => {
                (-rho * u).exp() * u.powf(alpha - 1.0) * self.inv_gamma
            }
            KernelKind::Markovian => 1.0,
            KernelKind::Tabulated(t) => (t.func)(u),
        }
    }

    /// `K(t, s)` for `0 <= s <= t`.
    pub fn eval(&self, t: f64, s: f64) -> Result<f64> {
        if s > t {
            return Err(Error::Domain(format!(
                "K(t, s) needs s <= t, got t={t}, s={s}"
            )));
        }
        if s < 0.0 {
            return Err(Error::Domain(format!("negative time s={s}")));
        }
        let u = t - s;
        if u == 0.0 {
            let p = self.singular_exponent();
            if p < 0.0 {
                return Err(Error::Domain(format!("kernel is singular at s = t = {t}")));
            }
            if p > 0.0 {
                return Ok(0.0);
            }
        }
        Ok(self.at_lag(u))
    }

    /// `int_{ah}^{(a+1)h} k(u) du`.
    pub(crate) fn lag_integral(&self, lag: usize, h: f64) -> Result<f64> {
        if let KernelKind::Markovian = self.kind {
            return Ok(h);
        }
        if let Some(alpha) = self.power_alpha() {
            let m = lag as f64;
            let scale = h.powf(alpha) * self.inv_gamma / alpha;
            return Ok(scale * ((m + 1.0).powf(alpha) - m.powf(alpha)));
        }
        let lo = lag as f64 * h;
        let hi = lo + h;
        if lag == 0 {
            integrate_left_singular(
                |u| self.at_lag(u),
                0.0,
                h,
                self.singular_exponent(),
                DEFAULT_REL_TOL,
            )
        } else {
            integrate(|u| self.at_lag(u), lo, hi, DEFAULT_REL_TOL)
        }
    }

    /// `int_0^h k(ah + w) k(bh + w) dw`; symmetric in `(a, b)` by construction.
    pub(crate) fn lag_product_integral(&self, a: usize, b: usize, h: f64) -> Result<f64> {
        let (a, b) = (a.min(b), a.max(b));
        if let KernelKind::Markovian = self.kind {
            return Ok(h);
        }
        if let Some(alpha) = self.power_alpha() {
            let p = 2.0 * alpha - 1.0;
            let scale = h.powf(p) * self.inv_gamma * self.inv_gamma;
            if a == b {
                let m = a as f64;
                return Ok(scale * ((m + 1.0).powf(p) - m.powf(p)) / p);
            }
            let (af, bf) = (a as f64, b as f64);
            let e = alpha - 1.0;
            let unit = if a == 0 {
                integrate_left_singular(
                    |v: f64| v.powf(e) * (bf + v).powf(e),
                    0.0,
                    1.0,
                    e,
                    DEFAULT_REL_TOL,
                )?
            } else {
                integrate(
                    |v: f64| (af + v).powf(e) * (bf + v).powf(e),
                    0.0,
                    1.0,
                    DEFAULT_REL_TOL,
                )?
            };
            return Ok(scale * unit);
        }
        let (ah, bh) = (a as f64 * h, b as f64 * h);
        let f = |w: f64| self.at_lag(ah + w) * self.at_lag(bh + w);
        let p = self.singular_exponent();
        match (a, b) {
            (0, 0) => integrate_left_singular(f, 0.0, h, 2.0 * p, DEFAULT_REL_TOL),
            (0, _) => integrate_left_singular(f, 0.0, h, p, DEFAULT_REL_TOL),
            _ => integrate(f, 0.0, h, DEFAULT_REL_TOL),
        }
    }

    /// Drift weight `int_{t_{l-1}}^{t_l} K(t_k, s) ds`, `1 <= l <= k <= n`.
    pub fn drift_weight(&self, grid: &TimeGrid, k: usize, l: usize) -> Result<f64> {
        if l == 0 || l > k || k > grid.steps() {
            return Err(Error::invalid(format!(
                "drift weight needs 1 <= l <= k <= {}, got k={k}, l={l}",
                grid.steps()
            )));
        }
        self.lag_integral(k - l, grid.step_size())
    }

    /// Covariance `int_{t_{l-1}}^{t_l} K(t_i, s) K(t_j, s) ds`, `1 <= l <= i, j <= n`.
    pub fn cov_entry(&self, grid: &TimeGrid, l: usize, i: usize, j: usize) -> Result<f64> {
        let n = grid.steps();
        if l == 0 || l > i || l > j || i > n || j > n {
            return Err(Error::invalid(format!(
                "covariance entry needs 1 <= l <= i, j <= {n}, got l={l}, i={i}, j={j}"
            )));
        }
        self.lag_product_integral(i - l, j - l, grid.step_size())
    }

    /// `Cov(dW_{t_l}, int_{t_{l-1}}^{t_l} K(t_i, s) dW_s)`; the same integral as
    /// [`drift_weight`](Self::drift_weight) taken with this kernel.
    pub fn cross_entry(&self, grid: &TimeGrid, l: usize, i: usize) -> Result<f64> {
        self.drift_weight(grid, i, l)
    }
}
