//! Path-dependent coefficients evaluated on discrete node paths.
//!
//! The drift is `b(t, x) = mu0 - lambda x(t) + sum_j w_j x(t - lag_j)` with a
//! finite atomic delay measure, and the diffusion is
//! `sigma(t, x) = G(int_0^t Phi(x(u)) du)` with
//! `G(y) = eta1 sqrt(c + tanh y)` and `Phi(x) = eta2 sqrt(kappa2 (x - a)^2 + kappa0)`.
//! Discrete paths are lifted through the piecewise-affine interpolator for the
//! drift, and the time integral in the diffusion is replaced by the trapezoid
//! rule on the nodes.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{interpolate_nodes, TimeGrid};

/// Point mass of the delay measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayAtom {
    pub lag: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientModel {
    pub mu0: f64,
    pub lambda: f64,
    pub delay: Vec<DelayAtom>,
    pub eta1: f64,
    pub eta2: f64,
    pub c: f64,
    pub kappa2: f64,
    pub kappa0: f64,
    pub a: f64,
}

impl Default for CoefficientModel {
    /// The mean-reverting model with tanh volatility used for the fractional
    /// experiments.
    fn default() -> Self {
        Self {
            mu0: 2.0,
            lambda: 0.2,
            delay: Vec::new(),
            eta1: 1.0,
            eta2: 1.0,
            c: 1.0,
            kappa2: 0.384,
            kappa0: 0.0025,
            a: 0.095,
        }
    }
}

impl CoefficientModel {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.mu0,
            self.lambda,
            self.eta1,
            self.eta2,
            self.c,
            self.kappa2,
            self.kappa0,
            self.a,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("model parameters must be finite"));
        }
        // c = 1 is admitted: the trapezoid functional is >= 0 whenever Phi >= 0,
        // so tanh never approaches -1.
        if self.c < 1.0 {
            return Err(Error::invalid(format!("c must be >= 1, got {}", self.c)));
        }
        if self.kappa0 < 0.0 || self.kappa2 < 0.0 {
            return Err(Error::invalid("kappa0 and kappa2 must be nonnegative"));
        }
        if self.eta1 < 0.0 || self.eta2 < 0.0 {
            return Err(Error::invalid("eta1 and eta2 must be nonnegative"));
        }
        for atom in &self.delay {
            if !(atom.lag.is_finite() && atom.lag >= 0.0 && atom.weight.is_finite()) {
                return Err(Error::invalid(format!("bad delay atom {atom:?}")));
            }
        }
        Ok(())
    }

    /// `Phi(x) = eta2 sqrt(kappa2 (x - a)^2 + kappa0)`.
    #[inline]
    pub fn phi(&self, x: f64) -> f64 {
        let d = x - self.a;
        self.eta2 * (self.kappa2 * d * d + self.kappa0).sqrt()
    }

    /// `G(y) = eta1 sqrt(c + tanh y)`.
    #[inline]
    pub fn vol_map(&self, y: f64) -> f64 {
        self.eta1 * (self.c + y.tanh()).max(0.0).sqrt()
    }

    /// Trapezoid approximation of `int_0^{t_l} Phi(x(u)) du` from nodes
    /// `values[0..=l]`.
    pub fn path_functional(&self, grid: &TimeGrid, values: &[f64]) -> f64 {
        let l = values.len() - 1;
        if l == 0 {
            return 0.0;
        }
        let interior: f64 = values[1..l].iter().map(|&x| self.phi(x)).sum();
        trapezoid(
            grid.step_size(),
            self.phi(values[0]),
            self.phi(values[l]),
            interior,
        )
    }

    /// `b_l` on nodes `values[0..=l]`.
    pub fn drift(&self, grid: &TimeGrid, values: &[f64]) -> f64 {
        let l = values.len() - 1;
        let x_l = values[l];
        let mut b = self.mu0 - self.lambda * x_l;
        if !self.delay.is_empty() {
            let t_l = grid.node(l);
            for atom in &self.delay {
                if atom.lag <= t_l {
                    b += atom.weight * interpolate_nodes(grid, values, t_l - atom.lag);
                }
            }
        }
        b
    }

    /// `sigma_l` on nodes `values[0..=l]`.
    pub fn diffusion(&self, grid: &TimeGrid, values: &[f64]) -> f64 {
        self.vol_map(self.path_functional(grid, values))
    }

    /// Constant `L` with `|sigma_l(x) - sigma_l(y)| <= L max_m |x_m - y_m|`.
    ///
    /// The trapezoid functional is nonnegative and `eta2 sqrt(kappa2) t_l`-Lipschitz
    /// in the max norm; on `[0, inf)` the slope of `G` peaks at `eta1 / (2 sqrt(c))`.
    pub fn diffusion_lipschitz_bound(&self, grid: &TimeGrid, l: usize) -> f64 {
        // sup_y sech^2(y) / (2 sqrt(c + tanh y)) over y >= 0, attained at y = 0
        let g_slope = self.eta1 / (2.0 * self.c.sqrt());
        g_slope * self.eta2 * self.kappa2.sqrt() * grid.node(l)
    }
}

#[inline]
fn trapezoid(h: f64, first: f64, last: f64, interior: f64) -> f64 {
    0.5 * h * (first + last) + h * interior
}

/// Running trapezoid sum for a path revealed one node at a time; produces the
/// same values, bit for bit, as [`CoefficientModel::path_functional`].
#[derive(Debug, Clone, Default)]
pub(crate) struct TrapezoidLift {
    first: f64,
    interior: f64,
    pending: f64,
    len: usize,
}

impl TrapezoidLift {
    pub(crate) fn reset(&mut self) {
        *self = Self::default();
    }

    /// Registers node value `phi(x_l)` and returns the functional at index `l`.
    pub(crate) fn push(&mut self, h: f64, phi_l: f64) -> f64 {
        let l = self.len;
        self.len += 1;
        if l == 0 {
            self.first = phi_l;
            return 0.0;
        }
        if l >= 2 {
            self.interior += self.pending;
        }
        self.pending = phi_l;
        trapezoid(h, self.first, phi_l, self.interior)
    }
}

/// Deterministic initial input `x0 * shape(t)`.
#[derive(Clone)]
pub struct InitialCondition {
    pub x0: f64,
    shape: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl InitialCondition {
    pub fn constant(x0: f64) -> Self {
        Self { x0, shape: None }
    }

    pub fn with_shape<F>(x0: f64, shape: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            x0,
            shape: Some(Arc::new(shape)),
        }
    }

    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        match &self.shape {
            None => self.x0,
            Some(f) => self.x0 * f(t),
        }
    }
}

impl fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialCondition")
            .field("x0", &self.x0)
            .field("shaped", &self.shape.is_some())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_phi() -> CoefficientModel {
        CoefficientModel {
            kappa2: 0.0,
            kappa0: 1.0,
            eta2: 1.0,
            ..Default::default()
        }
    }

    #[test]
    fn trapezoid_of_constant() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let m = unit_phi();
        assert_eq!(m.path_functional(&g, &[0.3, -1.0, 2.0]), 0.5);
        assert_eq!(m.path_functional(&g, &[0.3]), 0.0);
    }

    #[test]
    fn default_model_on_zero_path() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let m = CoefficientModel::default();
        let v = m.path_functional(&g, &[0.0; 5]);
        // t_4 * sqrt(0.384 * 0.095^2 + 0.0025), 40-digit reference
        assert!((v - 0.077237296690135394717).abs() < 1e-15);
    }

    #[test]
    fn drift_values() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let m = CoefficientModel::default();
        assert_eq!(m.drift(&g, &[0.0]), 2.0);
        assert_eq!(m.drift(&g, &[0.0, 1.0, 5.0]), 1.0);
    }

    #[test]
    fn delayed_drift_reads_interpolated_past() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let h = g.step_size();
        let m = CoefficientModel {
            mu0: 0.0,
            lambda: 0.0,
            delay: vec![DelayAtom {
                lag: h,
                weight: 1.0,
            }],
            ..Default::default()
        };
        let values: Vec<f64> = (0..=5).map(|i| i as f64 * h).collect();
        assert_eq!(m.drift(&g, &values), 4.0 * h);
        // lags beyond the elapsed time are ignored
        let far = CoefficientModel {
            delay: vec![DelayAtom {
                lag: 0.9,
                weight: 1.0,
            }],
            ..m
        };
        assert_eq!(far.drift(&g, &values), 0.0);
    }

    #[test]
    fn diffusion_values() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let m = CoefficientModel::default();
        assert_eq!(m.diffusion(&g, &[0.0]), 1.0);

        let flat = CoefficientModel {
            kappa0: 0.0,
            kappa2: 0.0,
            eta1: 0.7,
            c: 2.0,
            ..Default::default()
        };
        for l in 0..4 {
            assert_eq!(flat.diffusion(&g, &vec![0.0; l + 1]), 0.7 * 2f64.sqrt());
        }
        assert!((m.vol_map(50.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(CoefficientModel::default().validate().is_ok());
        let bad = [
            CoefficientModel {
                c: 0.5,
                ..Default::default()
            },
            CoefficientModel {
                kappa0: -1.0,
                ..Default::default()
            },
            CoefficientModel {
                eta1: -1.0,
                ..Default::default()
            },
            CoefficientModel {
                mu0: f64::NAN,
                ..Default::default()
            },
            CoefficientModel {
                delay: vec![DelayAtom {
                    lag: -0.1,
                    weight: 1.0,
                }],
                ..Default::default()
            },
        ];
        for m in bad {
            assert!(m.validate().is_err(), "{m:?}");
        }
    }

    #[test]
    fn initial_condition() {
        assert_eq!(InitialCondition::constant(1.5).at(0.7), 1.5);
        let ic = InitialCondition::with_shape(2.0, |t| 1.0 + t);
        assert_eq!(ic.at(0.5), 3.0);
    }

    proptest! {
        #[test]
        fn running_trapezoid_matches_direct(values in prop::collection::vec(-3.0f64..3.0, 1..40)) {
            let g = TimeGrid::new(1.0, 64).unwrap();
            let m = CoefficientModel::default();
            let mut lift = TrapezoidLift::default();
            for l in 0..values.len() {
                let got = lift.push(g.step_size(), m.phi(values[l]));
                prop_assert_eq!(got, m.path_functional(&g, &values[..=l]));
            }
        }

        #[test]
        fn diffusion_is_bounded(values in prop::collection::vec(-50.0f64..50.0, 1..30), c in 1.0f64..3.0) {
            let g = TimeGrid::new(1.0, 32).unwrap();
            let m = CoefficientModel { c, ..Default::default() };
            let s = m.diffusion(&g, &values);
            prop_assert!(s >= m.eta1 * (c - 1.0).sqrt() - 1e-15);
            prop_assert!(s <= m.eta1 * (c + 1.0).sqrt() + 1e-15);
        }

        #[test]
        fn coefficients_are_lipschitz(
            values in prop::collection::vec(-2.0f64..2.0, 2..30),
            bump in -0.1f64..0.1,
            at in 0usize..30,
        ) {
            let g = TimeGrid::new(1.0, 32).unwrap();
            let h = g.step_size();
            let m = CoefficientModel {
                delay: vec![DelayAtom { lag: 2.5 * h, weight: 0.3 }, DelayAtom { lag: 0.1, weight: -0.2 }],
                ..Default::default()
            };
            let l = values.len() - 1;
            let mut other = values.clone();
            other[at % values.len()] += bump;
            let eps = bump.abs();
            let db = (m.drift(&g, &values) - m.drift(&g, &other)).abs();
            let weights: f64 = m.delay.iter().map(|a| a.weight.abs()).sum();
            prop_assert!(db <= (m.lambda.abs() + weights) * eps + 1e-12);
            let ds = (m.diffusion(&g, &values) - m.diffusion(&g, &other)).abs();
            prop_assert!(ds <= m.diffusion_lipschitz_bound(&g, l) * eps + 1e-12);
        }

        #[test]
        fn diffusion_is_non_anticipative(values in prop::collection::vec(-2.0f64..2.0, 3..20), junk in -5.0f64..5.0) {
            let g = TimeGrid::new(1.0, 32).unwrap();
            let m = CoefficientModel::default();
            let l = values.len() / 2;
            let mut other = values.clone();
            for v in other.iter_mut().skip(l + 1) {
                *v += junk;
            }
            prop_assert_eq!(m.diffusion(&g, &values[..=l]), m.diffusion(&g, &other[..=l]));
            prop_assert_eq!(m.drift(&g, &values[..=l]), m.drift(&g, &other[..=l]));
        }
    }
}
