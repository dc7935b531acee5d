//! The interpolated K-integrated Euler recursion
//!
//! ```text
//! X_k = x0(t_k) + sum_{l=1}^{k} Lambda[k][l] b_{l-1} + sum_{l=1}^{k} G[k][l] sigma_{l-1}
//! ```
//!
//! where `b_{l-1}` and `sigma_{l-1}` are evaluated on the already computed
//! nodes `X_0..X_{l-1}`, plus a classical Euler-Maruyama recursion used as an
//! oracle for the Markovian kernel.

use crate::coefficients::{CoefficientModel, InitialCondition, TrapezoidLift};
use crate::driver::{DriverMatrices, DriverTag, GaussianSample};
use crate::error::{Error, Result};
use crate::grid::{NodePath, TimeGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct SchemePath {
    grid: TimeGrid,
    values: Vec<f64>,
    driver_tag: Option<DriverTag>,
}

impl SchemePath {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Tag of the Gaussian sample that drove this path, if any.
    pub fn driver_tag(&self) -> Option<DriverTag> {
        self.driver_tag
    }

    /// Piecewise-affine continuous extension at `t`.
    pub fn extend(&self, t: f64) -> Result<f64> {
        NodePath::new(self.grid, &self.values)?.interpolate(t)
    }
}

/// Reusable buffers for [`simulate_into`].
#[derive(Debug, Default)]
pub struct SchemeWorkspace {
    drifts: Vec<f64>,
    vols: Vec<f64>,
    lift: TrapezoidLift,
}

fn check_inputs(matrices: &DriverMatrices, g: &GaussianSample) -> Result<()> {
    if matrices.grid() != g.grid() {
        return Err(Error::invalid(format!(
            "driver built for {} steps over {}, sample has {} steps over {}",
            matrices.steps(),
            matrices.grid().horizon(),
            g.steps(),
            g.grid().horizon()
        )));
    }
    Ok(())
}

/// Runs the scheme for one Gaussian sample.
pub fn simulate_path(
    model: &CoefficientModel,
    init: &InitialCondition,
    matrices: &DriverMatrices,
    g: &GaussianSample,
) -> Result<SchemePath> {
    check_inputs(matrices, g)?;
    let mut values = Vec::new();
    simulate_into(
        model,
        init,
        matrices,
        g,
        &mut SchemeWorkspace::default(),
        &mut values,
    );
    Ok(SchemePath {
        grid: *g.grid(),
        values,
        driver_tag: Some(g.tag()),
    })
}

/// Unchecked core of [`simulate_path`]; writes `X_0..X_n` into `values`.
pub(crate) fn simulate_into(
    model: &CoefficientModel,
    init: &InitialCondition,
    matrices: &DriverMatrices,
    g: &GaussianSample,
    ws: &mut SchemeWorkspace,
    values: &mut Vec<f64>,
) {
    let grid = matrices.grid();
    let n = grid.steps();
    let h = grid.step_size();
    let weights = matrices.drift_weights();

    values.clear();
    values.reserve(n + 1);
    values.push(init.at(0.0));
    ws.drifts.clear();
    ws.vols.clear();
    ws.lift.reset();

    for k in 1..=n {
        // coefficients frozen at the previous node, from the path so far
        let prefix = &values[..k];
        ws.drifts.push(model.drift(grid, prefix));
        let functional = ws.lift.push(h, model.phi(prefix[k - 1]));
        ws.vols.push(model.vol_map(functional));

        let row = &g.row(k)[..k];
        let mut acc = init.at(grid.node(k));
        // Lambda[k][l] = weights[k - l]
        for (l, (b, s)) in ws.drifts.iter().zip(&ws.vols).enumerate() {
            acc += weights[k - 1 - l] * b + row[l] * s;
        }
        values.push(acc);
    }
}

/// Classical Euler-Maruyama with the same coefficient lifts, driven by the
/// Brownian increments `increments[l - 1] = W(t_l) - W(t_{l-1})`.
pub fn classical_euler(
    model: &CoefficientModel,
    init: &InitialCondition,
    grid: &TimeGrid,
    increments: &[f64],
) -> Result<SchemePath> {
    let n = grid.steps();
    if increments.len() != n {
        return Err(Error::invalid(format!(
            "expected {n} increments, got {}",
            increments.len()
        )));
    }
    let h = grid.step_size();
    let mut values = Vec::with_capacity(n + 1);
    values.push(init.at(0.0));
    for k in 1..=n {
        let b = model.drift(grid, &values);
        let s = model.diffusion(grid, &values);
        let prev = values[k - 1];
        let shift = init.at(grid.node(k)) - init.at(grid.node(k - 1));
        values.push(prev + shift + b * h + s * increments[k - 1]);
    }
    Ok(SchemePath {
        grid: *grid,
        values,
        driver_tag: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::rng::PathStream;

    fn quiet() -> CoefficientModel {
        CoefficientModel {
            mu0: 0.0,
            lambda: 0.0,
            eta1: 0.0,
            ..Default::default()
        }
    }

    fn setup(kernel: KernelSpec, n: usize) -> (DriverMatrices, GaussianSample) {
        let g = TimeGrid::new(1.0, n).unwrap();
        let m = DriverMatrices::assemble(&kernel, &kernel, &g).unwrap();
        let s = m.sample(&PathStream::new(5, n, 0));
        (m, s)
    }

    #[test]
    fn no_coefficients_keeps_initial_input() {
        let (m, s) = setup(KernelSpec::fractional(0.7).unwrap(), 8);
        let init = InitialCondition::with_shape(1.5, |t| 1.0 + t);
        let p = simulate_path(&quiet(), &init, &m, &s).unwrap();
        for (k, v) in p.values().iter().enumerate() {
            assert_eq!(*v, 1.5 * (1.0 + m.grid().node(k)));
        }
        assert_eq!(p.values()[0], 1.5);
    }

    #[test]
    fn constant_drift_markovian() {
        let (m, s) = setup(KernelSpec::markovian(), 10);
        let model = CoefficientModel {
            mu0: 2.0,
            ..quiet()
        };
        let p = simulate_path(&model, &InitialCondition::constant(0.5), &m, &s).unwrap();
        for (k, v) in p.values().iter().enumerate() {
            assert!((v - (0.5 + 2.0 * m.grid().node(k))).abs() < 1e-14);
        }
        let e = classical_euler(
            &model,
            &InitialCondition::constant(0.5),
            m.grid(),
            s.increments(),
        )
        .unwrap();
        for (a, b) in e.values().iter().zip(p.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_coefficients_euler_is_constant() {
        let g = TimeGrid::new(1.0, 5).unwrap();
        let e = classical_euler(&quiet(), &InitialCondition::constant(3.0), &g, &[0.4; 5]).unwrap();
        assert!(e.values().iter().all(|v| *v == 3.0));
        assert!(
            classical_euler(&quiet(), &InitialCondition::constant(3.0), &g, &[0.4; 4]).is_err()
        );
    }

    #[test]
    fn markovian_matches_classical_euler() {
        let (m, s) = setup(KernelSpec::markovian(), 50);
        let model = CoefficientModel::default();
        let init = InitialCondition::constant(0.0);
        let p = simulate_path(&model, &init, &m, &s).unwrap();
        let e = classical_euler(&model, &init, m.grid(), s.increments()).unwrap();
        for (a, b) in e.values().iter().zip(p.values()) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn causality_under_mutation_above_diagonal() {
        let (m, s) = setup(KernelSpec::fractional(0.6).unwrap(), 12);
        let model = CoefficientModel::default();
        let init = InitialCondition::constant(0.0);
        let base = simulate_path(&model, &init, &m, &s).unwrap();
        let mut poked = s.clone();
        for k in 1..=12 {
            for l in k + 1..=12 {
                *poked.raw_mut(k, l) = 1e6;
            }
        }
        assert_eq!(simulate_path(&model, &init, &m, &poked).unwrap(), base);

        // changing column l only moves nodes k >= l
        let mut late = s.clone();
        for k in 7..=12 {
            *late.raw_mut(k, 7) += 1.0;
        }
        let moved = simulate_path(&model, &init, &m, &late).unwrap();
        assert_eq!(moved.values()[..7], base.values()[..7]);
        assert_ne!(moved.values()[7], base.values()[7]);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let (m, _) = setup(KernelSpec::markovian(), 4);
        let (_, other) = setup(KernelSpec::markovian(), 8);
        assert!(simulate_path(
            &CoefficientModel::default(),
            &InitialCondition::constant(0.0),
            &m,
            &other
        )
        .is_err());
    }

    #[test]
    fn extension_interpolates_nodes() {
        let (m, s) = setup(KernelSpec::fractional(0.9).unwrap(), 4);
        let p = simulate_path(
            &CoefficientModel::default(),
            &InitialCondition::constant(0.0),
            &m,
            &s,
        )
        .unwrap();
        assert_eq!(p.extend(0.5).unwrap(), p.values()[2]);
        let mid = p.extend(0.125).unwrap();
        assert!((mid - 0.5 * (p.values()[0] + p.values()[1])).abs() < 1e-15);
        assert!(p.extend(1.5).is_err());
        assert_eq!(p.driver_tag().unwrap().path, 0);
    }
}
