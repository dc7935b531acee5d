//! Uniform time grids and the piecewise-affine interpolator lifting node values
//! to continuous paths.

use crate::error::{Error, Result};

/// Uniform discretization `t_k = k * h` of `[0, horizon]` with `steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    step_size: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(Error::invalid("grid needs at least one step"));
        }
        Ok(Self {
            horizon,
            steps,
            step_size: horizon / steps as f64,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    /// Node `t_k`. The last node is pinned to the horizon exactly.
    pub fn node(&self, k: usize) -> f64 {
        debug_assert!(k <= self.steps);
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.step_size
        }
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.steps + 1).map(move |k| self.node(k))
    }

    /// The grid with twice as many steps over the same horizon.
    pub fn refined(&self) -> TimeGrid {
        TimeGrid {
            horizon: self.horizon,
            steps: 2 * self.steps,
            step_size: self.horizon / (2 * self.steps) as f64,
        }
    }
}

/// Node values `x_0..=x_k` on a grid, `k <= steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePath<'a> {
    grid: TimeGrid,
    values: &'a [f64],
}

impl<'a> NodePath<'a> {
    pub fn new(grid: TimeGrid, values: &'a [f64]) -> Result<Self> {
        if values.is_empty() || values.len() > grid.steps() + 1 {
            return Err(Error::invalid(format!(
                "node path needs between 1 and {} values, got {}",
                grid.steps() + 1,
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &'a [f64] {
        self.values
    }

    /// Index `k` of the last node.
    pub fn last_index(&self) -> usize {
        self.values.len() - 1
    }

    /// Evaluates the interpolated path at `t`.
    ///
    /// On `[t_l, t_{l+1})` with `l < k` this is the affine blend of `x_l` and
    /// `x_{l+1}`; from `t_k` onward the path is frozen at `x_k`.
    pub fn interpolate(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.grid.horizon()).contains(&t) {
            return Err(Error::invalid(format!(
                "t = {t} outside [0, {}]",
                self.grid.horizon()
            )));
        }
        Ok(interpolate_nodes(&self.grid, self.values, t))
    }
}

/// Unchecked interpolation used on hot paths; `t` must lie in `[0, horizon]`.
pub(crate) fn interpolate_nodes(grid: &TimeGrid, values: &[f64], t: f64) -> f64 {
    let k = values.len() - 1;
    if t >= grid.node(k) {
        return values[k];
    }
    let h = grid.step_size();
    // floor(t / h) can land one off after rounding; settle on t_l <= t < t_{l+1}.
    let mut l = ((t / h).floor().max(0.0) as usize).min(k - 1);
    if t < grid.node(l) {
        l -= 1;
    } else if t >= grid.node(l + 1) {
        l += 1;
    }
    let left = grid.node(l);
    if t == left {
        return values[l];
    }
    let w = (t - left) / (grid.node(l + 1) - left);
    values[l] + w * (values[l + 1] - values[l])
}
