//! Strong-rate estimation with exact `(n, 2n)` coupling.
//!
//! For each ladder entry `n` the fine `2n`-step Gaussian sample is drawn and
//! coarsened to `n` steps, both schemes run on the coupled pair, and squared
//! differences at shared nodes `t^n_k = t^{2n}_{2k}` are averaged over paths.

use rayon::prelude::*;
use serde::Serialize;

use super::config::RateConfig;
use crate::coefficients::{CoefficientModel, InitialCondition};
use crate::driver::{DriverMatrices, GaussianSample, SampleScratch};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::KernelSpec;
use crate::rng::PathStream;
use crate::scheme::{simulate_into, simulate_path, SchemePath, SchemeWorkspace};
use crate::stats::ols;

/// Coupled errors for one ladder entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePoint {
    pub n: usize,
    /// `(1/n) sum_k ||X^n_k - X^{2n}_{2k}||_2`.
    pub mean_error: f64,
    pub mean_stderr: f64,
    /// `||X^n_n - X^{2n}_{2n}||_2`.
    pub end_error: f64,
    pub end_stderr: f64,
}

/// Log-log fit `log e = intercept - slope * log n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoglogFit {
    pub slope: f64,
    /// `log C_T`.
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub points: Vec<RatePoint>,
    pub fit_mean: Option<LoglogFit>,
    pub fit_end: Option<LoglogFit>,
    /// `alpha - 1/2` when the kernel has a fractional order.
    pub reference_slope: Option<f64>,
    pub flags: Vec<String>,
    pub seed: u64,
    pub mc_paths: usize,
    pub horizon: f64,
}

impl RateReport {
    pub fn fitted_slope_mean(&self) -> Option<f64> {
        self.fit_mean.map(|f| f.slope)
    }

    pub fn fitted_slope_end(&self) -> Option<f64> {
        self.fit_end.map(|f| f.slope)
    }

    pub fn is_degenerate(&self) -> bool {
        self.flags.iter().any(|f| f.starts_with("degenerate"))
    }
}

/// OLS of `log error` on `log n`; the slope is negated so it compares to the
/// rate exponent directly.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<LoglogFit> {
    if points.len() < 2 {
        return Err(Error::invalid(format!(
            "log-log fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(n, e) in points {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::invalid(format!("non-positive abscissa {n}")));
        }
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::invalid(format!("non-positive error {e} at n = {n}")));
        }
        xs.push(n.ln());
        ys.push(e.ln());
    }
    let fit = ols(&xs, &ys).ok_or_else(|| Error::invalid("log-log fit needs distinct n values"))?;
    Ok(LoglogFit {
        slope: -fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
    })
}

/// Simulates `paths` trajectories of the scheme on `grid`.
pub fn simulate_trajectories(
    kernel: &KernelSpec,
    model: &CoefficientModel,
    init: &InitialCondition,
    grid: TimeGrid,
    seed: u64,
    paths: usize,
) -> Result<(DriverMatrices, Vec<SchemePath>)> {
    model.validate()?;
    let matrices = DriverMatrices::assemble(kernel, kernel, &grid)?;
    let out = (0..paths as u64)
        .into_par_iter()
        .map(|p| {
            let g = matrices.sample(&PathStream::new(seed, grid.steps(), p));
            simulate_path(model, init, &matrices, &g)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((matrices, out))
}

/// One coupled pair `(coarse, fine)` for path index `path`; the coarse path
/// is driven by the coarsened fine sample.
pub fn simulate_coupled(
    model: &CoefficientModel,
    init: &InitialCondition,
    coarse: &DriverMatrices,
    fine: &DriverMatrices,
    seed: u64,
    path: u64,
) -> Result<(SchemePath, SchemePath)> {
    if fine.steps() != 2 * coarse.steps() || fine.grid().horizon() != coarse.grid().horizon() {
        return Err(Error::invalid(format!(
            "fine driver ({} steps) is not a dyadic refinement of the coarse driver ({} steps)",
            fine.steps(),
            coarse.steps()
        )));
    }
    let g_fine = fine.sample(&PathStream::new(seed, fine.steps(), path));
    let g_coarse = g_fine.coarsen(coarse.grid())?;
    Ok((
        simulate_path(model, init, coarse, &g_coarse)?,
        simulate_path(model, init, fine, &g_fine)?,
    ))
}

/// Per-path squared differences `d_k^2`, `k = 1..=n`.
fn squared_differences(
    config: &RateConfig,
    coarse: &DriverMatrices,
    fine: &DriverMatrices,
) -> Vec<Vec<f64>> {
    struct Buffers {
        g_fine: GaussianSample,
        scratch: SampleScratch,
        ws: SchemeWorkspace,
        x_coarse: Vec<f64>,
        x_fine: Vec<f64>,
    }
    let n = coarse.steps();
    (0..config.mc_paths as u64)
        .into_par_iter()
        .map_init(
            || Buffers {
                g_fine: GaussianSample::zeros(*fine.grid(), Default::default()),
                scratch: SampleScratch::default(),
                ws: SchemeWorkspace::default(),
                x_coarse: Vec::new(),
                x_fine: Vec::new(),
            },
            |b, p| {
                let stream = PathStream::new(config.seed, fine.steps(), p);
                fine.sample_into(&stream, &mut b.g_fine, &mut b.scratch);
                let g_coarse = b
                    .g_fine
                    .coarsen(coarse.grid())
                    .expect("ladder grids are dyadic by construction");
                simulate_into(
                    &config.model,
                    &config.init,
                    fine,
                    &b.g_fine,
                    &mut b.ws,
                    &mut b.x_fine,
                );
                simulate_into(
                    &config.model,
                    &config.init,
                    coarse,
                    &g_coarse,
                    &mut b.ws,
                    &mut b.x_coarse,
                );
                (1..=n)
                    .map(|k| {
                        let d = b.x_coarse[k] - b.x_fine[2 * k];
                        d * d
                    })
                    .collect()
            },
        )
        .collect()
}

fn mean_and_stderr(samples: impl ExactSizeIterator<Item = f64> + Clone) -> (f64, f64) {
    let m = samples.len() as f64;
    let mean = samples.clone().sum::<f64>() / m;
    let var = samples.map(|y| (y - mean) * (y - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

fn rate_point(n: usize, sq: &[Vec<f64>]) -> RatePoint {
    let paths = sq.len() as f64;
    let mut ms = vec![0.0; n];
    for row in sq {
        for (acc, d2) in ms.iter_mut().zip(row) {
            *acc += d2;
        }
    }
    for v in &mut ms {
        *v /= paths;
    }
    let mean_error = ms.iter().map(|m| m.sqrt()).sum::<f64>() / n as f64;
    // delta method: d(mean_error)/d(m_k) = 1 / (2 n sqrt(m_k))
    let grad: Vec<f64> = ms
        .iter()
        .map(|&m| {
            if m > 0.0 {
                1.0 / (2.0 * n as f64 * m.sqrt())
            } else {
                0.0
            }
        })
        .collect();
    let (_, mean_stderr) = mean_and_stderr(
        sq.iter()
            .map(|row| row.iter().zip(&grad).map(|(d2, g)| d2 * g).sum::<f64>()),
    );
    let (end_ms, end_ms_se) = mean_and_stderr(sq.iter().map(|row| row[n - 1]));
    let end_error = end_ms.sqrt();
    let end_stderr = if end_error > 0.0 {
        end_ms_se / (2.0 * end_error)
    } else {
        0.0
    };
    RatePoint {
        n,
        mean_error,
        mean_stderr,
        end_error,
        end_stderr,
    }
}

pub fn run_rate_study(config: &RateConfig) -> Result<RateReport> {
    run_rate_study_with(config, |_| Ok(()))
}

/// Like [`run_rate_study`], calling `on_point` after every ladder entry so
/// callers can persist partial results.
pub fn run_rate_study_with<F>(config: &RateConfig, mut on_point: F) -> Result<RateReport>
where
    F: FnMut(&RatePoint) -> Result<()>,
{
    config.validate()?;
    let mut points = Vec::with_capacity(config.n_ladder.len());
    let mut cache: Option<DriverMatrices> = None;
    for &n in &config.n_ladder {
        let coarse_grid = TimeGrid::new(config.horizon, n)?;
        let coarse = match cache.take() {
            Some(m) if m.steps() == n => m,
            _ => DriverMatrices::assemble(&config.kernel, &config.kernel, &coarse_grid)?,
        };
        let fine =
            DriverMatrices::assemble(&config.kernel, &config.kernel, &coarse_grid.refined())?;
        let sq = squared_differences(config, &coarse, &fine);
        let point = rate_point(n, &sq);
        on_point(&point)?;
        points.push(point);
        cache = Some(fine);
    }
    Ok(finish(config, points))
}

fn finish(config: &RateConfig, points: Vec<RatePoint>) -> RateReport {
    let mut flags = Vec::new();
    let zero = points
        .iter()
        .any(|p| p.mean_error == 0.0 || p.end_error == 0.0);
    if zero {
        flags.push("degenerate: zero error".to_string());
    }
    for w in points.windows(2) {
        if w[1].mean_error > w[0].mean_error {
            flags.push(format!(
                "inversion: mean error rises from n = {} to n = {}",
                w[0].n, w[1].n
            ));
        }
        if w[1].end_error > w[0].end_error {
            flags.push(format!(
                "inversion: endpoint error rises from n = {} to n = {}",
                w[0].n, w[1].n
            ));
        }
    }
    let fit = |f: fn(&RatePoint) -> f64| -> Option<LoglogFit> {
        let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.n as f64, f(p))).collect();
        fit_loglog(&pts).ok()
    };
    let (fit_mean, fit_end) = if zero {
        (None, None)
    } else {
        (fit(|p| p.mean_error), fit(|p| p.end_error))
    };
    RateReport {
        fit_mean,
        fit_end,
        reference_slope: config.kernel.alpha().map(|a| a - 0.5),
        flags,
        seed: config.seed,
        mc_paths: config.mc_paths,
        horizon: config.horizon,
        points,
    }
}
