//! Drift weights and the joint Gaussian law of the one-step stochastic
//! integrals `I(k, l) = int_{t_{l-1}}^{t_l} K(t_k, s) dW_s` together with the
//! Brownian increments.
//!
//! For a convolutive kernel on a uniform grid, column family `l`
//! `(I(l, l), ..., I(n, l), dW_l)` has a law that depends on `l` only through
//! its length: `I(k, l)` sees lag offset `k - l` inside the step. The joint
//! covariance is therefore stored once, ordered as
//!
//! ```text
//! index 0      : dW over one step
//! index m >= 1 : I at lag offset m - 1
//! ```
//!
//! and the covariance of family `l` is its leading `n - l + 2` block. Leading
//! blocks of a lower triangular factor are factors of the leading submatrices,
//! so one factorization serves all families.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernels::KernelSpec;
use crate::linalg::{tdt_decompose, SquareMatrix, TdtFactor};
use crate::rng::PathStream;

#[derive(Debug, Clone)]
pub struct DriverMatrices {
    grid: TimeGrid,
    /// `drift_weights[m]` is the drift weight at lag offset `m`, so that
    /// `lambda(k, l) = drift_weights[k - l]`.
    drift_weights: Vec<f64>,
    cov: SquareMatrix,
    factor: TdtFactor,
    /// Pivot columns with `D > 0`, ascending.
    active: Vec<usize>,
    /// `T[:, active] * sqrt(D[active])`, row-major `(n + 1) x active.len()`.
    loadings: Vec<f64>,
}

impl DriverMatrices {
    /// Builds the drift weights from `drift_kernel` and the Gaussian covariance
    /// from `diffusion_kernel`, then factorizes the covariance.
    pub fn assemble(
        drift_kernel: &KernelSpec,
        diffusion_kernel: &KernelSpec,
        grid: &TimeGrid,
    ) -> Result<Self> {
        let n = grid.steps();
        let h = grid.step_size();
        let drift_weights = (0..n)
            .map(|m| drift_kernel.lag_integral(m, h))
            .collect::<Result<Vec<_>>>()?;

        let mut cov = SquareMatrix::zeros(n + 1);
        cov[(0, 0)] = h;
        for a in 0..n {
            let c = diffusion_kernel.lag_integral(a, h)?;
            cov[(0, a + 1)] = c;
            cov[(a + 1, 0)] = c;
            for b in a..n {
                let v = diffusion_kernel.lag_product_integral(a, b, h)?;
                cov[(a + 1, b + 1)] = v;
                cov[(b + 1, a + 1)] = v;
            }
        }
        Self::from_parts(*grid, drift_weights, cov)
    }

    fn from_parts(grid: TimeGrid, drift_weights: Vec<f64>, cov: SquareMatrix) -> Result<Self> {
        let factor = tdt_decompose(&cov)?;
        let active = factor.active_pivots();
        let r = active.len();
        let mut loadings = vec![0.0; cov.dim() * r];
        for i in 0..cov.dim() {
            for (a, &j) in active.iter().enumerate() {
                loadings[i * r + a] = factor.t[(i, j)] * factor.d[j].sqrt();
            }
        }
        Ok(Self {
            grid,
            drift_weights,
            cov,
            factor,
            active,
            loadings,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    /// `Lambda[k][l]` for `1 <= k, l <= n`; zero above the diagonal.
    pub fn lambda(&self, k: usize, l: usize) -> f64 {
        debug_assert!(k >= 1 && l >= 1 && k <= self.steps() && l <= self.steps());
        if l > k {
            0.0
        } else {
            self.drift_weights[k - l]
        }
    }

    pub fn drift_weights(&self) -> &[f64] {
        &self.drift_weights
    }

    /// Dense `n x n` drift weight matrix, row `k - 1`, column `l - 1`.
    pub fn lambda_matrix(&self) -> SquareMatrix {
        let n = self.steps();
        let mut m = SquareMatrix::zeros(n);
        for k in 1..=n {
            for l in 1..=k {
                m[(k - 1, l - 1)] = self.lambda(k, l);
            }
        }
        m
    }

    /// Joint covariance in the `(dW, lag 0, ..., lag n-1)` ordering.
    pub fn cov(&self) -> &SquareMatrix {
        &self.cov
    }

    pub fn factor(&self) -> &TdtFactor {
        &self.factor
    }

    pub fn chol_t(&self) -> &SquareMatrix {
        &self.factor.t
    }

    pub fn chol_d(&self) -> &[f64] {
        &self.factor.d
    }

    /// Number of strictly positive pivots.
    pub fn rank(&self) -> usize {
        self.active.len()
    }

    fn family_len(&self, l: usize) -> usize {
        self.steps() - l + 2
    }

    /// Covariance of family `l` in internal order `(dW_l, I(l, l), ..., I(n, l))`.
    pub fn family_cov(&self, l: usize) -> Result<SquareMatrix> {
        self.check_family(l)?;
        Ok(self.cov.leading(self.family_len(l)))
    }

    /// Covariance of family `l` in its natural order `(I(l, l), ..., I(n, l), dW_l)`.
    pub fn family_cov_natural(&self, l: usize) -> Result<SquareMatrix> {
        let inner = self.family_cov(l)?;
        let m = inner.dim();
        let pos = |q: usize| if q == m - 1 { 0 } else { q + 1 };
        let mut out = SquareMatrix::zeros(m);
        for p in 0..m {
            for q in 0..m {
                out[(p, q)] = inner[(pos(p), pos(q))];
            }
        }
        Ok(out)
    }

    fn check_family(&self, l: usize) -> Result<()> {
        if l == 0 || l > self.steps() {
            return Err(Error::invalid(format!(
                "column family must lie in 1..={}, got {l}",
                self.steps()
            )));
        }
        Ok(())
    }

    /// Writes `L z` for the leading `len` rows of the factor into `out`,
    /// drawing one normal per active pivot inside the block.
    fn draw_block(
        &self,
        len: usize,
        stream: &PathStream,
        column: usize,
        z: &mut Vec<f64>,
        out: &mut [f64],
    ) {
        let r = self.active.len();
        let used = self.active.partition_point(|&j| j < len);
        z.clear();
        let mut col = stream.column(column);
        z.extend((0..used).map(|_| col.normal()));
        let mut reach = 0;
        for (i, o) in out.iter_mut().enumerate().take(len) {
            while reach < used && self.active[reach] <= i {
                reach += 1;
            }
            let row = &self.loadings[i * r..i * r + reach];
            *o = row.iter().zip(&z[..reach]).map(|(a, b)| a * b).sum();
        }
    }

    /// `L z` for family `l` given the full normal vector `z` of length
    /// `n - l + 2`, returned in natural order `(I(l, l), ..., I(n, l), dW_l)`.
    pub fn column_from_normals(&self, l: usize, z: &[f64]) -> Result<Vec<f64>> {
        self.check_family(l)?;
        let len = self.family_len(l);
        if z.len() != len {
            return Err(Error::invalid(format!(
                "family {l} needs {len} normals, got {}",
                z.len()
            )));
        }
        let t = &self.factor.t;
        let d = &self.factor.d;
        let inner: Vec<f64> = (0..len)
            .map(|i| (0..=i).map(|j| t[(i, j)] * d[j].sqrt() * z[j]).sum())
            .collect();
        let mut out = inner[1..].to_vec();
        out.push(inner[0]);
        Ok(out)
    }

    /// One draw of family `l`: `(I(l, l), ..., I(n, l), dW_l)`.
    pub fn sample_column(&self, l: usize, stream: &PathStream) -> Result<Vec<f64>> {
        self.check_family(l)?;
        let len = self.family_len(l);
        let mut inner = vec![0.0; len];
        self.draw_block(len, stream, l, &mut Vec::new(), &mut inner);
        let mut out = Vec::with_capacity(len);
        out.extend_from_slice(&inner[1..]);
        out.push(inner[0]);
        Ok(out)
    }

    /// Draws every column family into a full sample.
    pub fn sample(&self, stream: &PathStream) -> GaussianSample {
        let mut sample = GaussianSample::zeros(self.grid, DriverTag::drawn(stream));
        self.sample_into(stream, &mut sample, &mut SampleScratch::default());
        sample
    }

    /// Allocation-free variant of [`sample`](Self::sample) for hot loops.
    pub fn sample_into(
        &self,
        stream: &PathStream,
        out: &mut GaussianSample,
        scratch: &mut SampleScratch,
    ) {
        let n = self.steps();
        out.reset(self.grid, DriverTag::drawn(stream));
        scratch.block.resize(n + 1, 0.0);
        for l in 1..=n {
            let len = self.family_len(l);
            self.draw_block(len, stream, l, &mut scratch.normals, &mut scratch.block);
            out.set_increment(l, scratch.block[0]);
            for q in 1..len {
                out.set_integral(l + q - 1, l, scratch.block[q]);
            }
        }
    }
}

#[derive(Debug, Default)]
pub struct SampleScratch {
    normals: Vec<f64>,
    block: Vec<f64>,
}

/// Provenance of a Gaussian sample, for coupling audits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DriverTag {
    pub seed: u64,
    /// Step count of the grid the normals were drawn on.
    pub drawn_steps: usize,
    pub path: u64,
    /// Number of pairwise coarsenings applied since drawing.
    pub coarsenings: u32,
}

impl DriverTag {
    fn drawn(stream: &PathStream) -> Self {
        Self {
            seed: stream.seed(),
            drawn_steps: stream.steps(),
            path: stream.path(),
            coarsenings: 0,
        }
    }
}

/// The `(n + 1) x n` matrix of one-step stochastic integrals; row `n + 1`
/// holds the Brownian increments.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSample {
    grid: TimeGrid,
    /// Row-major `(n + 1) x n`.
    data: Vec<f64>,
    tag: DriverTag,
}

impl GaussianSample {
    pub fn zeros(grid: TimeGrid, tag: DriverTag) -> Self {
        let n = grid.steps();
        Self {
            grid,
            data: vec![0.0; (n + 1) * n],
            tag,
        }
    }

    fn reset(&mut self, grid: TimeGrid, tag: DriverTag) {
        let n = grid.steps();
        self.grid = grid;
        self.tag = tag;
        self.data.clear();
        self.data.resize((n + 1) * n, 0.0);
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn tag(&self) -> DriverTag {
        self.tag
    }

    /// Entry `(k, l)` of the matrix, `1 <= k <= n + 1`, `1 <= l <= n`.
    pub fn get(&self, k: usize, l: usize) -> f64 {
        let n = self.steps();
        self.data[(k - 1) * n + (l - 1)]
    }

    /// `I(k, l)`; zero for `l > k`.
    pub fn integral(&self, k: usize, l: usize) -> f64 {
        debug_assert!(k >= 1 && k <= self.steps());
        self.get(k, l)
    }

    pub fn increment(&self, l: usize) -> f64 {
        self.get(self.steps() + 1, l)
    }

    /// Row `k` (1-based): `I(k, 1..=n)`, or the increments for `k = n + 1`.
    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.steps();
        &self.data[(k - 1) * n..k * n]
    }

    pub fn increments(&self) -> &[f64] {
        self.row(self.steps() + 1)
    }

    pub fn set_integral(&mut self, k: usize, l: usize, v: f64) {
        let n = self.steps();
        debug_assert!(l <= k && k <= n);
        self.data[(k - 1) * n + (l - 1)] = v;
    }

    pub fn set_increment(&mut self, l: usize, v: f64) {
        let n = self.steps();
        self.data[n * n + (l - 1)] = v;
    }

    /// Mutable access to `I(k, l)` regardless of the structural support;
    /// used to check that the scheme ignores entries above the diagonal.
    pub fn raw_mut(&mut self, k: usize, l: usize) -> &mut f64 {
        let n = self.steps();
        &mut self.data[(k - 1) * n + (l - 1)]
    }

    /// Exact restriction of a sample on a `2n`-step grid to the `n`-step
    /// grid over the same horizon.
    ///
    /// Coarse node `t_k` is fine node `2k`, and coarse step `l` is the union
    /// of fine steps `2l - 1` and `2l`, so each coarse integral is the sum of
    /// two fine integrals evaluated at the same kernel time.
    pub fn coarsen(&self, coarse: &TimeGrid) -> Result<GaussianSample> {
        let fine_n = self.steps();
        if coarse.steps() * 2 != fine_n {
            return Err(Error::invalid(format!(
                "cannot coarsen {fine_n} steps onto {} steps",
                coarse.steps()
            )));
        }
        if coarse.horizon() != self.grid.horizon() {
            return Err(Error::invalid(format!(
                "horizon mismatch: fine {} vs coarse {}",
                self.grid.horizon(),
                coarse.horizon()
            )));
        }
        let n = coarse.steps();
        let mut tag = self.tag;
        tag.coarsenings += 1;
        let mut out = GaussianSample::zeros(*coarse, tag);
        for k in 1..=n {
            let fine_row = self.row(2 * k);
            for l in 1..=k {
                out.set_integral(k, l, fine_row[2 * l - 2] + fine_row[2 * l - 1]);
            }
        }
        let inc = self.increments();
        for l in 1..=n {
            out.set_increment(l, inc[2 * l - 2] + inc[2 * l - 1]);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma;

    #[test]
    fn markovian_two_steps_is_rank_one() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let k = KernelSpec::markovian();
        let m = DriverMatrices::assemble(&k, &k, &g).unwrap();
        assert!(m.cov().rows().all(|r| r.iter().all(|v| *v == 0.5)));
        assert_eq!(m.chol_d(), &[0.5, 0.0, 0.0]);
        assert_eq!(m.rank(), 1);
    }

    #[test]
    fn fractional_single_step() {
        let g = TimeGrid::new(1.0, 1).unwrap();
        let k = KernelSpec::fractional(1.2).unwrap();
        let m = DriverMatrices::assemble(&k, &k, &g).unwrap();
        let c = m.cov();
        // 40-digit references for 1/(1.4 Gamma(1.2)^2) and 1/Gamma(2.2)
        assert_eq!(c[(0, 0)], 1.0);
        assert!((c[(1, 1)] - 0.84728000324689731142).abs() < 1e-14);
        assert!((c[(0, 1)] - 0.90760368421528025653).abs() < 1e-14);
        assert_eq!(c[(0, 1)], c[(1, 0)]);
        assert!((m.lambda(1, 1) - 1.0 / gamma(2.2)).abs() < 1e-14);
    }

    #[test]
    fn lambda_is_lower_triangular() {
        let g = TimeGrid::new(1.0, 5).unwrap();
        let k = KernelSpec::fractional(0.7).unwrap();
        let m = DriverMatrices::assemble(&k, &k, &g).unwrap();
        let lam = m.lambda_matrix();
        for i in 0..5 {
            for j in 0..5 {
                if j > i {
                    assert_eq!(lam[(i, j)], 0.0);
                } else {
                    assert!(lam[(i, j)] > 0.0);
                    assert_eq!(lam[(i, j)], k.drift_weight(&g, i + 1, j + 1).unwrap());
                }
            }
        }
    }

    #[test]
    fn markovian_single_step_column_duplicates() {
        let g = TimeGrid::new(1.0, 1).unwrap();
        let k = KernelSpec::markovian();
        let m = DriverMatrices::assemble(&k, &k, &g).unwrap();
        let col = m.sample_column(1, &PathStream::new(3, 1, 0)).unwrap();
        assert_eq!(col.len(), 2);
        assert_eq!(col[0], col[1]);
        let s = m.sample(&PathStream::new(3, 1, 0));
        assert_eq!(s.integral(1, 1), s.increment(1));
    }

    #[test]
    fn structural_zeros_and_determinism() {
        let g = TimeGrid::new(1.0, 6).unwrap();
        let k = KernelSpec::fractional(0.8).unwrap();
        let m = DriverMatrices::assemble(&k, &k, &g).unwrap();
        let a = m.sample(&PathStream::new(11, 6, 5));
        let b = m.sample(&PathStream::new(11, 6, 5));
        assert_eq!(a, b);
        for kk in 1..=6 {
            for l in kk + 1..=6 {
                assert_eq!(a.integral(kk, l), 0.0);
            }
        }
        // the column matches the corresponding sample column
        let col = m.sample_column(3, &PathStream::new(11, 6, 5)).unwrap();
        assert_eq!(col.len(), 5);
        for (q, v) in col[..4].iter().enumerate() {
            assert_eq!(*v, a.integral(3 + q, 3));
        }
        assert_eq!(col[4], a.increment(3));
    }

    #[test]
    fn coarsen_sums_pairs() {
        let fine = TimeGrid::new(1.0, 8).unwrap();
        let coarse = TimeGrid::new(1.0, 4).unwrap();
        let k = KernelSpec::fractional(0.75).unwrap();
        let m = DriverMatrices::assemble(&k, &k, &fine).unwrap();
        let s = m.sample(&PathStream::new(1, 8, 0));
        let c = s.coarsen(&coarse).unwrap();
        for l in 1..=4 {
            assert_eq!(c.increment(l), s.increment(2 * l - 1) + s.increment(2 * l));
        }
        assert_eq!(c.integral(3, 2), s.integral(6, 3) + s.integral(6, 4));
        assert_eq!(c.tag().coarsenings, 1);
        assert_eq!(c.tag().drawn_steps, 8);
    }

    #[test]
    fn markovian_coarse_integrals_are_increments() {
        let fine = TimeGrid::new(1.0, 8).unwrap();
        let k = KernelSpec::markovian();
        let m = DriverMatrices::assemble(&k, &k, &fine).unwrap();
        let c = m
            .sample(&PathStream::new(2, 8, 9))
            .coarsen(&TimeGrid::new(1.0, 4).unwrap())
            .unwrap();
        for kk in 1..=4 {
            for l in 1..=kk {
                assert_eq!(c.integral(kk, l), c.increment(l));
            }
        }
    }

    #[test]
    fn coarsen_rejects_mismatch() {
        let fine = TimeGrid::new(1.0, 6).unwrap();
        let k = KernelSpec::markovian();
        let s = DriverMatrices::assemble(&k, &k, &fine)
            .unwrap()
            .sample(&PathStream::new(0, 6, 0));
        assert!(s.coarsen(&TimeGrid::new(1.0, 4).unwrap()).is_err());
        assert!(s.coarsen(&TimeGrid::new(2.0, 3).unwrap()).is_err());
        assert!(s.coarsen(&TimeGrid::new(1.0, 3).unwrap()).is_ok());
    }

    #[test]
    fn zero_normals_give_zero_column() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let k = KernelSpec::fractional(0.9).unwrap();
        let m = DriverMatrices::assemble(&k, &k, &g).unwrap();
        assert_eq!(m.column_from_normals(2, &[0.0; 4]).unwrap(), vec![0.0; 4]);
        assert!(m.column_from_normals(2, &[0.0; 3]).is_err());
    }

    #[test]
    fn family_index_checks() {
        let g = TimeGrid::new(1.0, 3).unwrap();
        let k = KernelSpec::markovian();
        let m = DriverMatrices::assemble(&k, &k, &g).unwrap();
        assert!(m.family_cov(0).is_err());
        assert!(m.family_cov(4).is_err());
        assert_eq!(m.family_cov(3).unwrap().dim(), 2);
        assert!(m.sample_column(0, &PathStream::new(0, 3, 0)).is_err());
    }
}
