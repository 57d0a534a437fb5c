//! Regularized covariance of the `r`-component free field and its sampler.
//!
//! The covariance of `(X_1, …, X_r)` on the grid is `A ⊗ K` with `K` the
//! regularized, mean-zero projected Green matrix. Samples are
//! `L_A · Z · L_K` with symmetric square roots.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{green_round, GeneralKernel, SphereGrid, ROUND_GREEN_CONSTANT};
use crate::lie::{AlgebraData, CartanVector};
use crate::rng;
use crate::stats::neumaier_sum;

/// Replicas are generated in batches of this size, whatever the worker
/// count, so floating-point results do not depend on scheduling.
pub const BATCH: usize = 64;

/// Fraction of the trace above which clipping is flagged.
pub const CLIP_WARNING: f64 = 0.05;

/// Diagnostics recorded with every model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceMetadata {
    pub grid_n: usize,
    pub epsilon: f64,
    pub theta_eta: f64,
    pub kernel: String,
    pub clipped_fraction: f64,
    pub min_eigenvalue_ratio: f64,
    pub nearest_neighbor_scale: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
enum KernelKind {
    Round,
    General(Arc<GeneralKernel>),
}

/// Covariance `A ⊗ K` of the field on a grid.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    grid: SphereGrid,
    algebra: AlgebraData,
    kernel: KernelKind,
    spatial: DMatrix<f64>,
    sqrt_spatial: DMatrix<f64>,
    sqrt_cartan: Vec<f64>,
    metadata: CovarianceMetadata,
    pre_clip_diagonal: Vec<f64>,
}

/// Default regularization for an `n`-node grid: `e^{−1/4}/√n`.
///
/// This is a plane length at the origin. The resulting diagonal equals the
/// average of the kernel over an equal-area cell.
pub fn default_epsilon(n: usize) -> f64 {
    (-0.25f64).exp() / (n as f64).sqrt()
}

/// `θ_η`, the mollifier constant in the diagonal.
pub const THETA_ETA: f64 = ROUND_GREEN_CONSTANT;

/// Diagonal `−ln ε_x − ½ ln ĝ(x) + θ_η` with the chart length transported
/// as `ε_x = ε(1+|x|²)`; constant over the sphere and equal to
/// `−ln(2ε) + θ_η`.
pub fn round_diagonal(epsilon: f64) -> f64 {
    -(2.0 * epsilon).ln() + THETA_ETA
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Epsilon(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    Ok(())
}

/// Round-metric model: off-diagonal `green_round(x_m, x_n)`, diagonal
/// [`round_diagonal`], projected to mean zero and clipped to PSD.
pub fn build_covariance(grid: &SphereGrid, algebra: &AlgebraData, epsilon: Option<f64>) -> Result<CovarianceModel> {
    let n = grid.len();
    let eps = epsilon.unwrap_or_else(|| default_epsilon(n));
    check_epsilon(eps)?;
    let pts = grid.points();
    let diag = round_diagonal(eps);
    let mut c = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            c[(i, j)] = if i == j { diag } else { crate::geometry::green_round_unchecked(pts[i], pts[j]) };
        }
    }
    assemble(grid, algebra, eps, KernelKind::Round, c, grid.cell_volume())
}

/// Model for the metric `e^φ ĝ`: off-diagonal `G_g`, diagonal shifted by the
/// difference of regular parts, projected to `v_g`-mean zero.
pub fn build_general_covariance(
    grid: &SphereGrid,
    algebra: &AlgebraData,
    epsilon: Option<f64>,
    kernel: GeneralKernel,
) -> Result<CovarianceModel> {
    let n = grid.len();
    if kernel.weights().len() != n {
        return Err(Error::Dimension("kernel was built on a different grid".into()));
    }
    let eps = epsilon.unwrap_or_else(|| default_epsilon(n));
    check_epsilon(eps)?;
    let pts = grid.points();
    let diag = round_diagonal(eps);
    let mut c = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            c[(i, j)] = if i == j {
                diag + kernel.node_regular_part(i) - crate::geometry::round_regular_part(pts[i])
            } else {
                kernel.node_green(i, j)
            };
        }
    }
    let w = kernel.weights().to_vec();
    assemble(grid, algebra, eps, KernelKind::General(Arc::new(kernel)), c, &w)
}

/// `P C Pᵀ` with `P = I − 𝟙wᵀ/Σw`.
fn project(c: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let n = c.nrows();
    let total = neumaier_sum(w.iter().copied());
    let u: Vec<f64> = w.iter().map(|x| x / total).collect();
    // (P C)_{ij} = C_ij − Σ_k u_k C_kj
    let mut col_mean = vec![0.0; n];
    for j in 0..n {
        col_mean[j] = (0..n).map(|k| u[k] * c[(k, j)]).sum();
    }
    let mut pc = c.clone();
    for j in 0..n {
        for i in 0..n {
            pc[(i, j)] -= col_mean[j];
        }
    }
    // (P C Pᵀ)_{ij} = (PC)_ij − Σ_k (PC)_ik u_k
    let mut row_mean = vec![0.0; n];
    for i in 0..n {
        row_mean[i] = (0..n).map(|k| pc[(i, k)] * u[k]).sum();
    }
    for j in 0..n {
        for i in 0..n {
            pc[(i, j)] -= row_mean[i];
        }
    }
    // Symmetrize against rounding.
    for j in 0..n {
        for i in 0..j {
            let m = 0.5 * (pc[(i, j)] + pc[(j, i)]);
            pc[(i, j)] = m;
            pc[(j, i)] = m;
        }
    }
    pc
}

fn assemble(
    grid: &SphereGrid,
    algebra: &AlgebraData,
    eps: f64,
    kernel: KernelKind,
    c: DMatrix<f64>,
    weights: &[f64],
) -> Result<CovarianceModel> {
    let n = grid.len();
    let pre_clip_diagonal: Vec<f64> = (0..n).map(|i| c[(i, i)]).collect();
    let projected = project(&c, weights);
    let eig = SymmetricEigen::new(projected);
    let lmax = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let pos: f64 = eig.eigenvalues.iter().filter(|&&l| l > 0.0).sum();
    let neg: f64 = -eig.eigenvalues.iter().filter(|&&l| l < 0.0).sum::<f64>();
    let clipped_fraction = if pos > 0.0 { neg / pos } else { 1.0 };
    // Eigenvalues at rounding level (the projected-out direction) are zeroed.
    let floor = 1e-12 * lmax.abs();
    let kept: Vec<f64> = eig.eigenvalues.iter().map(|&l| if l > floor { l } else { 0.0 }).collect();
    let v = &eig.eigenvectors;
    let mut vs = v.clone();
    let mut vl = v.clone();
    for (j, &l) in kept.iter().enumerate() {
        let s = l.sqrt();
        for i in 0..n {
            vs[(i, j)] *= s;
            vl[(i, j)] *= l;
        }
    }
    // Left projection keeps the law and makes the v-weighted mean of every
    // sample vanish to rounding.
    let sqrt_spatial = project_left(symmetrize(&vs * v.transpose()), weights);
    let spatial = symmetrize(&vl * v.transpose());

    let r = algebra.rank();
    let a = DMatrix::from_fn(r, r, |i, j| algebra.a(i, j));
    let ae = SymmetricEigen::new(a);
    let mut sq = ae.eigenvectors.clone();
    for (j, &l) in ae.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        for i in 0..r {
            sq[(i, j)] *= s;
        }
    }
    let sqrt_a = &sq * ae.eigenvectors.transpose();
    let sqrt_cartan: Vec<f64> = (0..r * r).map(|k| sqrt_a[(k / r, k % r)]).collect();

    let mut warnings = Vec::new();
    if clipped_fraction > CLIP_WARNING {
        warnings.push(format!(
            "eigenvalue clipping removed {:.2}% of the trace; the grid is under-resolved for this epsilon",
            100.0 * clipped_fraction
        ));
    }
    let min_eigenvalue_ratio = lmin / lmax;
    if min_eigenvalue_ratio < -1e-10 {
        warnings.push(format!("smallest eigenvalue before clipping is {min_eigenvalue_ratio:.3e} of the largest"));
    }
    let kernel_name = match &kernel {
        KernelKind::Round => "round".to_string(),
        KernelKind::General(_) => "general".to_string(),
    };
    Ok(CovarianceModel {
        metadata: CovarianceMetadata {
            grid_n: n,
            epsilon: eps,
            theta_eta: THETA_ETA,
            kernel: kernel_name,
            clipped_fraction,
            min_eigenvalue_ratio,
            nearest_neighbor_scale: 0.5 * grid.mean_nearest_neighbor(),
            warnings,
        },
        grid: grid.clone(),
        algebra: algebra.clone(),
        kernel,
        spatial,
        sqrt_spatial,
        sqrt_cartan,
        pre_clip_diagonal,
    })
}

fn project_left(mut m: DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let total = neumaier_sum(w.iter().copied());
    for j in 0..m.ncols() {
        let mean = neumaier_sum((0..m.nrows()).map(|k| w[k] * m[(k, j)])) / total;
        for i in 0..m.nrows() {
            m[(i, j)] -= mean;
        }
    }
    m
}

fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let a = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = a;
            m[(j, i)] = a;
        }
    }
    m
}

impl CovarianceModel {
    pub fn grid(&self) -> &SphereGrid {
        &self.grid
    }

    pub fn algebra(&self) -> &AlgebraData {
        &self.algebra
    }

    pub fn rank(&self) -> usize {
        self.algebra.rank()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn epsilon(&self) -> f64 {
        self.metadata.epsilon
    }

    pub fn theta_eta(&self) -> f64 {
        self.metadata.theta_eta
    }

    pub fn metadata(&self) -> &CovarianceMetadata {
        &self.metadata
    }

    /// The spatial factor `K` after projection and clipping.
    pub fn spatial_factor(&self) -> &DMatrix<f64> {
        &self.spatial
    }

    pub fn sqrt_spatial(&self) -> &DMatrix<f64> {
        &self.sqrt_spatial
    }

    /// Symmetric square root of `A`, row-major.
    pub fn sqrt_cartan(&self) -> &[f64] {
        &self.sqrt_cartan
    }

    /// Diagonal of `K` before projection.
    pub fn pre_projection_diagonal(&self) -> &[f64] {
        &self.pre_clip_diagonal
    }

    pub fn variance(&self, n: usize) -> f64 {
        self.spatial[(n, n)]
    }

    /// `E[X_i(x_m) X_j(x_n)] = A_ij K_mn`.
    pub fn covariance(&self, i: usize, m: usize, j: usize, n: usize) -> f64 {
        self.algebra.a(i, j) * self.spatial[(m, n)]
    }

    /// Cell weights that the projection makes the field mean-zero against.
    pub fn volume_weights(&self) -> Vec<f64> {
        match &self.kernel {
            KernelKind::Round => self.grid.cell_volume().to_vec(),
            KernelKind::General(k) => k.weights().to_vec(),
        }
    }

    pub fn general_kernel(&self) -> Option<&GeneralKernel> {
        match &self.kernel {
            KernelKind::Round => None,
            KernelKind::General(k) => Some(k),
        }
    }

    /// The model's Green kernel between every node and an off-grid point.
    pub fn green_column(&self, z: Complex64) -> Result<Vec<f64>> {
        match &self.kernel {
            KernelKind::Round => self.grid.points().iter().map(|&x| green_round(x, z)).collect(),
            KernelKind::General(k) => {
                let mz = k.mean_log(z);
                Ok((0..self.len()).map(|n| k.node_point_green(n, z, mz)).collect())
            }
        }
    }

    /// Green kernel between two off-grid points.
    pub fn green_between(&self, x: Complex64, y: Complex64) -> Result<f64> {
        match &self.kernel {
            KernelKind::Round => green_round(x, y),
            KernelKind::General(k) => k.green(x, y),
        }
    }
}

/// One realization of the field: `values[i·N + n]` is `X_i(x_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub values: Vec<f64>,
    pub rank: usize,
    pub n: usize,
    pub seed: u64,
    pub replica_index: u64,
}

impl FieldSample {
    pub fn component(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// Draws replica `replica_index` of the stream `seed`.
pub fn sample(model: &CovarianceModel, seed: u64, replica_index: u64) -> FieldSample {
    let (r, n) = (model.rank(), model.len());
    let mut z = vec![0.0; r * n];
    rng::fill_normals(seed, replica_index, &mut z);
    let zm = DMatrix::from_column_slice(n, r, &z);
    let y = &model.sqrt_spatial * zm;
    FieldSample { values: mix(model, y.as_slice(), r, n), rank: r, n, seed, replica_index }
}

/// `values_i = Σ_j (L_A)_ij y_j` for one replica, `y` column-major `n × r`.
fn mix(model: &CovarianceModel, y: &[f64], r: usize, n: usize) -> Vec<f64> {
    let la = model.sqrt_cartan();
    let mut out = vec![0.0; r * n];
    for i in 0..r {
        let dst = &mut out[i * n..(i + 1) * n];
        for j in 0..r {
            let c = la[i * r + j];
            if c == 0.0 {
                continue;
            }
            for (d, s) in dst.iter_mut().zip(&y[j * n..(j + 1) * n]) {
                *d += c * s;
            }
        }
    }
    out
}

/// Monte Carlo budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct McConfig {
    pub replicas: usize,
    pub seed: u64,
    pub workers: usize,
}

impl McConfig {
    pub fn new(replicas: usize, seed: u64) -> Self {
        McConfig { replicas, seed, workers: 1 }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

/// Runs `f` on a pool of `workers` threads (0 means all available).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 1 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
    pool.install(f)
}

/// Evaluates `f(replica_index, values)` for every replica and returns the
/// results in replica order.
///
/// Samples are produced in fixed batches of [`BATCH`] replicas through one
/// matrix product each, so results do not depend on `mc.workers`.
pub fn map_replicas<T, F>(model: &CovarianceModel, mc: &McConfig, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &[f64]) -> T + Sync,
{
    let (r, n) = (model.rank(), model.len());
    let batches = mc.replicas.div_ceil(BATCH);
    let run = || {
        (0..batches)
            .into_par_iter()
            .map(|b| {
                let start = b * BATCH;
                let count = BATCH.min(mc.replicas - start);
                let mut z = vec![0.0; n * r * count];
                for k in 0..count {
                    rng::fill_normals(mc.seed, (start + k) as u64, &mut z[k * r * n..(k + 1) * r * n]);
                }
                let zm = DMatrix::from_vec(n, r * count, z);
                let y = &model.sqrt_spatial * zm;
                let ys = y.as_slice();
                (0..count)
                    .map(|k| {
                        let vals = mix(model, &ys[k * r * n..(k + 1) * r * n], r, n);
                        f((start + k) as u64, &vals)
                    })
                    .collect::<Vec<T>>()
            })
            .collect::<Vec<Vec<T>>>()
    };
    with_workers(mc.workers, run).into_iter().flatten().collect()
}

/// Deterministic `r × N` field `n ↦ ⟨α, e_i⟩ G(x_n, z)` that reproduces the
/// law tilted by `e^{⟨α, X(z)⟩ − ½ Var}` when added to samples.
pub fn pair_with_girsanov_shift(model: &CovarianceModel, weight: &CartanVector, at: Complex64) -> Result<Vec<f64>> {
    model.algebra.check(weight)?;
    model.grid.check_proximity(&[at])?;
    let (r, n) = (model.rank(), model.len());
    let pairing = weight.coords_f64_weight(&model.algebra);
    let col = model.green_column(at)?;
    let mut out = vec![0.0; r * n];
    for i in 0..r {
        for k in 0..n {
            out[i * n + k] = pairing[i] * col[k];
        }
    }
    Ok(out)
}
