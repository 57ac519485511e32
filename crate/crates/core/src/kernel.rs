//! Gaussian similarity matrix, bandwidth estimate and spectral decomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, SquaredDistances};
use crate::error::{config_err, Error, Result};

/// Bandwidth of the Gaussian kernel: the estimated `sigma^2` and the
/// multiplicative tuning factor `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthConfig {
    pub sigma2_hat: f64,
    pub s: f64,
}

impl BandwidthConfig {
    pub fn new(sigma2_hat: f64, s: f64) -> Result<Self> {
        let cfg = Self { sigma2_hat, s };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Estimates `sigma^2` from the data and pairs it with tuning factor `s`.
    pub fn estimate(data: &DataMatrix, s: f64) -> Result<Self> {
        Self::new(estimate_bandwidth(data)?, s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2_hat.is_finite() && self.sigma2_hat > 0.0) {
            return config_err(format!(
                "sigma2_hat must be positive, got {}",
                self.sigma2_hat
            ));
        }
        if !(self.s.is_finite() && self.s > 0.0) {
            return config_err(format!(
                "bandwidth factor s must be positive, got {}",
                self.s
            ));
        }
        Ok(())
    }

    /// The denominator `2 s sigma^2` of the kernel exponent.
    pub fn scale(&self) -> f64 {
        2.0 * self.s * self.sigma2_hat
    }
}

/// Mean pairwise squared Euclidean distance, `2 sum_{i<j} |x_i - x_j|^2 / (n(n-1))`.
pub fn estimate_bandwidth(data: &DataMatrix) -> Result<f64> {
    let n = data.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += data.sq_dist(i, j);
        }
    }
    finish_bandwidth(total, n)
}

/// Same estimate computed from a precomputed distance matrix.
pub fn estimate_bandwidth_from(dist: &SquaredDistances) -> Result<f64> {
    let n = dist.n();
    let total: f64 = (0..n)
        .map(|i| dist.row(i)[i + 1..].iter().sum::<f64>())
        .sum();
    finish_bandwidth(total, n)
}

fn finish_bandwidth(total: f64, n: usize) -> Result<f64> {
    let sigma2 = 2.0 * total / (n as f64 * (n as f64 - 1.0));
    if sigma2 <= 0.0 {
        return Err(Error::DegenerateData(
            "all observations are identical; the kernel bandwidth is zero".into(),
        ));
    }
    Ok(sigma2)
}

/// Symmetric similarity matrix `L`.
///
/// Built by [`build_rbf_kernel`] for the clustering pipeline. Other symmetric
/// PSD matrices (identity, linear Gram) can be wrapped with
/// [`KernelMatrix::from_matrix`] for oracle checks.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    entries: DMatrix<f64>,
}

impl KernelMatrix {
    /// Wraps an arbitrary square symmetric matrix of finite reals.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::ShapeMismatch("kernel matrix must be square".into()));
        }
        let n = entries.nrows();
        for i in 0..n {
            for j in 0..n {
                let v = entries[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NumericalFailure(format!(
                        "non-finite kernel entry at ({i}, {j})"
                    )));
                }
                if v != entries[(j, i)] {
                    return Err(Error::NumericalFailure(format!(
                        "kernel not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    /// The linear Gram matrix `<x_i, x_j>`.
    pub fn linear_gram(data: &DataMatrix) -> Self {
        let n = data.n();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = data
                    .row(i)
                    .iter()
                    .zip(data.row(j))
                    .map(|(a, b)| a * b)
                    .sum();
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self { entries: m }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// Principal submatrix `L_Y`.
    pub fn submatrix(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.entries[(idx[a], idx[b])])
    }
}

/// `L_ij = exp(-|x_i - x_j|^2 / (2 s sigma^2))`.
pub fn build_rbf_kernel(data: &DataMatrix, cfg: &BandwidthConfig) -> Result<KernelMatrix> {
    build_rbf_kernel_from(&SquaredDistances::new(data), cfg)
}

pub fn build_rbf_kernel_from(
    dist: &SquaredDistances,
    cfg: &BandwidthConfig,
) -> Result<KernelMatrix> {
    cfg.validate()?;
    let n = dist.n();
    let scale = cfg.scale();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let v = (-dist.get(i, j) / scale).exp();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(KernelMatrix { entries: m })
}

/// Orthonormal eigensystem of a kernel matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    /// Column `k` is the eigenvector of `eigenvalues[k]`.
    eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, k: usize) -> nalgebra::DVectorView<'_, f64> {
        self.eigenvectors.column(k)
    }

    /// `log det(L + I) = sum_i log(1 + lambda_i)`.
    pub fn log_det_l_plus_i(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.ln_1p()).sum()
    }

    /// Expected DPP cardinality `sum_i lambda_i / (lambda_i + 1)`.
    pub fn expected_dpp_size(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l / (l + 1.0)).sum()
    }

    /// `sum_i lambda_i v_i v_i^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let lambda = DVector::from_column_slice(&self.eigenvalues);
        let scaled = DMatrix::from_fn(self.n(), self.n(), |i, k| {
            self.eigenvectors[(i, k)] * lambda[k]
        });
        scaled * self.eigenvectors.transpose()
    }
}

/// Eigenvalues below this (relative to `n`) are treated as corruption, not rounding.
pub const PSD_TOLERANCE_PER_ROW: f64 = 1e-8;

pub fn eigendecompose(kernel: &KernelMatrix) -> Result<SpectralDecomposition> {
    let n = kernel.n();
    let eig = SymmetricEigen::try_new(kernel.entries.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;

    let tol = PSD_TOLERANCE_PER_ROW * n as f64;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[src];
        if lambda < -tol {
            return Err(Error::NumericalFailure(format!(
                "kernel matrix is not positive semidefinite (eigenvalue {lambda:e})"
            )));
        }
        eigenvalues.push(lambda.max(0.0));
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}
