//! Generator-set samplers: exact DPP, uniform baseline and k-means++ seeding.
//!
//! The DPP sampler draws from `P(Y) = det(L_Y) / det(L + I)` in two phases.
//! Phase one picks eigenvector `i` independently with probability
//! `lambda_i / (lambda_i + 1)`, which selects an elementary DPP with its
//! mixture weight. Phase two samples the projection DPP spanned by the chosen
//! eigenvectors one point at a time, each pick followed by projecting the basis
//! onto the orthogonal complement of the picked coordinate.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{sq_euclidean, DataMatrix};
use crate::error::{config_err, Error, Result};
use crate::kernel::{KernelMatrix, SpectralDecomposition};
use crate::rng::RngStream;

/// Phase-one draws with fewer generators than this are redrawn.
pub const MIN_GENERATORS: usize = 2;
/// Consecutive rejected phase-one draws tolerated before giving up.
pub const MAX_RESAMPLE_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMethod {
    Dpp,
    Uniform,
    #[serde(rename = "kmeanspp")]
    KMeansPP,
}

/// Distinct observation indices used as Voronoi generators or initial centers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSet {
    indices: Vec<usize>,
    method: SamplingMethod,
}

impl GeneratorSet {
    pub fn new(indices: Vec<usize>, n: usize, method: SamplingMethod) -> Result<Self> {
        if indices.is_empty() {
            return config_err("generator set must not be empty");
        }
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n {
                return config_err(format!("generator index {i} out of range for n = {n}"));
            }
            if std::mem::replace(&mut seen[i], true) {
                return config_err(format!("generator index {i} repeated"));
            }
        }
        Ok(Self { indices, method })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn method(&self) -> SamplingMethod {
        self.method
    }

    /// Coordinates of the generators.
    pub fn centers(&self, data: &DataMatrix) -> Vec<Vec<f64>> {
        self.indices.iter().map(|&i| data.row(i).to_vec()).collect()
    }
}

/// Upper bound of the uniform cluster-count draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub k_max: usize,
}

impl BaselineConfig {
    /// `2 * ceil(sqrt(n / 2))`, clamped to `[2, n]`.
    pub fn default_for(n: usize) -> Self {
        let k = 2 * ((n as f64 / 2.0).sqrt().ceil() as usize);
        Self {
            k_max: k.clamp(2, n.max(2)),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k_max < 2 || self.k_max > n {
            return config_err(format!("k_max must lie in [2, {n}], got {}", self.k_max));
        }
        Ok(())
    }
}

/// Phase one: indices of the eigenvectors spanning the elementary DPP.
pub fn sample_eigen_indices<R: Rng + ?Sized>(
    spec: &SpectralDecomposition,
    rng: &mut R,
) -> Vec<usize> {
    spec.eigenvalues()
        .iter()
        .enumerate()
        .filter(|(_, &l)| rng.random::<f64>() < l / (l + 1.0))
        .map(|(i, _)| i)
        .collect()
}

/// Phase two: one draw from the projection DPP spanned by the given eigenvectors.
/// Returns exactly `eigen_indices.len()` distinct items, in the order picked.
pub fn sample_projection_dpp<R: Rng + ?Sized>(
    spec: &SpectralDecomposition,
    eigen_indices: &[usize],
    rng: &mut R,
) -> Vec<usize> {
    let n = spec.n();
    let mut basis: Vec<Vec<f64>> = eigen_indices
        .iter()
        .map(|&k| spec.eigenvector(k).iter().copied().collect())
        .collect();
    let mut picked = Vec::with_capacity(basis.len());
    let mut weights = vec![0.0; n];

    while !basis.is_empty() {
        weights.iter_mut().for_each(|w| *w = 0.0);
        for col in &basis {
            for (w, v) in weights.iter_mut().zip(col) {
                *w += v * v;
            }
        }
        for &i in &picked {
            weights[i] = 0.0;
        }
        let total: f64 = weights.iter().sum();
        let item = weighted_pick(&weights, total, rng);
        picked.push(item);

        // Eliminate the picked coordinate using the column with the largest entry there.
        let pivot_col = (0..basis.len())
            .max_by(|&a, &b| basis[a][item].abs().total_cmp(&basis[b][item].abs()))
            .expect("basis is non-empty");
        let pivot = basis.swap_remove(pivot_col);
        let pivot_val = pivot[item];
        for col in basis.iter_mut() {
            let factor = col[item] / pivot_val;
            if factor != 0.0 {
                for (c, p) in col.iter_mut().zip(&pivot) {
                    *c -= factor * p;
                }
            }
            col[item] = 0.0;
        }
        orthonormalize(&mut basis);
    }
    picked
}

/// Modified Gram-Schmidt, renormalizing after every projection.
fn orthonormalize(basis: &mut [Vec<f64>]) {
    for a in 0..basis.len() {
        let (done, rest) = basis.split_at_mut(a);
        let col = &mut rest[0];
        for prev in done.iter() {
            let dot: f64 = col.iter().zip(prev).map(|(x, y)| x * y).sum();
            for (c, p) in col.iter_mut().zip(prev) {
                *c -= dot * p;
            }
        }
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            col.iter_mut().for_each(|v| *v /= norm);
        }
    }
}

/// Index drawn with probability `weights[i] / total`; zero-weight entries are never chosen.
fn weighted_pick<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if acc > target {
                return i;
            }
        }
    }
    last_positive
}

/// One unconditioned DPP draw (possibly empty).
pub fn sample_dpp_unconditioned<R: Rng + ?Sized>(
    spec: &SpectralDecomposition,
    rng: &mut R,
) -> Vec<usize> {
    let eig = sample_eigen_indices(spec, rng);
    sample_projection_dpp(spec, &eig, rng)
}

/// DPP draw conditioned on at least `min_generators` items by redrawing phase one.
pub fn sample_dpp_with<R: Rng + ?Sized>(
    spec: &SpectralDecomposition,
    min_generators: usize,
    rng: &mut R,
) -> Result<GeneratorSet> {
    for _ in 0..MAX_RESAMPLE_ATTEMPTS {
        let eig = sample_eigen_indices(spec, rng);
        if eig.len() >= min_generators.max(1) {
            let items = sample_projection_dpp(spec, &eig, rng);
            return GeneratorSet::new(items, spec.n(), SamplingMethod::Dpp);
        }
    }
    Err(Error::ResampleExhausted(MAX_RESAMPLE_ATTEMPTS))
}

/// DPP generator set with at least [`MIN_GENERATORS`] points.
pub fn sample_dpp(spec: &SpectralDecomposition, stream: RngStream) -> Result<GeneratorSet> {
    sample_dpp_with(spec, MIN_GENERATORS, &mut stream.rng())
}

/// Uniform baseline: `k` uniform on `{2, .., k_max}`, then a uniform `k`-subset.
pub fn sample_uniform_with<R: Rng + ?Sized>(
    n: usize,
    cfg: &BaselineConfig,
    rng: &mut R,
) -> Result<GeneratorSet> {
    cfg.validate(n)?;
    let k = sample_cluster_count(cfg, rng);
    GeneratorSet::new(
        index::sample(rng, n, k).into_vec(),
        n,
        SamplingMethod::Uniform,
    )
}

pub fn sample_uniform(n: usize, cfg: &BaselineConfig, stream: RngStream) -> Result<GeneratorSet> {
    sample_uniform_with(n, cfg, &mut stream.rng())
}

pub(crate) fn sample_cluster_count<R: Rng + ?Sized>(cfg: &BaselineConfig, rng: &mut R) -> usize {
    rng.random_range(MIN_GENERATORS..=cfg.k_max)
}

/// k-means++ seeding: first center uniform, then proportional to the squared
/// distance to the nearest chosen center.
pub fn kmeanspp_init_with<R: Rng + ?Sized>(
    data: &DataMatrix,
    k: usize,
    rng: &mut R,
) -> Result<GeneratorSet> {
    let n = data.n();
    if k == 0 || k > n {
        return config_err(format!("k-means++ needs 1 <= k <= n = {n}, got {k}"));
    }
    let first = rng.random_range(0..n);
    let mut chosen = vec![first];
    let mut dc2: Vec<f64> = (0..n).map(|i| data.sq_dist(i, first)).collect();
    while chosen.len() < k {
        let total: f64 = dc2.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateData(format!(
                "fewer than {k} distinct points available for k-means++"
            )));
        }
        let next = weighted_pick(&dc2, total, rng);
        chosen.push(next);
        let c = data.row(next);
        for (i, d) in dc2.iter_mut().enumerate() {
            *d = d.min(sq_euclidean(data.row(i), c));
        }
    }
    GeneratorSet::new(chosen, n, SamplingMethod::KMeansPP)
}

pub fn kmeanspp_init(data: &DataMatrix, k: usize, stream: RngStream) -> Result<GeneratorSet> {
    kmeanspp_init_with(data, k, &mut stream.rng())
}

/// `log det(L_Y) - log det(L + I)`. Singular subsets give negative infinity.
pub fn dpp_log_likelihood(
    kernel: &KernelMatrix,
    spec: &SpectralDecomposition,
    indices: &[usize],
) -> Result<f64> {
    let n = kernel.n();
    if spec.n() != n {
        return Err(Error::ShapeMismatch(
            "kernel and spectral decomposition sizes differ".into(),
        ));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return config_err(format!("subset index {bad} out of range for n = {n}"));
    }
    Ok(log_det_psd(kernel.submatrix(indices)) - spec.log_det_l_plus_i())
}

/// Pivots with `l_ii <= SINGULAR_PIVOT` mark a numerically singular submatrix.
const SINGULAR_PIVOT: f64 = 1e-7;

fn log_det_psd(m: DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    match m.cholesky() {
        Some(ch) => {
            let l = ch.l_dirty();
            let mut acc = 0.0;
            for i in 0..l.nrows() {
                let d = l[(i, i)];
                if !(d > SINGULAR_PIVOT) {
                    return f64::NEG_INFINITY;
                }
                acc += 2.0 * d.ln();
            }
            acc
        }
        None => f64::NEG_INFINITY,
    }
}
