//! Synthetic Gaussian-mixture benchmarks with bounded pairwise overlap.
//!
//! Component means are uniform on the unit hypercube, covariances are standard
//! Wishart with `p + 1` degrees of freedom and mixing weights are Dirichlet.
//! Pairwise overlap `w_{k|l} + w_{l|k}` is estimated by Monte Carlo, where
//! `w_{k|l}` is the probability that a draw from component `l` has a larger
//! weighted density under component `k`. Mixtures above the overlap cap are
//! repaired by shrinking every covariance by a common factor.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, ChiSquared, Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{config_err, Error, Result};
use crate::rng::RngStream;

pub const DEFAULT_MAX_OVERLAP: f64 = 0.01;
pub const DEFAULT_REPLICAS: usize = 10;
pub const DEFAULT_MAX_ECCENTRICITY: f64 = 0.9;
/// Monte-Carlo draws per direction when estimating a pairwise overlap.
pub const OVERLAP_DRAWS: usize = 10_000;
/// Cheaper draw count used to locate the shrink level before confirming it.
const SCREEN_DRAWS: usize = 1_000;
pub const SHRINK_FACTOR: f64 = 0.9;
pub const MAX_SHRINK_STEPS: u32 = 200;
pub const MAX_COUNT_ATTEMPTS: usize = 1000;
pub const MAX_MODEL_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low,
    Medium,
    Large,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Low, Level::Medium, Level::Large];

    /// Inclusive range of the number of variables.
    pub fn p_range(self) -> (usize, usize) {
        match self {
            Level::Low => (2, 7),
            Level::Medium => (8, 12),
            Level::Large => (13, 20),
        }
    }

    /// Inclusive range of the number of components.
    pub fn k_range(self) -> (usize, usize) {
        match self {
            Level::Low => (2, 5),
            Level::Medium => (6, 10),
            Level::Large => (11, 20),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::Low => "low",
            Level::Medium => "medium",
            Level::Large => "large",
        }
    }
}

fn default_overlap() -> f64 {
    DEFAULT_MAX_OVERLAP
}

fn default_eccentricity() -> f64 {
    DEFAULT_MAX_ECCENTRICITY
}

fn default_replicas() -> usize {
    DEFAULT_REPLICAS
}

/// One cell of the factorial simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n: usize,
    pub p_level: Level,
    pub k_level: Level,
    #[serde(default = "default_overlap")]
    pub max_pairwise_overlap: f64,
    /// Cap on `sqrt(1 - lambda_min / lambda_max)` per covariance; 1 disables it.
    #[serde(default = "default_eccentricity")]
    pub max_eccentricity: f64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
}

impl ScenarioSpec {
    pub fn new(n: usize, p_level: Level, k_level: Level) -> Self {
        Self {
            n,
            p_level,
            k_level,
            max_pairwise_overlap: DEFAULT_MAX_OVERLAP,
            max_eccentricity: DEFAULT_MAX_ECCENTRICITY,
            replicas: DEFAULT_REPLICAS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 150 && self.k_level == Level::Large {
            return config_err("the n = 150, large-K scenario is excluded from the design");
        }
        if self.n < 2 {
            return config_err("scenario needs n >= 2");
        }
        if !(self.max_pairwise_overlap > 0.0 && self.max_pairwise_overlap < 1.0) {
            return config_err("max_pairwise_overlap must lie in (0, 1)");
        }
        if !(self.max_eccentricity > 0.0 && self.max_eccentricity <= 1.0) {
            return config_err("max_eccentricity must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        format!(
            "n{}_p{}_k{}",
            self.n,
            self.p_level.name(),
            self.k_level.name()
        )
    }
}

/// The 24 scenarios: `n x K-level x p-level` minus the three `(150, large K)` cells.
pub fn scenario_grid() -> Vec<ScenarioSpec> {
    let mut out = Vec::with_capacity(24);
    for n in [150, 500, 1500] {
        for k_level in Level::ALL {
            if n == 150 && k_level == Level::Large {
                continue;
            }
            for p_level in Level::ALL {
                out.push(ScenarioSpec::new(n, p_level, k_level));
            }
        }
    }
    out
}

/// Gaussian mixture parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub means: Vec<Vec<f64>>,
    /// Row-major `p x p` covariance of each component.
    pub covariances: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl MixtureModel {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn p(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn covariance(&self, k: usize) -> DMatrix<f64> {
        let p = self.p();
        DMatrix::from_row_slice(p, p, &self.covariances[k])
    }

    pub fn validate(&self) -> Result<()> {
        let (k, p) = (self.k(), self.p());
        if k == 0 || self.means.len() != k || self.covariances.len() != k {
            return Err(Error::ShapeMismatch(
                "mixture parameter counts disagree".into(),
            ));
        }
        if self.means.iter().any(|m| m.len() != p)
            || self.covariances.iter().any(|c| c.len() != p * p)
        {
            return Err(Error::ShapeMismatch(
                "mixture parameter dimensions disagree".into(),
            ));
        }
        if self.weights.iter().any(|&w| !(w > 0.0))
            || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(Error::InvalidConfig(
                "mixing weights must be positive and sum to 1".into(),
            ));
        }
        self.components().map(|_| ())
    }

    fn components(&self) -> Result<Vec<Component>> {
        (0..self.k())
            .map(|k| Component::new(&self.means[k], self.covariance(k)))
            .collect()
    }
}

/// Gaussian component with a cached Cholesky factor.
#[derive(Debug, Clone)]
struct Component {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    log_det: f64,
}

impl Component {
    fn new(mean: &[f64], cov: DMatrix<f64>) -> Result<Self> {
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::NumericalFailure("covariance is not positive definite".into()))?
            .unpack();
        let log_det = 2.0 * chol.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self {
            mean: DVector::from_column_slice(mean),
            chol,
            log_det,
        })
    }

    fn p(&self) -> usize {
        self.mean.len()
    }

    /// Log density of `N(mean, c * cov)` at `x`, up to the shared `-p/2 log 2 pi`.
    fn log_density(&self, x: &DVector<f64>, c: f64, scratch: &mut DVector<f64>) -> f64 {
        scratch.copy_from(x);
        *scratch -= &self.mean;
        self.chol.solve_lower_triangular_mut(scratch);
        -0.5 * (self.log_det + self.p() as f64 * c.ln() + scratch.norm_squared() / c)
    }

    /// `mean + sqrt(c) * chol * z`.
    fn point(&self, z: &DVector<f64>, c: f64) -> DVector<f64> {
        &self.mean + (&self.chol * z) * c.sqrt()
    }
}

fn standard_normals<R: Rng + ?Sized>(p: usize, m: usize, rng: &mut R) -> Vec<DVector<f64>> {
    (0..m)
        .map(|_| DVector::from_fn(p, |_, _| rng.sample(StandardNormal)))
        .collect()
}

/// Fraction of the draws from `source` (scaled by `c`) that `other` claims.
fn misclassified(
    source: &Component,
    w_source: f64,
    other: &Component,
    w_other: f64,
    c: f64,
    draws: &[DVector<f64>],
) -> f64 {
    let mut scratch = DVector::zeros(source.p());
    let (ls, lo) = (w_source.ln(), w_other.ln());
    // Exact density ties count as half a misclassification.
    let hits: f64 = draws
        .iter()
        .map(|z| {
            let x = source.point(z, c);
            let claim = lo + other.log_density(&x, c, &mut scratch);
            let own = ls + source.log_density(&x, c, &mut scratch);
            match claim.partial_cmp(&own) {
                Some(std::cmp::Ordering::Greater) => 1.0,
                Some(std::cmp::Ordering::Equal) => 0.5,
                _ => 0.0,
            }
        })
        .sum();
    hits / draws.len() as f64
}

fn pair_overlap(
    comps: &[Component],
    weights: &[f64],
    k: usize,
    l: usize,
    c: f64,
    draws: &[Vec<DVector<f64>>],
    m: usize,
) -> f64 {
    misclassified(
        &comps[l],
        weights[l],
        &comps[k],
        weights[k],
        c,
        &draws[l][..m],
    ) + misclassified(
        &comps[k],
        weights[k],
        &comps[l],
        weights[l],
        c,
        &draws[k][..m],
    )
}

/// Monte-Carlo estimate of `w_{k|l} + w_{l|k}` from `m` draws per direction.
pub fn estimate_overlap(
    model: &MixtureModel,
    k: usize,
    l: usize,
    m: usize,
    stream: RngStream,
) -> Result<f64> {
    if k == l || k >= model.k() || l >= model.k() {
        return config_err(format!(
            "overlap needs two distinct components, got ({k}, {l})"
        ));
    }
    if m < 1000 {
        return config_err("overlap estimation needs at least 1000 draws");
    }
    let comps = model.components()?;
    let mut rng = stream.rng();
    let p = model.p();
    let mut draws = vec![Vec::new(); model.k()];
    draws[l] = standard_normals(p, m, &mut rng);
    draws[k] = standard_normals(p, m, &mut rng);
    Ok(pair_overlap(&comps, &model.weights, k, l, 1.0, &draws, m))
}

/// Largest estimated pairwise overlap of a mixture.
pub fn max_overlap(model: &MixtureModel, m: usize, stream: RngStream) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..model.k() {
        for l in (k + 1)..model.k() {
            worst = worst.max(estimate_overlap(
                model,
                k,
                l,
                m,
                stream.child((k * model.k() + l) as u64),
            )?);
        }
    }
    Ok(worst)
}

/// Simulated data with ground truth.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub data: DataMatrix,
    pub true_labels: Vec<usize>,
    pub model: MixtureModel,
    /// Shrink steps applied to the covariances during overlap repair.
    pub shrink_steps: u32,
}

impl LabeledDataset {
    pub fn k(&self) -> usize {
        self.model.k()
    }

    pub fn p(&self) -> usize {
        self.model.p()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.k()];
        for &l in &self.true_labels {
            c[l] += 1;
        }
        c
    }
}

/// Smallest admissible component count: `ceil(sqrt(n)) + 2`, capped at
/// `floor(n / (2K))` where the uncapped bound cannot be met.
pub fn min_component_count(n: usize, k: usize) -> usize {
    let preferred = (n as f64).sqrt().ceil() as usize + 2;
    preferred.min(n / (2 * k.max(1))).max(1)
}

/// Standard Wishart draw with `df` degrees of freedom (Bartlett decomposition).
pub fn wishart<R: Rng + ?Sized>(p: usize, df: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let mut a = DMatrix::zeros(p, p);
    for i in 0..p {
        let chi = ChiSquared::new((df - i) as f64)
            .map_err(|e| Error::InvalidConfig(format!("Wishart degrees of freedom: {e}")))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    Ok(&a * a.transpose())
}

/// Pulls the eigenvalues of `cov` towards the largest one so that
/// `sqrt(1 - lambda_min / lambda_max) <= max_ecc`. The eigenvectors are kept.
pub fn cap_eccentricity(cov: DMatrix<f64>, max_ecc: f64) -> DMatrix<f64> {
    if max_ecc >= 1.0 || cov.nrows() < 2 {
        return cov;
    }
    let eig = cov.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    if lmax <= 0.0 || (1.0 - lmin / lmax).sqrt() <= max_ecc {
        return cov;
    }
    let e2 = max_ecc * max_ecc;
    let vals = eig
        .eigenvalues
        .map(|l| lmax * (1.0 - e2 * (lmax - l) / (lmax - lmin)));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&vals) * v.transpose();
    (&out + out.transpose()) * 0.5
}

/// Dirichlet(1, ..., 1) conditioned on every weight being at least `floor`.
///
/// The flat Dirichlet is uniform on the simplex, so conditioning on the
/// sub-simplex `{w_k >= floor}` is an affine image of another flat draw.
pub fn flat_dirichlet_with_floor<R: Rng + ?Sized>(k: usize, floor: f64, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = e.iter().sum();
    let free = 1.0 - k as f64 * floor;
    let mut w: Vec<f64> = e.iter().map(|v| floor + free * v / total).collect();
    // Absorb rounding so the weights sum to one.
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Multinomial counts by sequential conditional binomials.
pub fn multinomial<R: Rng + ?Sized>(n: usize, weights: &[f64], rng: &mut R) -> Vec<usize> {
    let mut left = n as u64;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(weights.len());
    for (i, &w) in weights.iter().enumerate() {
        if i + 1 == weights.len() {
            out.push(left as usize);
            break;
        }
        let prob = (w / mass).clamp(0.0, 1.0);
        let draw = if left == 0 {
            0
        } else {
            Binomial::new(left, prob)
                .expect("valid binomial")
                .sample(rng)
        };
        out.push(draw as usize);
        left -= draw;
        mass -= w;
    }
    out
}

/// Draws a dataset for the scenario, choosing `p` and `K` uniformly in the level ranges.
pub fn generate_mixture(spec: &ScenarioSpec, stream: RngStream) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = stream.rng();
    let (plo, phi) = spec.p_level.p_range();
    let (klo, khi) = spec.k_level.k_range();
    let p = rng.random_range(plo..=phi);
    let k = rng.random_range(klo..=khi);
    generate_with(
        spec.n,
        p,
        k,
        spec.max_pairwise_overlap,
        spec.max_eccentricity,
        &mut rng,
    )
}

/// Mixture generation for explicit `n`, `p` and `K`.
pub fn generate_with<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    k: usize,
    max_pairwise_overlap: f64,
    max_eccentricity: f64,
    rng: &mut R,
) -> Result<LabeledDataset> {
    if n < 2 || p == 0 || k == 0 || k > n {
        return config_err(format!("cannot generate n = {n}, p = {p}, K = {k}"));
    }
    let min_count = min_component_count(n, k);
    let floor = if k > 1 {
        min_count as f64 / n as f64
    } else {
        0.0
    };

    for _ in 0..MAX_MODEL_ATTEMPTS {
        let means: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..p).map(|_| rng.random::<f64>()).collect())
            .collect();
        let covs = (0..k)
            .map(|_| wishart(p, p + 1, rng).map(|w| cap_eccentricity(w, max_eccentricity)))
            .collect::<Result<Vec<_>>>()?;
        let comps = match means
            .iter()
            .zip(&covs)
            .map(|(m, c)| Component::new(m, c.clone()))
            .collect::<Result<Vec<_>>>()
        {
            Ok(c) => c,
            Err(_) => continue,
        };

        for _ in 0..MAX_MODEL_ATTEMPTS {
            let weights = flat_dirichlet_with_floor(k, floor, rng);
            let Some(steps) = repair_overlap(&comps, &weights, max_pairwise_overlap, rng) else {
                break; // resample means and covariances
            };
            let c = SHRINK_FACTOR.powi(steps as i32);

            let Some(counts) = (0..MAX_COUNT_ATTEMPTS)
                .map(|_| multinomial(n, &weights, rng))
                .find(|cnt| k == 1 || cnt.iter().all(|&v| v >= min_count))
            else {
                continue; // resample weights
            };

            let mut values = Vec::with_capacity(n * p);
            let mut labels = Vec::with_capacity(n);
            for (label, (comp, &cnt)) in comps.iter().zip(&counts).enumerate() {
                for _ in 0..cnt {
                    let z = DVector::from_fn(p, |_, _| rng.sample(StandardNormal));
                    values.extend(comp.point(&z, c).iter());
                    labels.push(label);
                }
            }
            let model = MixtureModel {
                means,
                covariances: covs
                    .iter()
                    .map(|m| (m * c).transpose().as_slice().to_vec())
                    .collect(),
                weights,
            };
            return Ok(LabeledDataset {
                data: DataMatrix::new(values, n, p)?,
                true_labels: labels,
                model,
                shrink_steps: steps,
            });
        }
    }
    Err(Error::GenerationExhausted(format!(
        "no mixture with n = {n}, p = {p}, K = {k} met the overlap and balance constraints"
    )))
}

/// Finds the fewest shrink steps bringing every pairwise overlap under the cap.
///
/// Draws are shared across shrink levels, which makes each estimate a smooth
/// function of the shrink factor. The level is located with a cheap draw count
/// and then confirmed (and raised if needed) with the full count.
fn repair_overlap<R: Rng + ?Sized>(
    comps: &[Component],
    weights: &[f64],
    cap: f64,
    rng: &mut R,
) -> Option<u32> {
    let k = comps.len();
    if k == 1 {
        return Some(0);
    }
    let p = comps[0].p();
    let draws: Vec<Vec<DVector<f64>>> = (0..k)
        .map(|_| standard_normals(p, OVERLAP_DRAWS, rng))
        .collect();
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|a| ((a + 1)..k).map(move |b| (a, b)))
        .collect();
    let ok_at = |steps: u32, m: usize| {
        let c = SHRINK_FACTOR.powi(steps as i32);
        pairs
            .iter()
            .all(|&(a, b)| pair_overlap(comps, weights, a, b, c, &draws, m) <= cap)
    };

    if !ok_at(MAX_SHRINK_STEPS, SCREEN_DRAWS) {
        return None;
    }
    let (mut lo, mut hi) = (0u32, MAX_SHRINK_STEPS);
    if ok_at(0, SCREEN_DRAWS) {
        hi = 0;
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ok_at(mid, SCREEN_DRAWS) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (hi..=MAX_SHRINK_STEPS).find(|&s| ok_at(s, OVERLAP_DRAWS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_component(sep: f64, var: f64, w: f64) -> MixtureModel {
        MixtureModel {
            means: vec![vec![0.0], vec![sep]],
            covariances: vec![vec![var], vec![var]],
            weights: vec![w, 1.0 - w],
        }
    }

    /// Standard normal CDF via the complementary error function series (Abramowitz-Stegun 7.1.26).
    fn phi(x: f64) -> f64 {
        let z = x.abs() / std::f64::consts::SQRT_2;
        let t = 1.0 / (1.0 + 0.327_591_1 * z);
        let poly = t
            * (0.254_829_592
                + t * (-0.284_496_736
                    + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
        let erfc = poly * (-z * z).exp();
        if x >= 0.0 {
            1.0 - 0.5 * erfc
        } else {
            0.5 * erfc
        }
    }

    #[test]
    fn grid_has_24_valid_cells() {
        let g = scenario_grid();
        assert_eq!(g.len(), 24);
        assert!(!g.iter().any(|s| s.n == 150 && s.k_level == Level::Large));
        for s in &g {
            let (lo, hi) = s.p_level.p_range();
            assert!(lo >= 2 && hi <= 20);
            assert!(s.validate().is_ok());
        }
        assert!(ScenarioSpec::new(150, Level::Low, Level::Large)
            .validate()
            .is_err());
    }

    #[test]
    fn overlap_limits() {
        let same = two_component(0.0, 1.0, 0.5);
        let o = estimate_overlap(&same, 0, 1, 10_000, RngStream::new(1, 0)).unwrap();
        assert_eq!(o, 1.0);

        let far = two_component(100.0, 1.0, 0.5);
        assert_eq!(
            estimate_overlap(&far, 0, 1, 10_000, RngStream::new(1, 0)).unwrap(),
            0.0
        );

        assert!(estimate_overlap(&far, 0, 0, 10_000, RngStream::new(1, 0)).is_err());
        assert!(estimate_overlap(&far, 0, 1, 10, RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn overlap_matches_closed_form_for_equal_spherical_pair() {
        // Equal weights and variances: each direction misclassifies Phi(-delta / (2 sigma)).
        for (delta, sigma) in [(1.0, 1.0), (2.0, 0.7), (3.0, 1.0)] {
            let m = 20_000;
            let model = two_component(delta, sigma * sigma, 0.5);
            let est = estimate_overlap(&model, 0, 1, m, RngStream::new(7, 0)).unwrap();
            let q = phi(-delta / (2.0 * sigma));
            let expected = 2.0 * q;
            let se = 2.0 * (q * (1.0 - q) / m as f64).sqrt() / std::f64::consts::SQRT_2;
            assert!(
                (est - expected).abs() <= 3.0 * se,
                "delta {delta}: {est} vs {expected}"
            );
        }
    }

    #[test]
    fn multinomial_counts_stay_in_binomial_band() {
        let mut rng = RngStream::new(3, 0).rng();
        for _ in 0..200 {
            let c = multinomial(1000, &[0.5, 0.5], &mut rng);
            assert_eq!(c.iter().sum::<usize>(), 1000);
            // 99.9% two-sided band of Binomial(1000, 0.5): 500 +/- 3.29 * sqrt(250), rounded out.
            assert!((447..=553).contains(&c[0]), "{c:?}");
        }
    }

    #[test]
    fn dirichlet_floor_and_simplex() {
        let mut rng = RngStream::new(4, 0).rng();
        for _ in 0..100 {
            let w = flat_dirichlet_with_floor(6, 0.05, &mut rng);
            assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert!(w.iter().all(|&v| v >= 0.05 - 1e-12));
        }
    }

    #[test]
    fn eccentricity_cap() {
        let mut rng = RngStream::new(3, 0).rng();
        for p in [2, 6, 15] {
            let w = wishart(p, p + 1, &mut rng).unwrap();
            let capped = cap_eccentricity(w.clone(), 0.9);
            let e = capped.clone().symmetric_eigen().eigenvalues;
            assert!((1.0 - e.min() / e.max()).sqrt() <= 0.9 + 1e-9);
            assert!(
                (e.max() - w.clone().symmetric_eigen().eigenvalues.max()).abs() < 1e-8 * e.max()
            );
            assert!(capped.cholesky().is_some());
            assert_eq!(cap_eccentricity(w.clone(), 1.0), w);
        }
    }

    #[test]
    fn wishart_is_positive_definite() {
        let mut rng = RngStream::new(5, 0).rng();
        for p in [2, 7, 20] {
            let w = wishart(p, p + 1, &mut rng).unwrap();
            assert!(w.clone().cholesky().is_some());
            assert_eq!(w, w.transpose());
        }
    }

    #[test]
    fn single_component_request() {
        let mut rng = RngStream::new(6, 0).rng();
        let ds = generate_with(40, 3, 1, 0.01, 0.9, &mut rng).unwrap();
        assert!(ds.true_labels.iter().all(|&l| l == 0));
        assert_eq!(ds.data.n(), 40);
    }

    #[test]
    fn generated_dataset_meets_constraints() {
        let spec = ScenarioSpec::new(150, Level::Medium, Level::Low);
        let ds = generate_mixture(&spec, RngStream::new(11, 0)).unwrap();
        ds.model.validate().unwrap();
        assert_eq!(ds.data.n(), 150);
        assert!((8..=12).contains(&ds.p()));
        assert!((2..=5).contains(&ds.k()));
        let min = min_component_count(150, ds.k());
        assert!(ds.counts().iter().all(|&c| c >= min), "{:?}", ds.counts());

        // Fresh-seed re-estimate, allowing three standard errors of slack.
        let cap = spec.max_pairwise_overlap;
        let slack = 3.0 * (2.0 * cap / OVERLAP_DRAWS as f64).sqrt();
        let worst = max_overlap(&ds.model, OVERLAP_DRAWS, RngStream::new(999, 0)).unwrap();
        assert!(worst <= cap + slack, "overlap {worst}");

        let again = generate_mixture(&spec, RngStream::new(11, 0)).unwrap();
        assert_eq!(again.data, ds.data);
        assert_eq!(again.true_labels, ds.true_labels);
    }

    #[test]
    fn separated_components_need_no_repair() {
        let comps = vec![
            Component::new(&[0.0, 0.0], DMatrix::identity(2, 2) * 1e-4).unwrap(),
            Component::new(&[1.0, 1.0], DMatrix::identity(2, 2) * 1e-4).unwrap(),
        ];
        let mut rng = RngStream::new(8, 0).rng();
        assert_eq!(repair_overlap(&comps, &[0.5, 0.5], 0.01, &mut rng), Some(0));
    }

    #[test]
    fn balance_threshold() {
        assert_eq!(min_component_count(150, 3), 15);
        assert_eq!(min_component_count(500, 20), 12);
        assert_eq!(min_component_count(1500, 4), 41);
    }
}
