//! Voronoi cell assignment and Lloyd iterations.

use serde::{Deserialize, Serialize};

use crate::data::{sq_euclidean, DataMatrix, SquaredDistances};
use crate::error::{Error, Result};
use crate::sampling::GeneratorSet;

/// Hard assignment of `n` observations to `K` nonempty clusters.
///
/// Labels are canonical: cluster ids are numbered `0..K` in order of first
/// appearance, so two partitions describe the same grouping iff their label
/// vectors are equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Compacts arbitrary labels into canonical form.
    pub fn from_labels<T: Eq + std::hash::Hash + Clone>(raw: &[T]) -> Self {
        let mut ids = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|l| {
                let next = ids.len();
                *ids.entry(l.clone()).or_insert(next)
            })
            .collect();
        Self {
            labels,
            k: ids.len(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    /// Members of each cluster, in increasing index order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            m[l].push(i);
        }
        m
    }
}

/// Nearest-generator assignment; ties go to the earlier generator in the set.
pub fn voronoi_assign(data: &DataMatrix, gens: &GeneratorSet) -> Result<Partition> {
    check_generators(data.n(), gens)?;
    let raw: Vec<usize> = data
        .rows()
        .map(|x| nearest(gens.indices().iter().map(|&g| sq_euclidean(x, data.row(g)))))
        .collect();
    Ok(Partition::from_labels(&raw))
}

/// Same as [`voronoi_assign`], reading distances from a precomputed matrix.
pub fn voronoi_assign_from(dist: &SquaredDistances, gens: &GeneratorSet) -> Result<Partition> {
    check_generators(dist.n(), gens)?;
    let raw: Vec<usize> = (0..dist.n())
        .map(|i| {
            let row = dist.row(i);
            nearest(gens.indices().iter().map(|&g| row[g]))
        })
        .collect();
    Ok(Partition::from_labels(&raw))
}

fn check_generators(n: usize, gens: &GeneratorSet) -> Result<()> {
    if gens.indices().iter().any(|&g| g >= n) {
        return Err(Error::ShapeMismatch(
            "generator index exceeds the number of observations".into(),
        ));
    }
    Ok(())
}

/// Position of the smallest value, first one on ties.
fn nearest(dists: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (pos, d) in dists.enumerate() {
        if d < best.1 {
            best = (pos, d);
        }
    }
    best.0
}

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-6;

/// Result of Lloyd iterations with the within-cluster sum of squares after each assignment step.
#[derive(Debug, Clone)]
pub struct LloydOutcome {
    pub partition: Partition,
    pub centers: Vec<Vec<f64>>,
    pub iterations: usize,
    pub wcss: Vec<f64>,
}

pub fn lloyd_kmeans(
    data: &DataMatrix,
    init_centers: &[Vec<f64>],
    max_iter: usize,
    tol: f64,
) -> Result<Partition> {
    lloyd_kmeans_detailed(data, init_centers, max_iter, tol).map(|o| o.partition)
}

/// Alternates nearest-center assignment and mean updates until no center moves
/// more than `tol` or `max_iter` is reached. Empty clusters are dropped.
pub fn lloyd_kmeans_detailed(
    data: &DataMatrix,
    init_centers: &[Vec<f64>],
    max_iter: usize,
    tol: f64,
) -> Result<LloydOutcome> {
    let (n, p) = (data.n(), data.p());
    if init_centers.is_empty() || init_centers.len() > n {
        return Err(Error::InvalidConfig(format!(
            "need between 1 and {n} initial centers, got {}",
            init_centers.len()
        )));
    }
    if init_centers.iter().any(|c| c.len() != p) {
        return Err(Error::ShapeMismatch(
            "initial center dimension differs from data".into(),
        ));
    }
    if max_iter == 0 {
        return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
    }

    let mut centers = init_centers.to_vec();
    let mut assign = vec![0usize; n];
    let mut wcss = Vec::new();
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let mut total = 0.0;
        for (i, x) in data.rows().enumerate() {
            let c = nearest(centers.iter().map(|c| sq_euclidean(x, c)));
            assign[i] = c;
            total += sq_euclidean(x, &centers[c]);
        }
        wcss.push(total);

        let mut sums = vec![vec![0.0; p]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (i, x) in data.rows().enumerate() {
            counts[assign[i]] += 1;
            for (s, v) in sums[assign[i]].iter_mut().zip(x) {
                *s += v;
            }
        }

        // Drop empty clusters and remap assignments.
        let mut remap = vec![usize::MAX; centers.len()];
        let mut next_centers = Vec::with_capacity(centers.len());
        let mut shift: f64 = 0.0;
        for (c, (sum, &cnt)) in sums.into_iter().zip(&counts).enumerate() {
            if cnt == 0 {
                continue;
            }
            let mean: Vec<f64> = sum.into_iter().map(|s| s / cnt as f64).collect();
            shift = shift.max(sq_euclidean(&mean, &centers[c]).sqrt());
            remap[c] = next_centers.len();
            next_centers.push(mean);
        }
        for a in assign.iter_mut() {
            *a = remap[*a];
        }
        centers = next_centers;
        if shift <= tol {
            break;
        }
    }

    Ok(LloydOutcome {
        partition: Partition::from_labels(&assign),
        centers,
        iterations,
        wcss,
    })
}
