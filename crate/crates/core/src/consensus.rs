//! Co-membership accumulation, consensus graphs and small-cluster merging.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::partition::Partition;

/// Proportion of runs in which each pair of observations shared a cluster.
///
/// Stored as integer co-membership counts over `runs` partitions; entries are
/// `count / runs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsensusMatrix {
    n: usize,
    runs: u32,
    counts: Vec<u32>,
}

impl ConsensusMatrix {
    /// Empty accumulator over `n` observations.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            runs: 0,
            counts: vec![0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn runs(&self) -> u32 {
        self.runs
    }

    #[inline]
    pub fn count(&self, i: usize, j: usize) -> u32 {
        self.counts[i * self.n + j]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.count(i, j) as f64 / self.runs as f64
    }

    /// Adds one run's co-membership.
    pub fn add(&mut self, partition: &Partition) -> Result<()> {
        if partition.n() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "partition covers {} observations, consensus matrix has {}",
                partition.n(),
                self.n
            )));
        }
        for members in partition.members() {
            for &i in &members {
                let row = &mut self.counts[i * self.n..(i + 1) * self.n];
                for &j in &members {
                    row[j] += 1;
                }
            }
        }
        self.runs += 1;
        Ok(())
    }

    /// Sums the counts of two accumulators over disjoint sets of runs.
    pub fn merge(mut self, other: &ConsensusMatrix) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::ShapeMismatch(
                "cannot merge consensus matrices of different size".into(),
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.runs += other.runs;
        Ok(self)
    }

    /// Dense row-major CSV, six significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::new();
        for i in 0..self.n {
            line.clear();
            for j in 0..self.n {
                if j > 0 {
                    line.push(',');
                }
                write!(line, "{}", format_sig6(self.get(i, j))).expect("writing to a String");
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }
}

/// Formats with six significant digits, dropping trailing zeros.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Consensus matrix of a list of partitions. Runs are accumulated in parallel
/// chunks; integer counts make the result independent of the chunking.
pub fn accumulate(partitions: &[Partition], n: usize) -> Result<ConsensusMatrix> {
    if let Some(p) = partitions.iter().find(|p| p.n() != n) {
        return Err(Error::ShapeMismatch(format!(
            "partition covers {} observations, expected {n}",
            p.n()
        )));
    }
    let chunk = partitions
        .len()
        .div_ceil(rayon::current_num_threads().max(1))
        .max(1);
    partitions
        .par_chunks(chunk)
        .map(|ps| {
            let mut c = ConsensusMatrix::empty(n);
            for p in ps {
                c.add(p)?;
            }
            Ok(c)
        })
        .try_reduce(|| ConsensusMatrix::empty(n), |a, b| a.merge(&b))
}

/// Thresholding and merging parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusConfig {
    pub runs: usize,
    pub tau: f64,
    pub thresholds: Vec<f64>,
    /// Minimal cluster size exponent: clusters need at least `ceil(n^a)` members.
    pub a: f64,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        Self::new(200, 0.6, 0.5)
    }
}

impl ConsensusConfig {
    /// Threshold grid `tau, tau + 0.05, ...` up to 0.95.
    pub fn new(runs: usize, tau: f64, a: f64) -> Self {
        Self {
            runs,
            tau,
            thresholds: threshold_grid(tau),
            a,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return config_err("runs must be at least 1");
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return config_err(format!("tau must lie in (0, 1), got {}", self.tau));
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return config_err(format!(
                "minimal-size exponent must lie in (0, 1), got {}",
                self.a
            ));
        }
        if self.thresholds.is_empty() {
            return config_err("threshold list is empty");
        }
        if self
            .thresholds
            .iter()
            .any(|&t| !(t >= self.tau && t <= 1.0))
        {
            return config_err("thresholds must lie in [tau, 1]");
        }
        if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return config_err("thresholds must be strictly ascending");
        }
        Ok(())
    }

    /// `ceil(n^a)`.
    pub fn min_size(&self, n: usize) -> usize {
        ((n as f64).powf(self.a) - 1e-9).ceil().max(1.0) as usize
    }
}

pub fn threshold_grid(tau: f64) -> Vec<f64> {
    let mut out = vec![tau];
    let mut step = (tau * 20.0 + 1e-9).floor() as i64 + 1;
    while step <= 19 {
        out.push(step as f64 / 20.0);
        step += 1;
    }
    out
}

/// Disjoint sets with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Connected components of the graph with an edge wherever `C_ij >= theta`.
pub fn threshold_components(c: &ConsensusMatrix, theta: f64) -> Partition {
    let n = c.n();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if c.get(i, j) >= theta {
                uf.union(i, j);
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
    Partition::from_labels(&roots)
}

/// A consolidated clustering and the threshold that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub partition: Partition,
    pub threshold: f64,
    pub merged: bool,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.partition.k()
    }

    pub fn labels(&self) -> &[usize] {
        self.partition.labels()
    }
}

/// Absorbs clusters smaller than `min_size` into the cluster holding their
/// strongest consensus link, smallest cluster first.
pub fn merge_small(
    components: &Partition,
    c: &ConsensusMatrix,
    min_size: usize,
) -> Result<Partition> {
    let n = c.n();
    if components.n() != n {
        return Err(Error::ShapeMismatch(
            "components and consensus matrix differ in size".into(),
        ));
    }
    let mut groups: Vec<Vec<usize>> = components.members();
    let mut owner: Vec<usize> = components.labels().to_vec();

    while groups.len() > 1 {
        // Smallest undersized group; groups keep members sorted so [0] is the smallest index.
        let Some(v) = (0..groups.len())
            .filter(|&g| groups[g].len() < min_size)
            .min_by_key(|&g| (groups[g].len(), groups[g][0]))
        else {
            break;
        };

        let mut best: Option<(u32, usize)> = None;
        for &i in &groups[v] {
            for j in 0..n {
                if owner[j] == v {
                    continue;
                }
                let cij = c.count(i, j);
                if best.is_none_or(|(b, _)| cij > b) {
                    best = Some((cij, j));
                }
            }
        }
        let (_, j_star) = best.expect("at least two groups exist");
        let target = owner[j_star];

        let moved = std::mem::take(&mut groups[v]);
        for &i in &moved {
            owner[i] = target;
        }
        groups[target].extend(moved);
        groups[target].sort_unstable();
        groups.swap_remove(v);
        // Fix ownership of the group swapped into slot v.
        if v < groups.len() {
            for &i in &groups[v] {
                owner[i] = v;
            }
        }
    }
    Ok(Partition::from_labels(&owner))
}

/// Number of clusters per threshold, before and after merging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub threshold: f64,
    pub components: usize,
    pub merged_k: usize,
}

/// Candidate clusterings together with the per-threshold diagnostic table.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub candidates: Vec<Clustering>,
    pub table: Vec<ThresholdRow>,
}

pub fn candidate_set(c: &ConsensusMatrix, cfg: &ConsensusConfig) -> Result<CandidateSet> {
    cfg.validate()?;
    let min_size = cfg.min_size(c.n());
    let mut candidates: Vec<Clustering> = Vec::new();
    let mut table = Vec::new();
    for &theta in &cfg.thresholds {
        let comps = threshold_components(c, theta);
        let merged = merge_small(&comps, c, min_size)?;
        table.push(ThresholdRow {
            threshold: theta,
            components: comps.k(),
            merged_k: merged.k(),
        });
        if merged.k() < 2 || candidates.iter().any(|cand| cand.partition == merged) {
            continue;
        }
        let was_merged = merged != comps;
        candidates.push(Clustering {
            partition: merged,
            threshold: theta,
            merged: was_merged,
        });
    }
    Ok(CandidateSet { candidates, table })
}

/// One clustering per threshold after merging, deduplicated (lowest threshold
/// kept) and without single-cluster outcomes.
pub fn candidate_clusterings(
    c: &ConsensusMatrix,
    cfg: &ConsensusConfig,
) -> Result<Vec<Clustering>> {
    let set = candidate_set(c, cfg)?;
    if set.candidates.is_empty() {
        return Err(Error::NoCandidates {
            table: format_table(&set.table),
        });
    }
    Ok(set.candidates)
}

pub fn format_table(table: &[ThresholdRow]) -> String {
    table
        .iter()
        .map(|r| {
            format!(
                "theta={:.2}: {} components -> K={}",
                r.threshold, r.components, r.merged_k
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}
