//! Kernel-space scatter statistics and model selection among candidate clusterings.
//!
//! Every quantity is computed from kernel sums only, so the feature map of the
//! kernel never has to be materialised:
//!
//! - `V_S`: mean distance of the mapped points to their overall mean,
//! - `W_k`: the same within cluster `k`, and `W_V = sum_k W_k / (K V_S)`,
//! - `B^2(k, l)`: squared distance between the mapped cluster means,
//! - `B_V`: size-weighted average of `B(k, l)` over cluster pairs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consensus::Clustering;
use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::partition::Partition;

/// Pairs of clusters whose mapped means are closer than this (squared) make a
/// candidate degenerate for the kernel validation index.
pub const MIN_BETWEEN_SQ: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterReport {
    pub v_s: f64,
    pub w_per_cluster: Vec<f64>,
    pub w_v: f64,
    /// `B^2(k, l)`, symmetric with zero diagonal.
    pub b_pairwise: Vec<Vec<f64>>,
    pub b_v: f64,
    pub sizes: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

impl ScatterReport {
    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    /// Smallest and largest off-diagonal `B^2`.
    pub fn between_extremes(&self) -> Option<(f64, f64)> {
        let k = self.k();
        let mut it = (0..k).flat_map(|a| (0..k).filter(move |&b| b != a).map(move |b| (a, b)));
        let (a0, b0) = it.next()?;
        let first = self.b_pairwise[a0][b0];
        Some(it.fold((first, first), |(lo, hi), (a, b)| {
            let v = self.b_pairwise[a][b];
            (lo.min(v), hi.max(v))
        }))
    }
}

pub fn scatter(kernel: &KernelMatrix, partition: &Partition) -> Result<ScatterReport> {
    let n = kernel.n();
    if partition.n() != n {
        return Err(Error::ShapeMismatch(format!(
            "partition covers {} observations, kernel has {n}",
            partition.n()
        )));
    }
    let k = partition.k();
    if k < 2 {
        return Err(Error::InvalidConfig(
            "scatter needs at least two clusters".into(),
        ));
    }
    let labels = partition.labels();
    let sizes = partition.sizes();

    // row_to_cluster[i][c] = sum_{j in c} L_ij
    let row_to_cluster: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![0.0; k];
            for j in 0..n {
                acc[labels[j]] += kernel.get(i, j);
            }
            acc
        })
        .collect();

    // block[a][b] = sum_{i in a, j in b} L_ij
    let mut block = vec![vec![0.0; k]; k];
    for (i, row) in row_to_cluster.iter().enumerate() {
        for (b, v) in row.iter().enumerate() {
            block[labels[i]][b] += v;
        }
    }

    let nf = n as f64;
    let total: f64 = block.iter().flatten().sum();
    let v_s = (0..n)
        .map(|i| {
            let row_sum: f64 = row_to_cluster[i].iter().sum();
            (kernel.get(i, i) - 2.0 * row_sum / nf + total / (nf * nf))
                .max(0.0)
                .sqrt()
        })
        .sum::<f64>()
        / nf;

    let mut w_per_cluster = vec![0.0; k];
    for i in 0..n {
        let c = labels[i];
        let nc = sizes[c] as f64;
        w_per_cluster[c] += (kernel.get(i, i) - 2.0 * row_to_cluster[i][c] / nc
            + block[c][c] / (nc * nc))
            .max(0.0)
            .sqrt();
    }
    for (w, &s) in w_per_cluster.iter_mut().zip(&sizes) {
        *w /= s as f64;
    }
    let w_v = if v_s > 0.0 {
        w_per_cluster.iter().sum::<f64>() / (k as f64 * v_s)
    } else {
        0.0
    };

    let mut b_pairwise = vec![vec![0.0; k]; k];
    let mut weighted = 0.0;
    let mut weight = 0.0;
    for a in 0..k {
        for b in (a + 1)..k {
            let (na, nb) = (sizes[a] as f64, sizes[b] as f64);
            let b2 = (block[a][a] / (na * na) - 2.0 * block[a][b] / (na * nb)
                + block[b][b] / (nb * nb))
                .max(0.0);
            b_pairwise[a][b] = b2;
            b_pairwise[b][a] = b2;
            weighted += na * nb * b2.sqrt();
            weight += na * nb;
        }
    }
    let b_v = weighted / weight;

    let warnings = sizes
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == 1)
        .map(|(c, _)| format!("cluster {c} is a singleton; its within-cluster scatter is 0"))
        .collect();

    Ok(ScatterReport {
        v_s,
        w_per_cluster,
        w_v,
        b_pairwise,
        b_v,
        sizes,
        warnings,
    })
}

/// `1 - n/(n-1) * W_V / (W_V + B_V)`.
pub fn similarity_ratio(report: &ScatterReport, n: usize) -> Result<f64> {
    let denom = report.w_v + report.b_v;
    if !(denom > 0.0) {
        return Err(Error::DegenerateScatter);
    }
    let nf = n as f64;
    Ok(1.0 - nf / (nf - 1.0) * report.w_v / denom)
}

/// `(B_max / B_min) * sum over ordered pairs k != l of 1 / B^2(k, l)`.
///
/// `None` when some pair of cluster means (nearly) coincides.
pub fn between_penalty(report: &ScatterReport) -> Option<f64> {
    let (lo, hi) = report.between_extremes()?;
    if lo <= MIN_BETWEEN_SQ {
        return None;
    }
    let k = report.k();
    let inv_sum: f64 = (0..k)
        .flat_map(|a| (0..k).filter(move |&b| b != a).map(move |b| (a, b)))
        .map(|(a, b)| 1.0 / report.b_pairwise[a][b])
        .sum();
    Some(hi / lo * inv_sum)
}

/// Scores of one candidate clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub threshold: f64,
    pub k: usize,
    pub merged: bool,
    pub w_v: f64,
    pub b_v: f64,
    pub sr: Option<f64>,
    pub b_tilde: Option<f64>,
    pub kvi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub chosen: Clustering,
    pub chosen_index: usize,
    pub scores: Vec<CandidateScore>,
    pub alpha: f64,
}

/// Picks the candidate minimising `KVI = alpha W_V + B~`, with `alpha` the `B~`
/// of the candidate with the most clusters. Ties go to more clusters, then the
/// lower threshold. Candidates with coinciding cluster means are excluded.
pub fn kvi(candidates: &[(Clustering, ScatterReport)]) -> Result<SelectionResult> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates {
            table: "empty candidate list".into(),
        });
    }
    let mut scores: Vec<CandidateScore> = candidates
        .iter()
        .map(|(c, r)| {
            let b_tilde = between_penalty(r);
            CandidateScore {
                threshold: c.threshold,
                k: c.k(),
                merged: c.merged,
                w_v: r.w_v,
                b_v: r.b_v,
                sr: similarity_ratio(r, c.partition.n()).ok(),
                b_tilde,
                kvi: None,
                excluded: match (c.k() < 2, b_tilde) {
                    (true, _) => Some("fewer than two clusters".into()),
                    (false, None) => Some(format!("some B^2 <= {MIN_BETWEEN_SQ:e}")),
                    (false, Some(_)) => None,
                },
            }
        })
        .collect();

    let retained: Vec<usize> = (0..scores.len())
        .filter(|&i| scores[i].excluded.is_none())
        .collect();
    let Some(&alpha_idx) = retained.iter().min_by(|&&a, &&b| {
        scores[b]
            .k
            .cmp(&scores[a].k)
            .then(scores[a].threshold.total_cmp(&scores[b].threshold))
    }) else {
        let reasons = scores
            .iter()
            .map(|s| {
                format!(
                    "theta={:.2} K={}: {}",
                    s.threshold,
                    s.k,
                    s.excluded.as_deref().unwrap_or("")
                )
            })
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::NoCandidates { table: reasons });
    };
    let alpha = scores[alpha_idx]
        .b_tilde
        .expect("retained candidates have a penalty");

    for &i in &retained {
        let s = &mut scores[i];
        s.kvi = Some(alpha * s.w_v + s.b_tilde.expect("retained"));
    }
    let chosen_index = *retained
        .iter()
        .min_by(|&&a, &&b| {
            let (sa, sb) = (&scores[a], &scores[b]);
            sa.kvi
                .unwrap()
                .total_cmp(&sb.kvi.unwrap())
                .then(sb.k.cmp(&sa.k))
                .then(sa.threshold.total_cmp(&sb.threshold))
        })
        .expect("retained is non-empty");

    Ok(SelectionResult {
        chosen: candidates[chosen_index].0.clone(),
        chosen_index,
        scores,
        alpha,
    })
}

/// Computes scatter for every candidate and selects by KVI.
pub fn select(kernel: &KernelMatrix, candidates: Vec<Clustering>) -> Result<SelectionResult> {
    let scored = candidates
        .into_iter()
        .map(|c| scatter(kernel, &c.partition).map(|r| (c, r)))
        .collect::<Result<Vec<_>>>()?;
    kvi(&scored)
}
