//! External agreement measures against a reference labelling.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Cross-tabulation of two labellings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    n: u64,
}

impl ContingencyTable {
    pub fn new<A, B>(a: &[A], b: &[B]) -> Result<Self>
    where
        A: Eq + std::hash::Hash,
        B: Eq + std::hash::Hash,
    {
        if a.len() != b.len() {
            return Err(Error::ShapeMismatch(format!(
                "label vectors differ in length ({} vs {})",
                a.len(),
                b.len()
            )));
        }
        let ids_a = dense_ids(a);
        let ids_b = dense_ids(b);
        let ka = ids_a.iter().max().map_or(0, |m| m + 1);
        let kb = ids_b.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![vec![0u64; kb]; ka];
        for (&i, &j) in ids_a.iter().zip(&ids_b) {
            counts[i][j] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..kb).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        Ok(Self {
            counts,
            row_sums,
            col_sums,
            n: a.len() as u64,
        })
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    pub fn n(&self) -> u64 {
        self.n
    }
}

fn dense_ids<T: Eq + std::hash::Hash>(labels: &[T]) -> Vec<usize> {
    let mut ids = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(l).or_insert(next)
        })
        .collect()
}

#[inline]
fn pairs(m: u64) -> u128 {
    let m = m as u128;
    m * m.saturating_sub(1) / 2
}

/// Pair-counting statistics behind the adjusted Rand index, kept as exact integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    /// Pairs together in both labellings.
    pub together_both: u128,
    /// Pairs together in the first labelling.
    pub together_a: u128,
    /// Pairs together in the second labelling.
    pub together_b: u128,
    pub total: u128,
}

impl PairCounts {
    pub fn from_table(t: &ContingencyTable) -> Self {
        Self {
            together_both: t.counts.iter().flatten().map(|&c| pairs(c)).sum(),
            together_a: t.row_sums.iter().map(|&c| pairs(c)).sum(),
            together_b: t.col_sums.iter().map(|&c| pairs(c)).sum(),
            total: pairs(t.n),
        }
    }

    /// Hubert-Arabie adjusted Rand index.
    ///
    /// Multiplying numerator and denominator by `total` keeps every term integral
    /// until the single final division.
    pub fn ari(&self) -> f64 {
        let (ij, a, b, t) = (
            self.together_both as i128,
            self.together_a as i128,
            self.together_b as i128,
            self.total as i128,
        );
        // numerator * t = ij*t - a*b ; denominator * 2t = (a + b)*t - 2ab
        let num = 2 * (ij * t - a * b);
        let den = (a + b) * t - 2 * a * b;
        if den == 0 {
            // Both labellings are trivial in the same way (all-in-one or all singletons).
            return 1.0;
        }
        num as f64 / den as f64
    }
}

/// Adjusted Rand index between two labellings of the same observations.
pub fn ari<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Eq + std::hash::Hash,
    B: Eq + std::hash::Hash,
{
    if a.len() < 2 {
        return Err(Error::ShapeMismatch(
            "ARI needs at least two observations".into(),
        ));
    }
    let table = ContingencyTable::new(a, b)?;
    Ok(PairCounts::from_table(&table).ari())
}

/// Relative square-root difference between estimated and true cluster counts.
pub fn rn(g_hat: usize, g_true: usize) -> f64 {
    let (h, g) = ((g_hat as f64).sqrt(), (g_true as f64).sqrt());
    (h - g) / g
}
