//! Writing simulated datasets to disk.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::benchmark::replica_stream;
use super::io;
use crate::error::{config_err, Result};
use crate::simgen::{self, LabeledDataset, MixtureModel, ScenarioSpec};

/// JSON sidecar stored next to each simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub scenario: ScenarioSpec,
    pub scenario_id: usize,
    pub replica: usize,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub counts: Vec<usize>,
    pub shrink_steps: u32,
    pub model: MixtureModel,
}

/// Resolves a 1-based grid index or a scenario name such as `n150_pmedium_klow`.
pub fn scenario_by_id(id: &str) -> Result<(usize, ScenarioSpec)> {
    let grid = simgen::scenario_grid();
    if let Ok(i) = id.parse::<usize>() {
        if (1..=grid.len()).contains(&i) {
            return Ok((i, grid[i - 1].clone()));
        }
        return config_err(format!(
            "scenario id must lie in 1..={}, got {i}",
            grid.len()
        ));
    }
    match grid.iter().position(|s| s.name() == id) {
        Some(i) => Ok((i + 1, grid[i].clone())),
        None => config_err(format!("unknown scenario '{id}'")),
    }
}

pub fn generate_replica(
    spec: &ScenarioSpec,
    scenario_id: usize,
    replica: usize,
    seed: u64,
) -> Result<(LabeledDataset, DatasetMeta)> {
    let ds = simgen::generate_mixture(spec, replica_stream(seed, scenario_id - 1, replica))?;
    let meta = DatasetMeta {
        scenario: spec.clone(),
        scenario_id,
        replica,
        seed,
        n: ds.data.n(),
        p: ds.p(),
        k: ds.k(),
        counts: ds.counts(),
        shrink_steps: ds.shrink_steps,
        model: ds.model.clone(),
    };
    Ok((ds, meta))
}

/// Writes `<stem>.csv`, `<stem>_labels.csv` and `<stem>.json` into `dir`.
pub fn write_dataset(
    dir: &Path,
    stem: &str,
    ds: &LabeledDataset,
    meta: &DatasetMeta,
) -> Result<PathBuf> {
    let features = dir.join(format!("{stem}.csv"));
    io::write_features(&ds.data, None, io::create_file(&features)?)?;
    io::write_labels(
        &ds.true_labels,
        io::create_file(&dir.join(format!("{stem}_labels.csv")))?,
    )?;
    serde_json::to_writer_pretty(io::create_file(&dir.join(format!("{stem}.json")))?, meta)?;
    Ok(features)
}

/// Generates and writes `replicas` datasets per scenario. `scenarios` holds
/// `(1-based grid id, spec)` pairs.
pub fn simulate(
    scenarios: &[(usize, ScenarioSpec)],
    replicas: usize,
    seed: u64,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let jobs: Vec<(usize, &ScenarioSpec, usize)> = scenarios
        .iter()
        .flat_map(|(id, s)| (0..replicas).map(move |r| (*id, s, r)))
        .collect();
    jobs.par_iter()
        .map(|&(id, spec, r)| {
            let (ds, meta) = generate_replica(spec, id, r, seed)?;
            write_dataset(dir, &format!("{}_r{:02}", spec.name(), r), &ds, &meta)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_and_names() {
        let (i, s) = scenario_by_id("1").unwrap();
        assert_eq!((i, s.n), (1, 150));
        let (j, t) = scenario_by_id(&s.name()).unwrap();
        assert_eq!((j, t), (1, s));
        assert!(scenario_by_id("0").is_err());
        assert!(scenario_by_id("25").is_err());
        assert!(scenario_by_id("nope").is_err());
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (id, spec) = scenario_by_id("n150_plow_klow").unwrap();
        let paths = simulate(&[(id, spec)], 2, 7, dir.path()).unwrap();
        assert_eq!(paths.len(), 2);
        let table = io::read_features(&paths[0], io::HeaderMode::Auto).unwrap();
        let meta: DatasetMeta = serde_json::from_str(
            &std::fs::read_to_string(paths[0].with_extension("json")).unwrap(),
        )
        .unwrap();
        assert_eq!(table.data.n(), 150);
        assert_eq!(table.data.p(), meta.p);
        let labels =
            io::read_labels(&dir.path().join("n150_plow_klow_r00_labels.csv"), 150).unwrap();
        assert_eq!(labels.len(), 150);

        let (again, _) = generate_replica(&meta.scenario, id, 0, 7).unwrap();
        assert_eq!(again.data, table.data);
    }
}
