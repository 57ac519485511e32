//! Simulation benchmark: replicas per scenario, summary tables, ARI-vs-R
//! trajectories and generator-set log-likelihood series.

use serde::{Deserialize, Serialize};

use super::pipeline::{self, Method, Prepared, RunOutcome};
use super::preprocess::Preprocessing;
use crate::consensus::{ConsensusConfig, ConsensusMatrix};
use crate::error::{config_err, Result};
use crate::metrics;
use crate::partition::Partition;
use crate::rng::RngStream;
use crate::sampling::{self, BaselineConfig};
use crate::simgen::{self, ScenarioSpec};

pub const DEFAULT_CHECKPOINTS: [usize; 4] = [10, 50, 100, 200];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub methods: Vec<Method>,
    pub consensus: ConsensusConfig,
    pub checkpoints: Vec<usize>,
    pub s: f64,
    pub k_max: Option<usize>,
    pub seed: u64,
    /// Overrides the replica count of every scenario when set.
    pub replicas: Option<usize>,
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Dpp, Method::Uniform],
            consensus: ConsensusConfig::default(),
            checkpoints: DEFAULT_CHECKPOINTS.to_vec(),
            s: 1.0,
            k_max: None,
            seed: 0,
            replicas: None,
            threads: None,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        self.consensus.validate()?;
        if self.methods.is_empty() {
            return config_err("no methods selected");
        }
        if self
            .checkpoints
            .iter()
            .any(|&c| c == 0 || c > self.consensus.runs)
        {
            return config_err(format!(
                "checkpoints must lie in [1, {}]",
                self.consensus.runs
            ));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return config_err("checkpoints must be strictly ascending");
        }
        if !(self.s > 0.0) {
            return config_err("bandwidth multiplier s must be positive");
        }
        Ok(())
    }
}

/// Outcome of one method on one replica dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicaResult {
    pub scenario: String,
    pub replica: usize,
    pub method: Method,
    pub p: usize,
    pub true_k: usize,
    pub k_hat: Option<usize>,
    pub ari: Option<f64>,
    pub rn: Option<f64>,
    /// `(runs, ARI)` at each checkpoint; `None` where consolidation failed.
    pub trajectory: Vec<(usize, Option<f64>)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub method: Method,
    pub completed: usize,
    pub failed: usize,
    pub ari_mean: f64,
    pub ari_sd: f64,
    pub abs_rn_mean: f64,
    pub abs_rn_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub scenario: String,
    pub method: Method,
    pub runs: usize,
    pub ari_mean: f64,
    pub ari_sd: f64,
    pub count: usize,
}

/// One generator-set log-likelihood, tidy format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoglikRow {
    pub scenario: String,
    pub replica: usize,
    pub method: Method,
    pub draw: usize,
    pub size: usize,
    /// Empty for singular generator sets.
    pub loglik: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub summary: Vec<SummaryRow>,
    pub trajectories: Vec<TrajectoryPoint>,
    pub replicas: Vec<ReplicaResult>,
    #[serde(skip)]
    pub logliks: Vec<LoglikRow>,
}

/// Sample mean and standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    (
        m,
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt(),
    )
}

/// Stream of replica `replica` of scenario `scenario`.
pub fn replica_stream(seed: u64, scenario: usize, replica: usize) -> RngStream {
    RngStream::new(seed, scenario as u64).child(replica as u64)
}

/// Selects at each checkpoint using only the first `checkpoint` runs.
pub fn trajectory(
    prep: &Prepared,
    runs: &[RunOutcome],
    truth: &[usize],
    consensus: &ConsensusConfig,
    checkpoints: &[usize],
) -> Vec<(usize, Option<f64>, Option<usize>)> {
    let mut c = ConsensusMatrix::empty(prep.n());
    let mut done = 0;
    let mut out = Vec::with_capacity(checkpoints.len());
    for &cp in checkpoints {
        for r in &runs[done..cp] {
            c.add(&r.partition).expect("partition sizes match");
        }
        done = cp;
        match pipeline::consolidate(prep, &c, consensus) {
            Ok(sel) => {
                let chosen = &sel.selection.chosen;
                out.push((
                    cp,
                    metrics::ari(chosen.labels(), truth).ok(),
                    Some(chosen.k()),
                ));
            }
            Err(e) => {
                log::warn!("consolidation failed after {cp} runs: {e}");
                out.push((cp, None, None));
            }
        }
    }
    out
}

fn replica(
    cfg: &BenchmarkConfig,
    spec: &ScenarioSpec,
    scenario_idx: usize,
    rep: usize,
    results: &mut BenchmarkResult,
) {
    let name = spec.name();
    let stream = replica_stream(cfg.seed, scenario_idx, rep);
    let fail = |results: &mut BenchmarkResult, p, k, msg: String| {
        for &m in &cfg.methods {
            results.replicas.push(ReplicaResult {
                scenario: name.clone(),
                replica: rep,
                method: m,
                p,
                true_k: k,
                k_hat: None,
                ari: None,
                rn: None,
                trajectory: Vec::new(),
                error: Some(msg.clone()),
            });
        }
    };
    let ds = match simgen::generate_mixture(spec, stream) {
        Ok(d) => d,
        Err(e) => return fail(results, 0, 0, e.to_string()),
    };
    let (p, k) = (ds.p(), ds.k());
    let prep = match Prepared::new(&ds.data, Preprocessing::None, cfg.s) {
        Ok(p) => p,
        Err(e) => return fail(results, p, k, e.to_string()),
    };
    let baseline = match cfg.k_max.map_or_else(
        || Ok(BaselineConfig::default_for(prep.n())),
        |k_max| {
            let b = BaselineConfig { k_max };
            b.validate(prep.n()).map(|_| b)
        },
    ) {
        Ok(b) => b,
        Err(e) => return fail(results, p, k, e.to_string()),
    };
    let run_seed = stream.child(u64::MAX).seed;
    let true_k = Partition::from_labels(&ds.true_labels).k();

    for &method in &cfg.methods {
        let mut row = ReplicaResult {
            scenario: name.clone(),
            replica: rep,
            method,
            p,
            true_k,
            k_hat: None,
            ari: None,
            rn: None,
            trajectory: Vec::new(),
            error: None,
        };
        let runs =
            match pipeline::generate_runs(&prep, method, &baseline, run_seed, cfg.consensus.runs) {
                Ok(r) => r,
                Err(e) => {
                    row.error = Some(e.to_string());
                    results.replicas.push(row);
                    continue;
                }
            };
        results
            .logliks
            .extend(runs.iter().enumerate().map(|(d, r)| LoglikRow {
                scenario: name.clone(),
                replica: rep,
                method,
                draw: d,
                size: r.generators.len(),
                loglik: r.log_likelihood,
            }));

        let mut cps = cfg.checkpoints.clone();
        if cps.last() != Some(&cfg.consensus.runs) {
            cps.push(cfg.consensus.runs);
        }
        let traj = trajectory(&prep, &runs, &ds.true_labels, &cfg.consensus, &cps);
        let &(_, final_ari, final_k) = traj.last().expect("at least one checkpoint");
        row.ari = final_ari;
        row.k_hat = final_k;
        row.rn = final_k.map(|kh| metrics::rn(kh, true_k));
        if final_ari.is_none() {
            row.error = Some(format!(
                "no selectable clustering after {} runs",
                cfg.consensus.runs
            ));
        }
        row.trajectory = traj
            .into_iter()
            .filter(|(cp, _, _)| cfg.checkpoints.contains(cp))
            .map(|(cp, a, _)| (cp, a))
            .collect();
        results.replicas.push(row);
    }
}

/// Runs every scenario and method. Failed replicas are recorded, not fatal.
pub fn benchmark(scenarios: &[ScenarioSpec], cfg: &BenchmarkConfig) -> Result<BenchmarkResult> {
    cfg.validate()?;
    for s in scenarios {
        s.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| crate::error::Error::InvalidConfig(format!("thread pool: {e}")))?;
    let mut results = BenchmarkResult::default();
    pool.install(|| {
        for (si, spec) in scenarios.iter().enumerate() {
            for rep in 0..cfg.replicas.unwrap_or(spec.replicas) {
                log::info!("scenario {} replica {}", spec.name(), rep);
                replica(cfg, spec, si, rep, &mut results);
            }
        }
    });
    summarise(scenarios, cfg, &mut results);
    Ok(results)
}

fn summarise(scenarios: &[ScenarioSpec], cfg: &BenchmarkConfig, results: &mut BenchmarkResult) {
    for spec in scenarios {
        let name = spec.name();
        for &method in &cfg.methods {
            let rows: Vec<&ReplicaResult> = results
                .replicas
                .iter()
                .filter(|r| r.scenario == name && r.method == method)
                .collect();
            let ok: Vec<&&ReplicaResult> = rows.iter().filter(|r| r.ari.is_some()).collect();
            let aris: Vec<f64> = ok.iter().filter_map(|r| r.ari).collect();
            let rns: Vec<f64> = ok.iter().filter_map(|r| r.rn.map(f64::abs)).collect();
            let (ari_mean, ari_sd) = mean_sd(&aris);
            let (abs_rn_mean, abs_rn_sd) = mean_sd(&rns);
            results.summary.push(SummaryRow {
                scenario: name.clone(),
                method,
                completed: ok.len(),
                failed: rows.len() - ok.len(),
                ari_mean,
                ari_sd,
                abs_rn_mean,
                abs_rn_sd,
            });
            for &cp in &cfg.checkpoints {
                let v: Vec<f64> = rows
                    .iter()
                    .filter_map(|r| {
                        r.trajectory
                            .iter()
                            .find(|(c, _)| *c == cp)
                            .and_then(|(_, a)| *a)
                    })
                    .collect();
                let (m, sd) = mean_sd(&v);
                results.trajectories.push(TrajectoryPoint {
                    scenario: name.clone(),
                    method,
                    runs: cp,
                    ari_mean: m,
                    ari_sd: sd,
                    count: v.len(),
                });
            }
        }
    }
}

pub fn format_summary(rows: &[SummaryRow]) -> String {
    let w = rows
        .iter()
        .map(|r| r.scenario.len())
        .max()
        .unwrap_or(8)
        .max(8);
    let mut s = format!(
        "{:<w$} {:<8} {:>5} {:>6} {:>9} {:>9} {:>9} {:>9}\n",
        "scenario", "method", "ok", "failed", "ARI", "sd", "|RN|", "sd"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<w$} {:<8} {:>5} {:>6} {:>9.4} {:>9.4} {:>9.4} {:>9.4}\n",
            r.scenario,
            r.method,
            r.completed,
            r.failed,
            r.ari_mean,
            r.ari_sd,
            r.abs_rn_mean,
            r.abs_rn_sd
        ));
    }
    s
}

/// Log-likelihoods of `draws` DPP and uniform generator sets on one dataset.
pub fn diversity_logliks(
    prep: &Prepared,
    baseline: &BaselineConfig,
    draws: usize,
    seed: u64,
) -> Result<Vec<LoglikRow>> {
    use rayon::prelude::*;
    let mut out = Vec::with_capacity(2 * draws);
    for (tag, method) in [(0u64, Method::Dpp), (1, Method::Uniform)] {
        let rows = (0..draws)
            .into_par_iter()
            .map(|d| {
                let stream = RngStream::new(seed, d as u64).child(tag);
                let gens = match method {
                    Method::Dpp => sampling::sample_dpp(&prep.spectral, stream)?,
                    _ => sampling::sample_uniform(prep.n(), baseline, stream)?,
                };
                let ll =
                    sampling::dpp_log_likelihood(&prep.kernel, &prep.spectral, gens.indices())?;
                Ok(LoglikRow {
                    scenario: String::new(),
                    replica: 0,
                    method,
                    draw: d,
                    size: gens.len(),
                    loglik: ll.is_finite().then_some(ll),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.extend(rows);
    }
    Ok(out)
}

/// Per-method mean and sd of the finite log-likelihoods plus the count of singular sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversitySummary {
    pub method: Method,
    pub draws: usize,
    pub singular: usize,
    pub mean: f64,
    pub sd: f64,
    pub mean_size: f64,
}

pub fn summarise_diversity(rows: &[LoglikRow]) -> Vec<DiversitySummary> {
    [Method::Dpp, Method::Uniform, Method::Kmeans]
        .into_iter()
        .filter_map(|m| {
            let sel: Vec<&LoglikRow> = rows.iter().filter(|r| r.method == m).collect();
            if sel.is_empty() {
                return None;
            }
            let finite: Vec<f64> = sel.iter().filter_map(|r| r.loglik).collect();
            let (mean, sd) = mean_sd(&finite);
            Some(DiversitySummary {
                method: m,
                draws: sel.len(),
                singular: sel.len() - finite.len(),
                mean,
                sd,
                mean_size: sel.iter().map(|r| r.size as f64).sum::<f64>() / sel.len() as f64,
            })
        })
        .collect()
}
