//! End-to-end consensus clustering: kernel, R sampled partitions, consensus,
//! candidate extraction and KVI selection.

use std::time::Instant;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::preprocess::{self, BoxCoxColumn, Preprocessing};
use crate::consensus::{self, CandidateSet, ConsensusConfig, ConsensusMatrix, ThresholdRow};
use crate::data::{DataMatrix, SquaredDistances};
use crate::error::{config_err, Error, Result};
use crate::kernel::{self, BandwidthConfig, KernelMatrix, SpectralDecomposition};
use crate::metrics;
use crate::partition::{self, Partition};
use crate::rng::RngStream;
use crate::sampling::{self, BaselineConfig, GeneratorSet, SamplingMethod};
use crate::validation::{self, CandidateScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dpp,
    Uniform,
    Kmeans,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dpp => "dpp",
            Method::Uniform => "uniform",
            Method::Kmeans => "kmeans",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "dpp" => Ok(Self::Dpp),
            "uniform" => Ok(Self::Uniform),
            "kmeans" => Ok(Self::Kmeans),
            other => Err(format!("unknown method '{other}' (dpp, uniform, kmeans)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub method: Method,
    pub consensus: ConsensusConfig,
    /// Bandwidth multiplier `s`.
    pub s: f64,
    /// Upper bound of the cluster-count draw for the uniform and k-means
    /// baselines; `None` uses [`BaselineConfig::default_for`].
    pub k_max: Option<usize>,
    pub seed: u64,
    pub repetitions: usize,
    pub preprocessing: Preprocessing,
    /// Worker threads; `None` uses every core. Never affects results.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            method: Method::Dpp,
            consensus: ConsensusConfig::default(),
            s: 1.0,
            k_max: None,
            seed: 0,
            repetitions: 10,
            preprocessing: Preprocessing::None,
            threads: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.consensus.validate()?;
        if !(self.s > 0.0 && self.s.is_finite()) {
            return config_err(format!(
                "bandwidth multiplier s must be positive, got {}",
                self.s
            ));
        }
        if self.repetitions == 0 {
            return config_err("repetitions must be at least 1");
        }
        if self.threads == Some(0) {
            return config_err("threads must be at least 1");
        }
        Ok(())
    }

    pub fn baseline(&self, n: usize) -> Result<BaselineConfig> {
        let cfg = self.k_max.map_or_else(
            || BaselineConfig::default_for(n),
            |k_max| BaselineConfig { k_max },
        );
        cfg.validate(n)?;
        Ok(cfg)
    }

    pub fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = self.threads {
            b = b.num_threads(t);
        }
        b.build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
    }
}

/// Immutable per-dataset state shared by every run.
#[derive(Debug)]
pub struct Prepared {
    pub data: DataMatrix,
    pub distances: SquaredDistances,
    pub bandwidth: BandwidthConfig,
    pub kernel: KernelMatrix,
    pub spectral: SpectralDecomposition,
    pub boxcox: Option<Vec<BoxCoxColumn>>,
}

impl Prepared {
    pub fn new(raw: &DataMatrix, preprocessing: Preprocessing, s: f64) -> Result<Self> {
        let (data, boxcox) = preprocess::apply(raw, preprocessing)?;
        let distances = SquaredDistances::new(&data);
        let bandwidth = BandwidthConfig::new(kernel::estimate_bandwidth_from(&distances)?, s)?;
        let kernel = kernel::build_rbf_kernel_from(&distances, &bandwidth)?;
        let spectral = kernel::eigendecompose(&kernel)?;
        Ok(Self {
            data,
            distances,
            bandwidth,
            kernel,
            spectral,
            boxcox,
        })
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }
}

/// One sampled partition with its generator set.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub partition: Partition,
    pub generators: Vec<usize>,
    /// DPP log-likelihood of the generator set; `None` when it is singular.
    pub log_likelihood: Option<f64>,
}

/// Draws a generator set and partition for run `run`.
pub fn single_run(
    prep: &Prepared,
    method: Method,
    baseline: &BaselineConfig,
    stream: RngStream,
) -> Result<RunOutcome> {
    let mut rng = stream.rng();
    let n = prep.n();
    let (partition, gens) = match method {
        Method::Dpp => {
            let gens =
                sampling::sample_dpp_with(&prep.spectral, sampling::MIN_GENERATORS, &mut rng)?;
            (
                partition::voronoi_assign_from(&prep.distances, &gens)?,
                gens,
            )
        }
        Method::Uniform => {
            let gens = sampling::sample_uniform_with(n, baseline, &mut rng)?;
            (
                partition::voronoi_assign_from(&prep.distances, &gens)?,
                gens,
            )
        }
        Method::Kmeans => {
            let k = sampling::sample_cluster_count(baseline, &mut rng);
            let gens = match sampling::kmeanspp_init_with(&prep.data, k, &mut rng) {
                Ok(g) => g,
                // Fewer distinct points than k: fall back to a uniform k-subset.
                Err(Error::DegenerateData(_)) => GeneratorSet::new(
                    index::sample(&mut rng, n, k).into_vec(),
                    n,
                    SamplingMethod::KMeansPP,
                )?,
                Err(e) => return Err(e),
            };
            let centers = gens.centers(&prep.data);
            let p = partition::lloyd_kmeans(
                &prep.data,
                &centers,
                partition::DEFAULT_MAX_ITER,
                partition::DEFAULT_TOL,
            )?;
            (p, gens)
        }
    };
    let ll = sampling::dpp_log_likelihood(&prep.kernel, &prep.spectral, gens.indices())?;
    Ok(RunOutcome {
        partition,
        generators: gens.indices().to_vec(),
        log_likelihood: ll.is_finite().then_some(ll),
    })
}

/// Runs `runs` independent draws; run `r` uses stream `(seed, r)` so the
/// output does not depend on scheduling.
pub fn generate_runs(
    prep: &Prepared,
    method: Method,
    baseline: &BaselineConfig,
    seed: u64,
    runs: usize,
) -> Result<Vec<RunOutcome>> {
    (0..runs as u64)
        .into_par_iter()
        .map(|r| single_run(prep, method, baseline, RngStream::new(seed, r)))
        .collect()
}

/// Candidates and KVI selection for a consensus matrix.
#[derive(Debug, Clone)]
pub struct Consolidated {
    pub candidates: CandidateSet,
    pub selection: validation::SelectionResult,
}

pub fn consolidate(
    prep: &Prepared,
    c: &ConsensusMatrix,
    cfg: &ConsensusConfig,
) -> Result<Consolidated> {
    let candidates = consensus::candidate_set(c, cfg)?;
    if candidates.candidates.is_empty() {
        return Err(Error::NoCandidates {
            table: consensus::format_table(&candidates.table),
        });
    }
    let selection = validation::select(&prep.kernel, candidates.candidates.clone())?;
    Ok(Consolidated {
        candidates,
        selection,
    })
}

#[derive(Debug, Clone, Default)]
pub struct Timings {
    pub prepare_s: f64,
    pub runs_s: f64,
    pub consensus_s: f64,
    pub selection_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub generators: usize,
    pub clusters: usize,
    pub log_likelihood: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub n: usize,
    pub p: usize,
    pub sigma2_hat: f64,
    pub expected_dpp_size: f64,
    pub k_hat: usize,
    pub chosen_threshold: f64,
    pub chosen_merged: bool,
    pub labels: Vec<usize>,
    pub alpha: f64,
    pub scores: Vec<CandidateScore>,
    pub thresholds: Vec<ThresholdRow>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ari: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rn: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub true_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub boxcox: Option<Vec<BoxCoxColumn>>,
    pub runs: Vec<RunSummary>,
    /// Wall-clock timings, kept out of the serialized report so that seeded
    /// runs serialize identically.
    #[serde(skip)]
    pub timings: Timings,
    #[serde(skip)]
    pub consensus: Option<ConsensusMatrix>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Full pipeline on raw (not yet preprocessed) data. `truth`, when given,
/// yields ARI and RN of the selected clustering.
pub fn run_pipeline(
    data: &DataMatrix,
    cfg: &PipelineConfig,
    truth: Option<&[usize]>,
) -> Result<RunReport> {
    cfg.validate()?;
    if let Some(t) = truth {
        if t.len() != data.n() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} observations",
                t.len(),
                data.n()
            )));
        }
    }
    let baseline = cfg.baseline(data.n())?;
    cfg.thread_pool()?.install(|| {
        let mut timings = Timings::default();
        let t0 = Instant::now();
        let prep = Prepared::new(data, cfg.preprocessing, cfg.s)?;
        timings.prepare_s = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let runs = generate_runs(&prep, cfg.method, &baseline, cfg.seed, cfg.consensus.runs)?;
        timings.runs_s = t1.elapsed().as_secs_f64();

        let t2 = Instant::now();
        let partitions: Vec<Partition> = runs.iter().map(|r| r.partition.clone()).collect();
        let c = consensus::accumulate(&partitions, prep.n())?;
        timings.consensus_s = t2.elapsed().as_secs_f64();

        let t3 = Instant::now();
        let out = consolidate(&prep, &c, &cfg.consensus)?;
        timings.selection_s = t3.elapsed().as_secs_f64();

        let chosen = &out.selection.chosen;
        let (ari, rn, true_k) = match truth {
            Some(t) => {
                let tp = Partition::from_labels(t);
                (
                    Some(metrics::ari(chosen.labels(), t)?),
                    Some(metrics::rn(chosen.k(), tp.k())),
                    Some(tp.k()),
                )
            }
            None => (None, None, None),
        };
        Ok(RunReport {
            config: cfg.clone(),
            n: prep.n(),
            p: prep.data.p(),
            sigma2_hat: prep.bandwidth.sigma2_hat,
            expected_dpp_size: prep.spectral.expected_dpp_size(),
            k_hat: chosen.k(),
            chosen_threshold: chosen.threshold,
            chosen_merged: chosen.merged,
            labels: chosen.labels().to_vec(),
            alpha: out.selection.alpha,
            scores: out.selection.scores.clone(),
            thresholds: out.candidates.table.clone(),
            ari,
            rn,
            true_k,
            boxcox: prep.boxcox.clone(),
            runs: runs
                .iter()
                .enumerate()
                .map(|(i, r)| RunSummary {
                    run: i,
                    generators: r.generators.len(),
                    clusters: r.partition.k(),
                    log_likelihood: r.log_likelihood,
                })
                .collect(),
            timings,
            consensus: Some(c),
        })
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6}"))
}

/// Aligned plain-text summary of a report.
pub fn format_report(r: &RunReport) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "method {}  n {}  p {}  R {}  seed {}\n",
        r.config.method, r.n, r.p, r.config.consensus.runs, r.config.seed
    ));
    s.push_str(&format!(
        "sigma2_hat {:.6}  E|Y| {:.3}  K_hat {}  theta {:.2}  alpha {:.6}\n",
        r.sigma2_hat, r.expected_dpp_size, r.k_hat, r.chosen_threshold, r.alpha
    ));
    if let (Some(a), Some(rn), Some(k)) = (r.ari, r.rn, r.true_k) {
        s.push_str(&format!("ARI {a:.4}  RN {rn:.4}  true K {k}\n"));
    }
    s.push('\n');
    s.push_str(&format!(
        "{:>6} {:>11} {:>9}\n",
        "theta", "components", "merged_K"
    ));
    for t in &r.thresholds {
        s.push_str(&format!(
            "{:>6.2} {:>11} {:>9}\n",
            t.threshold, t.components, t.merged_k
        ));
    }
    s.push('\n');
    s.push_str(&format!(
        "{:>6} {:>4} {:>6} {:>12} {:>12} {:>12} {:>14} {:>14}  {}\n",
        "theta", "K", "merged", "W_V", "B_V", "SR", "B_tilde", "KVI", "note"
    ));
    for sc in &r.scores {
        let chosen = sc.threshold == r.chosen_threshold && sc.k == r.k_hat;
        let note = match (&sc.excluded, chosen) {
            (Some(e), _) => e.clone(),
            (None, true) => "chosen".into(),
            _ => String::new(),
        };
        s.push_str(&format!(
            "{:>6.2} {:>4} {:>6} {:>12.6} {:>12.6} {:>12} {:>14} {:>14}  {}\n",
            sc.threshold,
            sc.k,
            sc.merged,
            sc.w_v,
            sc.b_v,
            opt(sc.sr),
            opt(sc.b_tilde),
            opt(sc.kvi),
            note
        ));
    }
    let t = &r.timings;
    s.push_str(&format!(
        "\ntimings: prepare {:.2}s  runs {:.2}s  consensus {:.2}s  selection {:.2}s\n",
        t.prepare_s, t.runs_s, t.consensus_s, t.selection_s
    ));
    s
}
