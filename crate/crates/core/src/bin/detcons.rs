use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use detcons::app::benchmark::{self, BenchmarkConfig, LoglikRow};
use detcons::app::io::{self, HeaderMode};
use detcons::app::pipeline::{self, Method, PipelineConfig, Prepared};
use detcons::app::preprocess::Preprocessing;
use detcons::app::simulate;
use detcons::consensus::ConsensusConfig;
use detcons::error::{Error, Result};
use detcons::partition::Partition;
use detcons::simgen::{self, ScenarioSpec};

#[derive(Parser)]
#[command(
    name = "detcons",
    version,
    about = "Consensus clustering with DPP-seeded Voronoi partitions"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a CSV of numeric features.
    Cluster(ClusterArgs),
    /// Write simulated Gaussian-mixture datasets.
    Simulate(SimulateArgs),
    /// Run methods over simulated scenarios and summarise ARI and |RN|.
    Benchmark(BenchmarkArgs),
    /// Log-likelihoods of DPP and uniform generator sets, as tidy CSV.
    DiagnoseDiversity(DiversityArgs),
}

#[derive(Args)]
struct ConsensusArgs {
    #[arg(long, default_value_t = 200)]
    runs: usize,
    /// Lowest consensus threshold considered.
    #[arg(long, default_value_t = 0.6)]
    tau: f64,
    /// Clusters need at least ceil(n^a) members.
    #[arg(long = "min-size-exp", default_value_t = 0.5)]
    min_size_exp: f64,
    /// Bandwidth multiplier.
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    /// Largest cluster count drawn by the uniform and k-means baselines.
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ConsensusArgs {
    fn consensus(&self) -> ConsensusConfig {
        ConsensusConfig::new(self.runs, self.tau, self.min_size_exp)
    }
}

#[derive(Args)]
struct ClusterArgs {
    input: PathBuf,
    /// Ground-truth labels, one per row; enables ARI and RN.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value = "dpp")]
    method: Method,
    #[command(flatten)]
    common: ConsensusArgs,
    #[arg(long, default_value = "none")]
    preprocess: Preprocessing,
    /// Header row handling: auto, present or absent.
    #[arg(long, default_value = "auto")]
    header: HeaderMode,
    /// JSON report path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dense consensus matrix CSV.
    #[arg(long)]
    consensus: Option<PathBuf>,
    /// Text report path (default: stdout when --out is set).
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// 1-based grid index or name such as n150_pmedium_klow. Repeatable.
    #[arg(long = "scenario-id")]
    scenario_id: Vec<String>,
    /// Every scenario of the design.
    #[arg(long, conflicts_with = "scenario_id")]
    grid: bool,
    #[arg(long = "max-overlap")]
    max_overlap: Option<f64>,
    /// Eccentricity cap on component covariances; 1 disables it.
    #[arg(long = "max-eccentricity")]
    max_eccentricity: Option<f64>,
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<Vec<(usize, ScenarioSpec)>> {
        let mut out: Vec<(usize, ScenarioSpec)> = if self.grid {
            simgen::scenario_grid()
                .into_iter()
                .enumerate()
                .map(|(i, s)| (i + 1, s))
                .collect()
        } else {
            self.scenario_id
                .iter()
                .map(|id| simulate::scenario_by_id(id))
                .collect::<Result<_>>()?
        };
        for (_, s) in &mut out {
            self.apply(s);
        }
        Ok(out)
    }

    fn apply(&self, s: &mut ScenarioSpec) {
        if let Some(o) = self.max_overlap {
            s.max_pairwise_overlap = o;
        }
        if let Some(e) = self.max_eccentricity {
            s.max_eccentricity = e;
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenarios: ScenarioArgs,
    #[arg(long, default_value_t = simgen::DEFAULT_REPLICAS)]
    replicas: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// File listing scenarios: a JSON array of scenario objects, or one id or name per line.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    #[command(flatten)]
    select: ScenarioArgs,
    #[arg(long, value_delimiter = ',', default_value = "dpp,uniform")]
    methods: Vec<Method>,
    #[command(flatten)]
    common: ConsensusArgs,
    /// Replicas per scenario (default: the scenario's own count).
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "10,50,100,200")]
    checkpoints: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiversityArgs {
    /// Features CSV. Alternatively use --scenario-id.
    input: Option<PathBuf>,
    #[command(flatten)]
    select: ScenarioArgs,
    #[arg(long, default_value_t = 0)]
    replica: usize,
    #[arg(long, default_value_t = 200)]
    draws: usize,
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "none")]
    preprocess: Preprocessing,
    #[arg(long, default_value = "auto")]
    header: HeaderMode,
    /// Tidy CSV of per-draw log-likelihoods.
    #[arg(long)]
    out: PathBuf,
    /// Binned histogram CSV.
    #[arg(long)]
    histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    bins: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let threads = cli.threads;
    let res = match cli.command {
        Command::Cluster(a) => cluster(a, threads),
        Command::Simulate(a) => simulate_cmd(a, threads),
        Command::Benchmark(a) => benchmark_cmd(a, threads),
        Command::DiagnoseDiversity(a) => diversity(a, threads),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    PipelineConfig {
        threads,
        ..Default::default()
    }
    .thread_pool()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    io::create_file(path)?.write_all(text.as_bytes())?;
    Ok(())
}

fn cluster(a: ClusterArgs, threads: Option<usize>) -> Result<()> {
    let table = io::read_features(&a.input, a.header)?;
    let truth = match &a.labels {
        Some(p) => Some(
            Partition::from_labels(&io::read_labels(p, table.data.n())?)
                .labels()
                .to_vec(),
        ),
        None => None,
    };
    let cfg = PipelineConfig {
        method: a.method,
        consensus: a.common.consensus(),
        s: a.common.s,
        k_max: a.common.kmax,
        seed: a.common.seed,
        preprocessing: a.preprocess,
        threads,
        ..Default::default()
    };
    let report = pipeline::run_pipeline(&table.data, &cfg, truth.as_deref())?;
    let json = report.to_json()?;
    let text = pipeline::format_report(&report);
    match &a.out {
        Some(p) => write_text(p, &json)?,
        None => println!("{json}"),
    }
    match (&a.table, &a.out) {
        (Some(p), _) => write_text(p, &text)?,
        (None, Some(_)) => print!("{text}"),
        (None, None) => eprint!("{text}"),
    }
    if let (Some(p), Some(c)) = (&a.consensus, &report.consensus) {
        c.write_csv(io::create_file(p)?)?;
    }
    Ok(())
}

fn simulate_cmd(a: SimulateArgs, threads: Option<usize>) -> Result<()> {
    let scenarios = a.scenarios.resolve()?;
    if scenarios.is_empty() {
        return Err(Error::InvalidConfig("pass --scenario-id or --grid".into()));
    }
    let paths =
        pool(threads)?.install(|| simulate::simulate(&scenarios, a.replicas, a.seed, &a.out))?;
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn read_scenario_file(path: &Path) -> Result<Vec<ScenarioSpec>> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(&text)?);
    }
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| simulate::scenario_by_id(l).map(|(_, s)| s))
        .collect()
}

fn benchmark_cmd(a: BenchmarkArgs, threads: Option<usize>) -> Result<()> {
    let mut scenarios = match &a.scenarios {
        Some(p) => read_scenario_file(p)?,
        None => a.select.resolve()?.into_iter().map(|(_, s)| s).collect(),
    };
    if scenarios.is_empty() {
        return Err(Error::InvalidConfig(
            "pass --scenarios, --scenario-id or --grid".into(),
        ));
    }
    for s in &mut scenarios {
        a.select.apply(s);
    }
    let cfg = BenchmarkConfig {
        methods: a.methods,
        consensus: a.common.consensus(),
        checkpoints: a.checkpoints,
        s: a.common.s,
        k_max: a.common.kmax,
        seed: a.common.seed,
        replicas: a.replicas,
        threads,
    };
    let res = benchmark::benchmark(&scenarios, &cfg)?;
    let dir = &a.out;
    io::write_rows(&res.summary, io::create_file(&dir.join("summary.csv"))?)?;
    io::write_rows(
        &res.trajectories,
        io::create_file(&dir.join("trajectories.csv"))?,
    )?;
    io::write_rows(&res.logliks, io::create_file(&dir.join("logliks.csv"))?)?;
    serde_json::to_writer_pretty(io::create_file(&dir.join("benchmark.json"))?, &res)?;
    let text = benchmark::format_summary(&res.summary);
    write_text(&dir.join("summary.txt"), &text)?;
    print!("{text}");
    Ok(())
}

#[derive(serde::Serialize)]
struct HistogramRow {
    method: Method,
    bin: usize,
    lower: f64,
    upper: f64,
    count: usize,
}

fn histogram(rows: &[LoglikRow], bins: usize) -> Vec<HistogramRow> {
    let vals: Vec<f64> = rows.iter().filter_map(|r| r.loglik).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if vals.is_empty() || bins == 0 {
        return Vec::new();
    }
    let width = if hi > lo {
        (hi - lo) / bins as f64
    } else {
        1.0
    };
    let mut out = Vec::new();
    for method in [Method::Dpp, Method::Uniform] {
        let mut counts = vec![0usize; bins];
        for v in rows
            .iter()
            .filter(|r| r.method == method)
            .filter_map(|r| r.loglik)
        {
            counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
        }
        out.extend(
            counts
                .into_iter()
                .enumerate()
                .map(|(b, count)| HistogramRow {
                    method,
                    bin: b,
                    lower: lo + b as f64 * width,
                    upper: lo + (b + 1) as f64 * width,
                    count,
                }),
        );
    }
    out
}

fn diversity(a: DiversityArgs, threads: Option<usize>) -> Result<()> {
    let (data, name) = match (&a.input, a.select.resolve()?.as_slice()) {
        (Some(p), []) => {
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            (io::read_features(p, a.header)?.data, stem)
        }
        (None, [(id, spec)]) => {
            let (ds, _) = simulate::generate_replica(spec, *id, a.replica, a.seed)?;
            (ds.data, spec.name())
        }
        _ => {
            return Err(Error::InvalidConfig(
                "pass either a features CSV or exactly one --scenario-id".into(),
            ))
        }
    };
    let cfg = PipelineConfig {
        s: a.s,
        k_max: a.kmax,
        preprocessing: a.preprocess,
        threads,
        ..Default::default()
    };
    cfg.validate()?;
    let baseline = cfg.baseline(data.n())?;
    let mut rows = pool(threads)?.install(|| {
        let prep = Prepared::new(&data, a.preprocess, a.s)?;
        benchmark::diversity_logliks(&prep, &baseline, a.draws, a.seed)
    })?;
    for r in &mut rows {
        r.scenario.clone_from(&name);
        r.replica = a.replica;
    }
    io::write_rows(&rows, io::create_file(&a.out)?)?;
    if let Some(p) = &a.histogram {
        io::write_rows(&histogram(&rows, a.bins), io::create_file(p)?)?;
    }
    println!(
        "{:<8} {:>6} {:>9} {:>12} {:>10} {:>8}",
        "method", "draws", "singular", "mean", "sd", "mean|Y|"
    );
    for s in benchmark::summarise_diversity(&rows) {
        println!(
            "{:<8} {:>6} {:>9} {:>12.4} {:>10.4} {:>8.2}",
            s.method, s.draws, s.singular, s.mean, s.sd, s.mean_size
        );
    }
    Ok(())
}
