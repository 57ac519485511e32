//! Acceptance suite. Prints one PASS/FAIL line per criterion. Failures make the
//! process exit non-zero only when `ACCEPTANCE_STRICT=1` is set.
//!
//! Run with `cargo test --release --test acceptance`. A subset can be selected
//! by passing criterion numbers: `cargo test --test acceptance -- 1 4 9`.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use detcons::app::benchmark::{self, BenchmarkConfig};
use detcons::app::io::{self, HeaderMode};
use detcons::app::pipeline::{run_pipeline, Method, PipelineConfig, Prepared};
use detcons::app::preprocess::Preprocessing;
use detcons::consensus::{self, ConsensusMatrix};
use detcons::data::DataMatrix;
use detcons::kernel::{self, BandwidthConfig, KernelMatrix};
use detcons::metrics;
use detcons::partition::Partition;
use detcons::rng::RngStream;
use detcons::sampling::{self, BaselineConfig};
use detcons::simgen::{self, Level, ScenarioSpec};
use detcons::validation;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_data(n: usize, p: usize, seed: u64) -> DataMatrix {
    let mut rng = RngStream::new(seed, 0).rng();
    let values = (0..n * p)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    DataMatrix::new(values, n, p).unwrap()
}

fn rbf(data: &DataMatrix) -> KernelMatrix {
    let cfg = BandwidthConfig::estimate(data, 1.0).unwrap();
    kernel::build_rbf_kernel(data, &cfg).unwrap()
}

/// det(L_Y) / det(L + I) for every subset, by LU determinants.
fn subset_law(l: &KernelMatrix) -> Vec<f64> {
    let n = l.n();
    let norm = (l.matrix() + DMatrix::identity(n, n)).determinant();
    (0..1usize << n)
        .map(|mask| {
            let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            if idx.is_empty() {
                1.0 / norm
            } else {
                l.submatrix(&idx).determinant() / norm
            }
        })
        .collect()
}

fn mask_of(items: &[usize]) -> usize {
    items.iter().fold(0, |m, &i| m | 1 << i)
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// `L (L + I)^-1` by direct inversion.
fn marginal_kernel(l: &KernelMatrix) -> DMatrix<f64> {
    let n = l.n();
    let inv = (l.matrix() + DMatrix::identity(n, n))
        .try_inverse()
        .unwrap();
    l.matrix() * inv
}

fn five_point_kernel() -> KernelMatrix {
    let d = DataMatrix::from_rows(&[
        vec![0.0, 0.0],
        vec![1.0, 0.2],
        vec![0.1, 1.1],
        vec![2.0, 2.0],
        vec![0.6, 0.4],
    ])
    .unwrap();
    rbf(&d)
}

fn c1_dpp_law() -> Outcome {
    let draws = 200_000;
    let l = five_point_kernel();
    let spec = kernel::eigendecompose(&l).unwrap();
    let law = subset_law(&l);
    let mut rng = RngStream::new(1, 0).rng();

    let mut freq = vec![0.0; law.len()];
    for _ in 0..draws {
        freq[mask_of(&sampling::sample_dpp_unconditioned(&spec, &mut rng))] += 1.0 / draws as f64;
    }
    let tv_full = tv(&freq, &law);

    // With the minimum-size rejection the law is the same restricted to |Y| >= 2.
    let restricted: Vec<f64> = law
        .iter()
        .enumerate()
        .map(|(m, &p)| if m.count_ones() >= 2 { p } else { 0.0 })
        .collect();
    let z: f64 = restricted.iter().sum();
    let restricted: Vec<f64> = restricted.iter().map(|p| p / z).collect();
    let mut freq_c = vec![0.0; law.len()];
    for _ in 0..draws {
        let g = sampling::sample_dpp_with(&spec, sampling::MIN_GENERATORS, &mut rng).unwrap();
        freq_c[mask_of(g.indices())] += 1.0 / draws as f64;
    }
    let tv_cond = tv(&freq_c, &restricted);
    outcome(
        tv_full <= 0.01 && tv_cond <= 0.01,
        format!(
            "TV unconditioned {tv_full:.5}, TV conditioned on |Y|>=2 {tv_cond:.5} (limit 0.01)"
        ),
    )
}

fn test_kernels() -> Vec<KernelMatrix> {
    [(6, 2, 11), (8, 3, 12), (10, 2, 13)]
        .iter()
        .map(|&(n, p, s)| rbf(&random_data(n, p, s)))
        .collect()
}

fn c2_marginals() -> Outcome {
    let draws = 100_000;
    let mut worst: f64 = 0.0;
    for (t, l) in test_kernels().iter().enumerate() {
        let spec = kernel::eigendecompose(l).unwrap();
        let k = marginal_kernel(l);
        let mut rng = RngStream::new(2, t as u64).rng();
        let mut hits = vec![0usize; l.n()];
        for _ in 0..draws {
            for i in sampling::sample_dpp_unconditioned(&spec, &mut rng) {
                hits[i] += 1;
            }
        }
        for i in 0..l.n() {
            worst = worst.max((hits[i] as f64 / draws as f64 - k[(i, i)]).abs());
        }
    }
    outcome(
        worst <= 0.01,
        format!("max |P(i in Y) - K_ii| = {worst:.5} over 3 kernels (limit 0.01)"),
    )
}

fn c3_expected_size() -> Outcome {
    let draws = 100_000;
    let mut worst: f64 = 0.0;
    for (t, l) in test_kernels().iter().enumerate() {
        let spec = kernel::eigendecompose(l).unwrap();
        let expected = marginal_kernel(l).trace();
        let mut rng = RngStream::new(3, t as u64).rng();
        let total: usize = (0..draws)
            .map(|_| sampling::sample_dpp_unconditioned(&spec, &mut rng).len())
            .sum();
        worst = worst.max((total as f64 / draws as f64 - expected).abs());
    }
    outcome(
        worst <= 0.05,
        format!("max |mean |Y| - tr K| = {worst:.5} (limit 0.05)"),
    )
}

fn brute_ari(a: &[usize], b: &[usize]) -> f64 {
    let (mut both, mut sa, mut sb, mut t) = (0i128, 0i128, 0i128, 0i128);
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            let (x, y) = (a[i] == a[j], b[i] == b[j]);
            both += (x && y) as i128;
            sa += x as i128;
            sb += y as i128;
            t += 1;
        }
    }
    let num = 2 * (both * t - sa * sb);
    let den = (sa + sb) * t - 2 * sa * sb;
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

fn c4_ari() -> Outcome {
    let mut rng = RngStream::new(4, 0).rng();
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=200);
        let (ka, kb) = (rng.random_range(1..=12), rng.random_range(1..=12));
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..ka)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..kb)).collect();
        if metrics::ari(&a, &b).unwrap() != brute_ari(&a, &b) {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} of 100 random label pairs differ from the pair-count oracle"),
    )
}

fn bfs_components(c: &ConsensusMatrix, theta: f64) -> Vec<usize> {
    let n = c.n();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = next;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for v in 0..n {
                if v != u && label[v] == usize::MAX && c.get(u, v) >= theta {
                    label[v] = next;
                    q.push_back(v);
                }
            }
        }
        next += 1;
    }
    label
}

fn c5_components() -> Outcome {
    let mut rng = RngStream::new(5, 0).rng();
    let mut mismatches = 0;
    for _ in 0..50 {
        let n = rng.random_range(2..=200);
        let runs = rng.random_range(1..=20);
        let parts: Vec<Partition> = (0..runs)
            .map(|_| {
                let k = rng.random_range(1..=8);
                let raw: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
                Partition::from_labels(&raw)
            })
            .collect();
        let c = consensus::accumulate(&parts, n).unwrap();
        let theta = rng.random_range(0..=runs) as f64 / runs as f64;
        let fast = consensus::threshold_components(&c, theta);
        if fast.labels() != bfs_components(&c, theta).as_slice() {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} of 50 random consensus matrices differ from BFS"),
    )
}

fn c6_linear_scatter() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = RngStream::new(6, 1).rng();
    for t in 0..20 {
        let n = rng.random_range(6..=50);
        let p = rng.random_range(1..=5);
        let data = random_data(n, p, 600 + t);
        let k = rng.random_range(2..=4.min(n / 2));
        let raw: Vec<usize> = (0..n)
            .map(|i| if i < k { i } else { rng.random_range(0..k) })
            .collect();
        let part = Partition::from_labels(&raw);
        let rep = validation::scatter(&KernelMatrix::linear_gram(&data), &part).unwrap();
        for (c, members) in part.members().iter().enumerate() {
            let centroid: Vec<f64> = (0..p)
                .map(|j| {
                    members.iter().map(|&i| data.row(i)[j]).sum::<f64>() / members.len() as f64
                })
                .collect();
            let direct = members
                .iter()
                .map(|&i| {
                    data.row(i)
                        .iter()
                        .zip(&centroid)
                        .map(|(x, m)| (x - m).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .sum::<f64>()
                / members.len() as f64;
            worst = worst.max((rep.w_per_cluster[c] - direct).abs());
        }
    }
    outcome(
        worst <= 1e-9,
        format!("max |W_k - coordinate oracle| = {worst:.3e} (limit 1e-9)"),
    )
}

fn c7_trend() -> Outcome {
    let spec = ScenarioSpec::new(150, Level::Medium, Level::Low);
    let cfg = BenchmarkConfig {
        seed: 7,
        ..Default::default()
    };
    let res = benchmark::benchmark(&[spec], &cfg).unwrap();
    let at = |m: Method, r: usize| {
        res.trajectories
            .iter()
            .find(|t| t.method == m && t.runs == r)
            .map(|t| (t.ari_mean, t.count))
            .unwrap()
    };
    let (dpp10, n1) = at(Method::Dpp, 10);
    let (uni10, n2) = at(Method::Uniform, 10);
    let (dpp200, n3) = at(Method::Dpp, 200);
    let complete = n1 == 10 && n2 == 10 && n3 == 10;
    outcome(
        complete && dpp10 >= uni10 && dpp200 >= 0.77,
        format!(
            "R=10: dpp {dpp10:.4} vs uniform {uni10:.4}; R=200: dpp {dpp200:.4} (limit 0.77); replicas {n1}/{n2}/{n3}"
        ),
    )
}

fn c8_diversity() -> Outcome {
    let mut mean_wins = 0;
    let mut sd_wins = 0;
    let mut matched_wins = 0;
    let mut worst = String::new();
    let mut worst_gap = f64::INFINITY;
    let grid = simgen::scenario_grid();
    for (i, spec) in grid.iter().enumerate() {
        let ds = simgen::generate_mixture(spec, RngStream::new(8, i as u64)).unwrap();
        let prep = Prepared::new(&ds.data, Preprocessing::None, 1.0).unwrap();
        let rows =
            benchmark::diversity_logliks(&prep, &BaselineConfig::default_for(spec.n), 200, 8)
                .unwrap();
        let s = benchmark::summarise_diversity(&rows);
        let (d, u) = (&s[0], &s[1]);
        // Singular uniform draws have log-likelihood -inf: the mean drops and the spread is unbounded.
        let mean_ok = d.singular == 0 && (u.singular > 0 || d.mean > u.mean);
        let sd_ok = d.singular == 0 && (u.singular > 0 || d.sd < u.sd);
        mean_wins += mean_ok as usize;
        sd_wins += sd_ok as usize;

        // Uniform subsets with the same sizes as the DPP draws.
        let mut rng = RngStream::new(8, 1000 + i as u64).rng();
        let matched: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == Method::Dpp)
            .map(|r| {
                let idx = rand::seq::index::sample(&mut rng, spec.n, r.size).into_vec();
                sampling::dpp_log_likelihood(&prep.kernel, &prep.spectral, &idx).unwrap()
            })
            .collect();
        let matched_mean = matched.iter().sum::<f64>() / matched.len() as f64;
        matched_wins += (d.mean > matched_mean) as usize;

        let gap = if u.singular > 0 {
            f64::INFINITY
        } else {
            d.mean - u.mean
        };
        if gap < worst_gap {
            worst_gap = gap;
            worst = format!(
                "{}: dpp {:.2} (|Y| {:.1}) vs uniform {:.2} (|Y| {:.1})",
                spec.name(),
                d.mean,
                d.mean_size,
                u.mean,
                u.mean_size
            );
        }
    }
    let total = grid.len();
    outcome(
        mean_wins == total && sd_wins == total,
        format!(
            "higher mean {mean_wins}/{total}, smaller sd {sd_wins}/{total}; \
             size-matched uniform mean beaten {matched_wins}/{total}; worst {worst}"
        ),
    )
}

fn iris() -> (DataMatrix, Vec<usize>) {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let t = io::read_features(&dir.join("iris.csv"), HeaderMode::Auto).unwrap();
    let labels = io::read_labels(&dir.join("iris_labels.csv"), t.data.n()).unwrap();
    (t.data, Partition::from_labels(&labels).labels().to_vec())
}

fn c9_iris() -> Outcome {
    let (data, truth) = iris();
    let aris: Vec<f64> = (0..10)
        .map(|rep| {
            let cfg = PipelineConfig {
                seed: rep,
                ..Default::default()
            };
            run_pipeline(&data, &cfg, Some(&truth))
                .unwrap()
                .ari
                .unwrap()
        })
        .collect();
    let (m, sd) = benchmark::mean_sd(&aris);
    outcome(
        m >= 0.82,
        format!("mean ARI {m:.4} (sd {sd:.4}) over 10 repetitions (limit 0.82)"),
    )
}

fn c10_determinism() -> Outcome {
    let spec = ScenarioSpec::new(500, Level::Low, Level::Low);
    let ds = simgen::generate_mixture(&spec, RngStream::new(10, 0)).unwrap();
    let report = |threads| {
        let cfg = PipelineConfig {
            seed: 10,
            threads: Some(threads),
            ..Default::default()
        };
        let r = run_pipeline(&ds.data, &cfg, Some(&ds.true_labels)).unwrap();
        let mut csv = Vec::new();
        r.consensus.as_ref().unwrap().write_csv(&mut csv).unwrap();
        (r.to_json().unwrap(), csv)
    };
    let (j1, c1) = report(1);
    let (j8, c8) = report(8);
    outcome(
        j1 == j8 && c1 == c8,
        format!(
            "report {} bytes, consensus CSV {} bytes; identical: {}",
            j1.len(),
            c1.len(),
            j1 == j8 && c1 == c8
        ),
    )
}

fn c11_performance() -> Outcome {
    let mut rng = RngStream::new(11, 0).rng();
    let ds = simgen::generate_with(
        1500,
        15,
        6,
        0.01,
        simgen::DEFAULT_MAX_ECCENTRICITY,
        &mut rng,
    )
    .unwrap();
    let t0 = Instant::now();
    let r = run_pipeline(
        &ds.data,
        &PipelineConfig {
            seed: 11,
            ..Default::default()
        },
        Some(&ds.true_labels),
    )
    .unwrap();
    let el = t0.elapsed();
    let t = &r.timings;
    outcome(
        el < Duration::from_secs(300),
        format!(
            "{:.1}s total (prepare {:.1}s, runs {:.1}s, consensus {:.1}s, selection {:.1}s); K_hat {} ARI {:.3} (limit 300s)",
            el.as_secs_f64(),
            t.prepare_s,
            t.runs_s,
            t.consensus_s,
            t.selection_s,
            r.k_hat,
            r.ari.unwrap()
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let criteria: [Criterion; 11] = [
        (
            1,
            "DPP subset law vs enumeration",
            c1_dpp_law,
            Some(Duration::from_secs(30)),
        ),
        (2, "marginal kernel identity", c2_marginals, None),
        (3, "expected sample size", c3_expected_size, None),
        (4, "ARI vs pair-count oracle", c4_ari, None),
        (5, "components vs BFS", c5_components, None),
        (6, "linear-kernel scatter oracle", c6_linear_scatter, None),
        (
            7,
            "DPP vs uniform trend, n=150",
            c7_trend,
            Some(Duration::from_secs(600)),
        ),
        (8, "generator diversity", c8_diversity, None),
        (
            9,
            "Iris reproduction",
            c9_iris,
            Some(Duration::from_secs(120)),
        ),
        (
            10,
            "determinism across worker counts",
            c10_determinism,
            None,
        ),
        (
            11,
            "n=1500, p=15 pipeline time",
            c11_performance,
            Some(Duration::from_secs(300)),
        ),
    ];
    let wanted: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let (mut passed, mut failed) = (0, 0);
    for (id, name, f, limit) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let mut o = f();
        let el = t0.elapsed();
        if let Some(lim) = limit {
            if el > lim {
                o.pass = false;
                o.detail.push_str(&format!(
                    "; runtime {:.1}s exceeds {}s",
                    el.as_secs_f64(),
                    lim.as_secs()
                ));
            }
        }
        if o.pass {
            passed += 1;
        } else {
            failed += 1;
        }
        println!(
            "{} [{id:>2}] {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            el.as_secs_f64()
        );
    }
    println!("acceptance: {passed} passed, {failed} failed");
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
