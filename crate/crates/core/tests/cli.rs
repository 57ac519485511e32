use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn detcons(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_detcons"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn cluster_writes_report_and_consensus() {
    let dir = tempfile::tempdir().unwrap();
    let (report, cons) = (dir.path().join("r.json"), dir.path().join("c.csv"));
    let out = detcons(&[
        "cluster",
        s(&data("iris.csv")),
        "--labels",
        s(&data("iris_labels.csv")),
        "--runs",
        "40",
        "--seed",
        "2",
        "--out",
        s(&report),
        "--consensus",
        s(&cons),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("K_hat"));

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["n"], 150);
    assert_eq!(json["labels"].as_array().unwrap().len(), 150);
    assert!(json["ari"].as_f64().unwrap() > 0.3);
    assert_eq!(json["runs"].as_array().unwrap().len(), 40);

    let text = std::fs::read_to_string(&cons).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 150);
    for row in &rows {
        let cells: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.len(), 150);
        assert!(cells.iter().all(|v| (0.0..=1.0).contains(v)));
    }
    assert!(rows[0].starts_with("1,"));
}

#[test]
fn simulate_then_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let out = detcons(&[
        "simulate",
        "--scenario-id",
        "1",
        "--replicas",
        "2",
        "--seed",
        "4",
        "--out",
        s(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for r in ["r00", "r01"] {
        for suffix in [".csv", "_labels.csv", ".json"] {
            assert!(dir
                .path()
                .join(format!("n150_plow_klow_{r}{suffix}"))
                .exists());
        }
    }
    let meta: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("n150_plow_klow_r00.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(meta["n"], 150);

    let out = detcons(&[
        "cluster",
        s(&dir.path().join("n150_plow_klow_r00.csv")),
        "--labels",
        s(&dir.path().join("n150_plow_klow_r00_labels.csv")),
        "--method",
        "uniform",
        "--runs",
        "30",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["config"]["method"], "uniform");
}

#[test]
fn benchmark_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let list = dir.path().join("scenarios.txt");
    std::fs::write(&list, "# two cells\n1\nn150_pmedium_klow\n").unwrap();
    let out_dir = dir.path().join("bench");
    let out = detcons(&[
        "benchmark",
        "--scenarios",
        s(&list),
        "--methods",
        "dpp,uniform",
        "--replicas",
        "2",
        "--runs",
        "20",
        "--checkpoints",
        "5,10,20",
        "--out",
        s(&out_dir),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 2);
    let traj = std::fs::read_to_string(out_dir.join("trajectories.csv")).unwrap();
    assert_eq!(traj.lines().count(), 1 + 2 * 2 * 3);
    let ll = std::fs::read_to_string(out_dir.join("logliks.csv")).unwrap();
    assert_eq!(ll.lines().count(), 1 + 2 * 2 * 2 * 20);
    assert!(out_dir.join("benchmark.json").exists());
    assert!(out_dir.join("summary.txt").exists());
}

#[test]
fn diversity_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (ll, hist) = (dir.path().join("ll.csv"), dir.path().join("h.csv"));
    let out = detcons(&[
        "diagnose-diversity",
        s(&data("iris.csv")),
        "--draws",
        "25",
        "--out",
        s(&ll),
        "--histogram",
        s(&hist),
        "--bins",
        "10",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&ll).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "scenario,replica,method,draw,size,loglik"
    );
    assert_eq!(text.lines().count(), 1 + 50);
    let h = std::fs::read_to_string(&hist).unwrap();
    assert_eq!(h.lines().count(), 1 + 20);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let iris = data("iris.csv");

    assert_eq!(
        detcons(&["cluster", s(&iris), "--tau", "1.5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        detcons(&["cluster", s(&iris), "--method", "pam"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(detcons(&["no-such-command"]).status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2\n3,oops\n").unwrap();
    let out = detcons(&["cluster", s(&bad)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2, column 2"));
    assert_eq!(
        detcons(&["cluster", s(&dir.path().join("missing.csv"))])
            .status
            .code(),
        Some(3)
    );

    // Every threshold collapses to one cluster once the size floor reaches n.
    let tight = dir.path().join("tight.csv");
    let rows: String = (0..10)
        .map(|i| format!("{},{}\n", i as f64 * 0.01, 1.0 - i as f64 * 0.01))
        .collect();
    std::fs::write(&tight, rows).unwrap();
    assert_eq!(
        detcons(&[
            "cluster",
            s(&tight),
            "--min-size-exp",
            "0.999",
            "--runs",
            "10"
        ])
        .status
        .code(),
        Some(4)
    );
}
