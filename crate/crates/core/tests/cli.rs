use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cce_core::bench::BenchResults;
use cce_core::data::{load_label_matrix, save_features_csv, Dataset};
use cce_core::model::LinearModel;
use ndarray::array;
use serde_json::Value;

fn cce(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cce"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_documents_outputs() {
    let out = cce(&["cluster", "--help"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for needle in ["metrics.jsonl", "labels.csv", "model.bin", "CCEM"] {
        assert!(text.contains(needle), "{needle} missing from help");
    }
    assert!(stdout(&cce(&["robustness", "--help"])).contains("eta,loss,seed,test_acc"));
    assert!(stdout(&cce(&["--help"])).contains("Exit codes"));
}

#[test]
fn measures_prints_named_values() {
    let out = cce(&[
        "measures", "--p", "0.5,0.5", "--q", "0.9,0.1", "--alpha", "2",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let value = |name: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{name} ")))
            .unwrap_or_else(|| panic!("{name} missing"))
            .parse()
            .unwrap()
    };
    assert!((value("collision_cross_entropy") - 2f64.ln()).abs() < 1e-12);
    assert!((value("renyi_divergence") - (0.25f64 / 0.9 + 2.5).ln()).abs() < 1e-12);

    let only_p = stdout(&cce(&["measures", "--p", "1,0"]));
    assert!(
        only_p.lines().any(|l| l == "collision_entropy 0"),
        "{only_p}"
    );
    assert!(!only_p.contains("kl_divergence"));
}

#[test]
fn invalid_input_exits_with_2() {
    let bad_dist = cce(&["measures", "--p", "0.5,0.6"]);
    assert_eq!(code(&bad_dist), 2);
    assert!(stderr(&bad_dist).contains("configuration error"));
    assert_eq!(code(&cce(&["cluster", "--out", "/nonexistent/never"])), 2);
    assert_eq!(code(&cce(&["robustness", "--seeds", "1"])), 2);
    assert_eq!(code(&cce(&["bench", "--bogus"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    assert_eq!(
        code(&cce(&[
            "cluster",
            "--synthetic",
            "blobs",
            "--lambda=-1",
            "--out",
            path(&out_dir)
        ])),
        2
    );
    assert_eq!(
        code(&cce(&[
            "cluster",
            "--synthetic",
            "k=3,wobble=2",
            "--out",
            path(&out_dir)
        ])),
        2
    );

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[cluster]\nepochz = 3\n").unwrap();
    assert_eq!(
        code(&cce(&["--config", path(&cfg), "measures", "--p", "1"])),
        2
    );
    assert_eq!(
        code(&cce(&[
            "--config",
            path(&dir.path().join("missing.toml")),
            "measures",
            "--p",
            "1"
        ])),
        2
    );
}

#[test]
fn cluster_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = cce(&[
        "cluster",
        "--synthetic",
        "k=3,n=2,per_class=40,separation=8",
        "--epochs",
        "3",
        "--batch-size",
        "40",
        "--out",
        path(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let log = fs::read_to_string(out_dir.join("metrics.jsonl")).unwrap();
    let records: Vec<Value> = log
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 3);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r["epoch"].as_u64(), Some(i as u64));
        for key in ["loss", "train_acc", "em_iters_mean", "wall_ms"] {
            assert!(r[key].is_number(), "{key} in {r}");
        }
        assert!(r.get("test_acc").is_some());
    }

    let header = fs::read_to_string(out_dir.join("labels.csv")).unwrap();
    assert!(header.starts_with("y0,y1,y2\n"));
    let y = load_label_matrix(out_dir.join("labels.csv")).unwrap();
    assert_eq!((y.nrows(), y.ncols()), (120, 3));

    let model = LinearModel::load(out_dir.join("model.bin")).unwrap();
    assert_eq!((model.k(), model.n()), (3, 2));
    let bytes = fs::read(out_dir.join("model.bin")).unwrap();
    assert_eq!(&bytes[..4], b"CCEM");
    assert_eq!(bytes.len(), 4 + 4 + 8 + 8 + 8 * (3 * 2 + 3));
}

#[test]
fn cluster_reads_features_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("x.csv");
    let x = array![
        [0.0, 0.1],
        [0.2, -0.1],
        [5.0, 5.1],
        [5.2, 4.9],
        [-5.0, 5.0],
        [-4.9, 5.2]
    ];
    save_features_csv(
        &csv,
        &Dataset::new(x, Some(vec![0, 0, 1, 1, 2, 2]), None).unwrap(),
    )
    .unwrap();

    let run = |name: &str, extra: &[&str]| {
        let out_dir = dir.path().join(name);
        let mut args = vec![
            "cluster",
            "--features",
            path(&csv),
            "--epochs",
            "2",
            "--batch-size",
            "3",
            "--out",
        ];
        args.push(path(&out_dir));
        args.extend_from_slice(extra);
        let out = cce(&args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        fs::read(out_dir.join("model.bin")).unwrap()
    };
    let a = run("a", &[]);
    assert_eq!(a, run("b", &[]));
    assert_eq!(a, run("c", &["--parallel"]));
    assert_ne!(a, run("d", &["--seed", "5"]));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let out_dir = dir.path().join("run");
    fs::write(
        &cfg,
        format!(
            "[cluster]\nsynthetic = \"k=2,n=2,per_class=20,separation=6\"\nepochs = 3\nbatch_size = 20\nout = \"{}\"\n",
            path(&out_dir)
        ),
    )
    .unwrap();

    let out = cce(&["--config", path(&cfg), "cluster"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        fs::read_to_string(out_dir.join("metrics.jsonl"))
            .unwrap()
            .lines()
            .count(),
        3
    );

    let out = cce(&["--config", path(&cfg), "cluster", "--epochs", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        fs::read_to_string(out_dir.join("metrics.jsonl"))
            .unwrap()
            .lines()
            .count(),
        1
    );
}

#[test]
fn robustness_rows_follow_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let base = [
        "robustness",
        "--eta-grid",
        "0,0.5",
        "--seeds",
        "2",
        "--epochs",
        "1",
        "--per-class",
        "20",
        "--test-per-class",
        "10",
        "--out",
        path(&csv),
    ];
    let out = cce(&base);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("eta,loss,seed,test_acc"));
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect();
    assert_eq!(rows.len(), 2 * 2 * 2);
    for r in &rows {
        let acc: f64 = r[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&acc));
        assert!(r[1] == "cce" || r[1] == "sce");
    }

    let mut only = base.to_vec();
    only.extend_from_slice(&["--loss", "cce"]);
    assert_eq!(code(&cce(&only)), 0);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2);
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(1) == Some("cce")));
}

#[test]
fn bench_writes_commented_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    let out = cce(&[
        "bench",
        "--k",
        "2,3",
        "--m",
        "50",
        "--eta-grid",
        "0.01,0.1",
        "--repetitions",
        "1",
        "--out",
        path(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("em"));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.lines().next().unwrap().starts_with('#'));
    let rows = BenchResults::read_csv(&csv).unwrap();
    assert_eq!(rows.len(), 2 * 3);
    assert!(rows.iter().all(|r| r.m == 50));
    assert!(rows
        .iter()
        .filter(|r| r.solver == "pgd")
        .all(|r| r.gap_to_em.is_some()));
}

#[test]
fn mstep_check_passes_and_detects_a_fault() {
    let ok = cce(&["mstep-check", "--instances", "20", "--k", "2,5"]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    assert_eq!(
        stdout(&ok)
            .lines()
            .filter(|l| l.starts_with("K=") && l.ends_with("PASS"))
            .count(),
        2
    );

    let bad = cce(&[
        "mstep-check",
        "--instances",
        "5",
        "--k",
        "3",
        "--perturb-oracle",
        "0.01",
    ]);
    assert_eq!(code(&bad), 1);
    assert!(stdout(&bad).contains("FAIL"));
}
