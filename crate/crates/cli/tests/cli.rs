use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use odcsr_core::{CascadeConfig, Fusion, GammaMode};
use tempfile::{tempdir, TempDir};

fn odcsr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odcsr")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn synth_into(dir: &Path, seed: &str) -> Output {
    odcsr(&[
        "synth",
        "--dim",
        "20",
        "--subspaces",
        "2",
        "--subdim",
        "3",
        "--inliers",
        "15",
        "--outliers",
        "5",
        "--noise",
        "0.01",
        "--seed",
        seed,
        "--out",
        dir.to_str().unwrap(),
    ])
}

fn dataset() -> TempDir {
    let dir = tempdir().unwrap();
    let out = synth_into(dir.path(), "7");
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_is_deterministic() {
    let a = tempdir().unwrap();
    let b = tempdir().unwrap();
    assert_eq!(code(&synth_into(a.path(), "1")), 0);
    assert_eq!(code(&synth_into(b.path(), "1")), 0);
    for f in ["X.csv", "labels.txt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
    let labels = fs::read_to_string(a.path().join("labels.txt")).unwrap();
    assert_eq!(labels.lines().count(), 35);
    assert_eq!(labels.lines().filter(|l| *l == "1").count(), 5);
}

#[test]
fn synth_rejects_full_dimensional_subspace() {
    let dir = tempdir().unwrap();
    let out = odcsr(&["synth", "--dim", "50", "--subdim", "50", "--out", s(dir.path())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn detect_writes_run_directory() {
    let data = dataset();
    let run = data.path().join("run");
    let out = odcsr(&[
        "detect",
        "--input",
        s(&data.path().join("X.csv")),
        "--labels",
        s(&data.path().join("labels.txt")),
        "--walk-steps",
        "100",
        "--out",
        s(&run),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "scores.csv",
        "manifest.txt",
        "eval.txt",
        "predicted.txt",
        "stage1.coef",
        "stage2.coef",
        "stage3.coef",
        "stage1_scores.csv",
        "stage3_scores.csv",
    ] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let scores = fs::read_to_string(run.join("scores.csv")).unwrap();
    assert_eq!(scores.lines().count(), 35);
    let total: f64 = scores
        .lines()
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9);

    let eval = fs::read_to_string(run.join("eval.txt")).unwrap();
    assert!(eval.contains("polarity=low_is_outlier"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("auc="));

    let manifest = fs::read_to_string(run.join("manifest.txt")).unwrap();
    let cfg = CascadeConfig::from_manifest(&manifest).unwrap();
    assert_eq!(cfg.num_stages, 3);
    assert_eq!(cfg.walk_steps, 100);
    assert_eq!(cfg.en_config.lambda, 0.9);
    assert_eq!(cfg.en_config.gamma_mode, GammaMode::Relative(5.0));
    assert_eq!(cfg.fusion, Fusion::UniformMean);
    assert!(cfg.renormalize_residuals);
    assert!(manifest.contains("epsilon="));
}

#[test]
fn detect_is_reproducible() {
    let data = dataset();
    let run = |name: &str| {
        let dir = data.path().join(name);
        let out = odcsr(&[
            "detect",
            "--input",
            s(&data.path().join("X.csv")),
            "--walk-steps",
            "50",
            "--gamma",
            "20",
            "--fusion",
            "weighted",
            "--fusion-weights",
            "0.5,0.3,0.2",
            "--out",
            s(&dir),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        dir
    };
    let a = run("a");
    let b = run("b");
    for f in ["scores.csv", "stage2.coef"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let cfg = CascadeConfig::from_manifest(&fs::read_to_string(a.join("manifest.txt")).unwrap()).unwrap();
    assert_eq!(cfg.en_config.gamma_mode, GammaMode::Fixed(20.0));
    assert_eq!(cfg.fusion, Fusion::Weighted(vec![0.5, 0.3, 0.2]));
}

#[test]
fn detect_exit_codes() {
    let data = dataset();
    let x = data.path().join("X.csv");
    let out_dir = data.path().join("r");
    let zero_stages = odcsr(&["detect", "--input", s(&x), "--stages", "0", "--out", s(&out_dir)]);
    assert_eq!(code(&zero_stages), 2);
    let bad_lambda = odcsr(&["detect", "--input", s(&x), "--lambda", "1.0", "--out", s(&out_dir)]);
    assert_eq!(code(&bad_lambda), 2);
    let missing = odcsr(&[
        "detect",
        "--input",
        s(&data.path().join("nope.csv")),
        "--out",
        s(&out_dir),
    ]);
    assert_eq!(code(&missing), 1);
    fs::write(data.path().join("bad.csv"), "1,2\n3,x\n").unwrap();
    let garbled = odcsr(&[
        "detect",
        "--input",
        s(&data.path().join("bad.csv")),
        "--out",
        s(&out_dir),
    ]);
    assert_eq!(code(&garbled), 1);
    let strict = odcsr(&[
        "detect",
        "--input",
        s(&x),
        "--max-iters",
        "0",
        "--strict",
        "--walk-steps",
        "10",
        "--out",
        s(&out_dir),
    ]);
    assert_eq!(code(&strict), 3);
    let lenient = odcsr(&[
        "detect",
        "--input",
        s(&x),
        "--max-iters",
        "0",
        "--walk-steps",
        "10",
        "--out",
        s(&out_dir),
    ]);
    assert_eq!(code(&lenient), 0);
}

#[test]
fn bench_rows_and_single_stage_equivalence() {
    let data = dataset();
    let csv_path = data.path().join("bench.csv");
    let scores = data.path().join("scores");
    let out = odcsr(&[
        "bench",
        "--input",
        s(&data.path().join("X.csv")),
        "--labels",
        s(&data.path().join("labels.txt")),
        "--stages",
        "3",
        "--walk-steps",
        "100",
        "--out",
        s(&csv_path),
        "--scores-dir",
        s(&scores),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,stages,auc,f1,threshold,tp,fp,fn,tn,polarity");
    let cells: Vec<(&str, &str)> = lines[1..]
        .iter()
        .map(|l| {
            let mut it = l.split(',');
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    assert_eq!(
        cells,
        vec![
            ("odcsr", "1"),
            ("odcsr", "2"),
            ("odcsr", "3"),
            ("rgraph", "1"),
            ("l1th", "")
        ]
    );
    let tail = |l: &str| l.splitn(3, ',').nth(2).unwrap().to_string();
    assert_eq!(tail(lines[1]), tail(lines[4]));
    assert!(lines[5].ends_with("high_is_outlier"));

    let l1_manifest = fs::read_to_string(scores.join("l1th_manifest.txt")).unwrap();
    assert!(l1_manifest.contains("polarity=high_is_outlier"));
    assert!(l1_manifest.contains("lambda=0.99"));
    assert_eq!(
        fs::read(scores.join("odcsr_n1_scores.csv")).unwrap(),
        fs::read(scores.join("rgraph_scores.csv")).unwrap()
    );
}

#[test]
fn bench_requires_labels_file() {
    let data = dataset();
    let out = odcsr(&[
        "bench",
        "--input",
        s(&data.path().join("X.csv")),
        "--labels",
        s(&data.path().join("missing.txt")),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn binary_input_round_trip() {
    let dir = tempdir().unwrap();
    let out = odcsr(&[
        "synth",
        "--dim",
        "12",
        "--subspaces",
        "2",
        "--subdim",
        "2",
        "--inliers",
        "8",
        "--outliers",
        "3",
        "--binary",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 0);
    let run = dir.path().join("run");
    let out = odcsr(&[
        "detect",
        "--input",
        s(&dir.path().join("X.odcm")),
        "--labels",
        s(&dir.path().join("labels.txt")),
        "--walk-steps",
        "50",
        "--stages",
        "2",
        "--out",
        s(&run),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(run.join("scores.csv")).unwrap().lines().count(), 19);
}
