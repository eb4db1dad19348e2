use std::fs;
use std::path::Path;
use std::process::Command;

use smece::binning::{Binning, ReliabilityTarget, UpperEdge};
use smece::experiments::score_replication;
use smece::generative::{sigmoid, HardMode};
use smece::io::{
    cmd_experiment, cmd_metrics, cmd_reliability, cmd_simulate, read_samples, Format,
    SampleColumns, DATASET_COLUMNS,
};
use smece::{Error, ExperimentConfig, Parallelism};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_smece"))
}

fn columns(prediction: &str, soft: &str, hard: &str) -> SampleColumns {
    SampleColumns {
        prediction: prediction.into(),
        soft_label: soft.into(),
        hard_label: hard.into(),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

#[test]
fn metrics_hand_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "hand.csv",
        "prediction,soft_label\n0.05,0.10\n0.15,0.20\n0.25,0.20\n",
    );
    let (report, text) = cmd_metrics(
        &input,
        &SampleColumns::default(),
        &Binning::default(),
        Format::Csv,
    )
    .unwrap();
    assert!((report.smece - 0.05).abs() < 1e-15);
    assert_eq!(report.ece, None);
    assert!(text.contains("smece,0.0500\n"));
    assert!(text.contains("ece,\n"));
}

#[test]
fn metrics_identity_and_binary_files() {
    let dir = tempfile::tempdir().unwrap();
    let same = write(
        dir.path(),
        "same.csv",
        "prediction,soft_label\n0.13,0.13\n0.5,0.5\n0.91,0.91\n1,1\n",
    );
    let (r, _) = cmd_metrics(
        &same,
        &SampleColumns::default(),
        &Binning::default(),
        Format::Json,
    )
    .unwrap();
    assert_eq!(r.smece, 0.0);

    let binary = write(
        dir.path(),
        "binary.csv",
        "prediction,soft_label,hard_label\n0.2,0,0\n0.25,1,1\n0.8,1,1\n0.7,0,0\n",
    );
    let (r, text) = cmd_metrics(
        &binary,
        &SampleColumns::default(),
        &Binning::default(),
        Format::Json,
    )
    .unwrap();
    assert_eq!(Some(r.smece), r.ece);
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["bins"].as_array().unwrap().len(), 10);
}

#[test]
fn metrics_accepts_json_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "s.json",
        r#"[{"prediction": 0.2, "soft_label": 0.3, "hard_label": 1},
            {"prediction": 0.2, "soft_label": 0.1, "hard_label": 0}]"#,
    );
    let (r, _) = cmd_metrics(
        &input,
        &SampleColumns::default(),
        &Binning::default(),
        Format::Csv,
    )
    .unwrap();
    assert!((r.ece.unwrap() - 0.3).abs() < 1e-15);
    assert!(r.smece.abs() < 1e-15);
}

#[test]
fn partially_populated_hard_column_disables_ece() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "partial.csv",
        "prediction,soft_label,hard_label\n0.2,0.3,1\n0.4,0.3,\n",
    );
    let (r, _) = cmd_metrics(
        &input,
        &SampleColumns::default(),
        &Binning::default(),
        Format::Csv,
    )
    .unwrap();
    assert!(r.ece.is_none());
}

#[test]
fn malformed_rows_name_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.csv",
        "prediction,soft_label\n0.1,0.2\n0.3,abc\n",
    );
    match read_samples(&bad, &SampleColumns::default()) {
        Err(Error::Data { line, column, .. }) => {
            assert_eq!(line, 3);
            assert_eq!(column, "soft_label");
        }
        other => panic!("expected data error, got {other:?}"),
    }

    let out_of_range = write(dir.path(), "range.csv", "prediction,soft_label\n1.5,0.2\n");
    let err = read_samples(&out_of_range, &SampleColumns::default()).unwrap_err();
    assert!(err.to_string().contains("1.5"), "{err}");
    assert_eq!(err.exit_code(), 3);

    let missing = write(dir.path(), "cols.csv", "p,q\n0.1,0.2\n");
    assert!(matches!(
        read_samples(&missing, &SampleColumns::default()),
        Err(Error::Data { line: 1, .. })
    ));
}

#[test]
fn simulate_is_deterministic_and_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    cmd_simulate(2.0, 500, HardMode::Threshold, 99, Some(&a)).unwrap();
    cmd_simulate(2.0, 500, HardMode::Threshold, 99, Some(&b)).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let mut reader = csv::Reader::from_path(&a).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, DATASET_COLUMNS);
    for rec in reader.records() {
        let rec = rec.unwrap();
        let x: f64 = rec[0].parse().unwrap();
        let p: f64 = rec[1].parse().unwrap();
        assert!((p - sigmoid(2.0 * x)).abs() < 1e-12);
        assert_eq!(&rec[2] == "1", x >= 0.0);
    }
}

#[test]
fn simulated_model_a_scores_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.csv");
    cmd_simulate(2.0, 5000, HardMode::Threshold, 3, Some(&path)).unwrap();
    let cols = columns("p_hat_A", "p_star", "y_hard");
    let (r, _) = cmd_metrics(&path, &cols, &Binning::default(), Format::Csv).unwrap();
    assert_eq!(r.smece, 0.0);
    assert!(r.ece.unwrap() > 0.1);
}

#[test]
fn simulate_then_metrics_matches_experiment_scores() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.csv");
    let seed = 0x5eed;
    for mode in [HardMode::Threshold, HardMode::Bernoulli] {
        cmd_simulate(1.0, 800, mode, seed, Some(&path)).unwrap();
        let binning = Binning::default().with_upper_edge(UpperEdge::Open);
        let internal = score_replication(1.0, 800, mode, &binning, seed).unwrap();
        for (i, letter) in ["A", "B", "C", "D", "E"].iter().enumerate() {
            let cols = columns(&format!("p_hat_{letter}"), "p_star", "y_hard");
            let (r, _) = cmd_metrics(&path, &cols, &binning, Format::Csv).unwrap();
            assert_eq!(r.smece, internal[i][0], "smece {letter}");
            assert_eq!(r.ece.unwrap(), internal[i][1], "ece {letter}");
        }
    }
}

#[test]
fn reliability_points_from_simulated_models() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.csv");
    cmd_simulate(2.0, 5000, HardMode::Threshold, 12, Some(&path)).unwrap();
    let b = Binning::default();

    let (points, text) = cmd_reliability(
        &path,
        &columns("p_hat_A", "p_star", "y_hard"),
        &b,
        ReliabilityTarget::Soft,
    )
    .unwrap();
    assert!(points.iter().all(|p| p.mean_prediction == p.mean_target));
    let weight: f64 = points.iter().map(|p| p.weight).sum();
    assert!((weight - 1.0).abs() < 1e-12);
    assert!(text.starts_with("mean_prediction,mean_target,weight\n"));

    // Model D sits above the diagonal in every bin.
    let (points, _) = cmd_reliability(
        &path,
        &columns("p_hat_D", "p_star", "y_hard"),
        &b,
        ReliabilityTarget::Soft,
    )
    .unwrap();
    assert!(points.iter().all(|p| p.mean_target < p.mean_prediction));
    let mean_gap: f64 = points
        .iter()
        .map(|p| p.mean_target - p.mean_prediction)
        .sum::<f64>()
        / points.len() as f64;
    assert!(mean_gap < 0.0);

    let soft_only = write(dir.path(), "soft.csv", "prediction,soft_label\n0.3,0.3\n");
    let err = cmd_reliability(
        &soft_only,
        &SampleColumns::default(),
        &b,
        ReliabilityTarget::Hard,
    )
    .unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn experiment_tables_have_expected_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let mut e1 = ExperimentConfig::standard(1).unwrap();
    e1.n_values = vec![2000];
    let mut e3 = ExperimentConfig::standard(3).unwrap();
    e3.replications = 10;
    let mut e4 = ExperimentConfig::standard(4).unwrap();
    e4.replications = 5;
    let manifest = cmd_experiment(
        &[e1, e3, e4],
        Format::Csv,
        dir.path(),
        &Parallelism::default(),
    )
    .unwrap();
    assert_eq!(
        manifest.outputs,
        [
            "table2.csv",
            "table5.csv",
            "table6.csv",
            "table7.csv",
            "table8.csv"
        ]
    );

    let read = |name: &str| fs::read_to_string(dir.path().join(name)).unwrap();
    let t2 = read("table2.csv");
    assert_eq!(t2.lines().count(), 6);
    assert!(
        t2.starts_with("model,name,smece,ece,smece_rank,ece_rank\nA,Posterior-matching,0.0000,")
    );

    let t7 = read("table7.csv");
    let lines: Vec<&str> = t7.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0], "model,n=500,n=1000,n=2000,n=5000,n=10000");
    assert!(lines[1].starts_with("A,0.0000±0.0000"));
    assert_eq!(read("table6.csv").lines().count(), 1 + 10 * 6);

    let json_dir = dir.path().join("json");
    let mut e2 = ExperimentConfig::standard(2).unwrap();
    e2.n_values = vec![300];
    cmd_experiment(&[e2], Format::Json, &json_dir, &Parallelism::default()).unwrap();
    let t3: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(json_dir.join("table3.json")).unwrap()).unwrap();
    assert_eq!(t3["columns"].as_array().unwrap().len(), 7);
    assert_eq!(t3["rows"][0][1], serde_json::json!(0.0));
}

#[test]
fn invalid_overrides_fail_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::standard(3).unwrap();
    c.replications = 0;
    let err = cmd_experiment(
        &[c],
        Format::Csv,
        &dir.path().join("x"),
        &Parallelism::default(),
    )
    .unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(!dir.path().join("x").exists());
}

#[test]
fn binary_exit_codes_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim.csv");

    let status = bin()
        .args(["simulate", "--k", "2", "--n", "300", "--seed", "5", "--out"])
        .arg(&sim)
        .status()
        .unwrap();
    assert!(status.success());

    let out = bin()
        .args([
            "metrics",
            "--prediction-column",
            "p_hat_A",
            "--soft-column",
            "p_star",
        ])
        .args(["--hard-column", "y_hard"])
        .arg(&sim)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("smece,0.0000"));

    let out = bin()
        .args(["experiment", "3", "--reps", "0", "--out"])
        .arg(dir.path().join("e"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let bad = write(dir.path(), "bad.csv", "prediction,soft_label\n0.1,x\n");
    let out = bin().arg("metrics").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = bin()
        .arg("metrics")
        .arg(dir.path().join("missing.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));

    let out = bin()
        .args(["experiment", "7", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_from_environment_is_overridden_by_flag() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, env_seed: &str, flag: Option<&str>| {
        let path = dir.path().join(name);
        let mut cmd = bin();
        cmd.env("SMECE_SEED", env_seed)
            .args(["simulate", "--n", "20", "--out"])
            .arg(&path);
        if let Some(seed) = flag {
            cmd.args(["--seed", seed]);
        }
        assert!(cmd.status().unwrap().success());
        fs::read(path).unwrap()
    };
    let env_only = run("a.csv", "11", None);
    let flag_wins = run("b.csv", "99", Some("11"));
    let other = run("c.csv", "12", None);
    assert_eq!(env_only, flag_wins);
    assert_ne!(env_only, other);
}
