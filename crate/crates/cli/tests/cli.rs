//! End-to-end runs of the `gramtomo` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn gramtomo(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gramtomo"))
        .args(args)
        .current_dir(dir)
        .env_remove("GRAMTOMO_OUT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const TOY: &str = r#"{"cutoff": 5, "target": {"kind": "fock", "n": 2}, "measurement": {"kind": "fock_projectors"}}"#;

#[test]
fn help_exits_zero_and_documents_conventions() {
    let tmp = TempDir::new().unwrap();
    let out = gramtomo(&["--help"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("(a + a†)/√2") && text.contains("GRAMTOMO_OUT"));
}

#[test]
fn default_gram_spectrum_shapes() {
    let tmp = TempDir::new().unwrap();
    let out = gramtomo(&["gram-spectrum", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let g = csv_rows(&tmp.path().join("o/gram_spectrum.csv"));
    let q = csv_rows(&tmp.path().join("o/q_spectrum.csv"));
    assert_eq!((g.len(), q.len()), (15, 306));
    for rows in [&g, &q] {
        let v: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
        assert!(v.windows(2).all(|w| w[0] >= w[1]));
    }
    let doc = json(&tmp.path().join("o/gram_analysis.json"));
    assert_eq!(doc["format"], "GramAnalysis");
    assert!(doc["operator_space"]["nonzero"].as_u64().unwrap() <= 225);
    assert_eq!(doc["config"]["measurement"]["bins"], 51);
}

#[test]
fn orthonormal_toy_has_unit_spectrum_and_exact_frame_identities() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "toy.json", TOY);
    let cfg = cfg.to_str().unwrap();
    let out = gramtomo(&["gram-spectrum", "--config", cfg, "--out", "o", "--format", "csv"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for row in csv_rows(&tmp.path().join("o/gram_spectrum.csv")) {
        assert_eq!(row[1].parse::<f64>().unwrap(), 1.0);
    }
    assert!(!tmp.path().join("o/gram_analysis.json").exists());

    let out = gramtomo(&["frames-check", "--config", cfg, "--out", "f"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for row in csv_rows(&tmp.path().join("f/frames_check.csv")) {
        let dev: f64 = row[1].parse().unwrap();
        assert!(dev < 1e-14, "{row:?}");
        assert_eq!(row[3], "true");
    }
}

#[test]
fn default_frames_check_passes() {
    let tmp = TempDir::new().unwrap();
    let out = gramtomo(&["frames-check", "--out", "o", "--format", "json"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = json(&tmp.path().join("o/frames_check.json"));
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["checks"].as_array().unwrap().len(), 7);
}

#[test]
fn frames_check_failure_exits_with_numerical_code() {
    // a support cutoff that discards part of the span breaks the round trip
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"analysis": {"operator_threshold": 0.5}}"#);
    let out = gramtomo(&["frames-check", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("linear_inversion_round_trip"));
    let rows = csv_rows(&tmp.path().join("o/frames_check.csv"));
    let failed: Vec<_> = rows.iter().filter(|r| r[3] == "false").map(|r| r[0].as_str()).collect();
    assert_eq!(failed, ["linear_inversion_round_trip"]);
}

#[test]
fn povm_file_round_trip_and_corrupted_gram_operator() {
    let tmp = TempDir::new().unwrap();
    let out = gramtomo(&["gram-spectrum", "--config", write_config(tmp.path(), "t.json", TOY).to_str().unwrap(), "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let cfg = write_config(
        tmp.path(),
        "file.json",
        r#"{"cutoff": 5, "target": {"kind": "fock", "n": 2}, "measurement": {"kind": "file", "path": "o/povm.json"}}"#,
    );
    let cfg = cfg.to_str().unwrap();
    let out = gramtomo(&["frames-check", "--config", cfg, "--out", "ok"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let path = tmp.path().join("o/povm.json");
    let mut doc = json(&path);
    doc["gram_operator"][0][1] = serde_json::json!([0.3, 0.1]);
    fs::write(&path, doc.to_string()).unwrap();
    let out = gramtomo(&["frames-check", "--config", cfg, "--out", "bad"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("not Hermitian"), "{}", stderr(&out));
    assert!(!tmp.path().join("bad").exists());
}

#[test]
fn malformed_config_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    for (name, text) in [
        ("neg.json", r#"{"measurement": {"kind": "homodyne", "phases": 6, "bins": -3, "range": [-5, 5]}}"#),
        ("zero.json", r#"{"measurement": {"kind": "homodyne", "phases": 6, "bins": 0, "range": [-5, 5]}}"#),
        ("unknown.json", r#"{"solver": {"max_iter": 10}}"#),
    ] {
        let cfg = write_config(tmp.path(), name, text);
        let out = gramtomo(&["reconstruct", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
        assert_eq!(out.status.code(), Some(1), "{name}: {}", stderr(&out));
        assert!(!tmp.path().join("o").exists());
    }
}

#[test]
fn bad_flags_are_validation_errors() {
    let tmp = TempDir::new().unwrap();
    for args in [
        &["sweep", "--basis", "wavelet"][..],
        &["sweep", "--dims", "0"],
        &["stability", "--trials", "1"],
        &["reconstruct", "--dims", "2,3"],
    ] {
        let out = gramtomo(args, tmp.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
    let out = gramtomo(&["sweep", "--config", "missing.json"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn exact_full_dimension_reconstruction_reports_high_fidelity() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"noise": {"kind": "exact"}, "wigner": {"x_points": 9, "p_points": 9}}"#);
    let out = gramtomo(&["reconstruct", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = json(&tmp.path().join("o/reconstruction.json"));
    assert_eq!(doc["format"], "ReconstructionResult");
    assert!(doc["fidelity"].as_f64().unwrap() >= 1.0 - 1e-4);
    let trace: Vec<f64> = doc["log_likelihood"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(trace.len(), doc["iterations"].as_u64().unwrap() as usize + 1);
    assert_eq!(doc["rho"].as_array().unwrap().len(), 15);
}

#[test]
fn three_gram_modes_give_negative_wigner_regions() {
    let tmp = TempDir::new().unwrap();
    let out = gramtomo(&["reconstruct", "--dims", "3", "--out", "o", "--format", "csv"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = csv_rows(&tmp.path().join("o/wigner.csv"));
    assert_eq!(rows.len(), 81);
    let min = rows
        .iter()
        .flat_map(|r| r[1..].iter().map(|v| v.parse::<f64>().unwrap()))
        .fold(f64::INFINITY, f64::min);
    assert!(min < -0.05, "min W = {min}");
}

#[test]
fn count_file_reconstruction_matches_simulated_run() {
    let tmp = TempDir::new().unwrap();
    let out = gramtomo(&["reconstruct", "--dims", "4", "--out", "sim", "--seed", "3"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let cfg = write_config(tmp.path(), "c.json", r#"{"reconstruct": {"counts": "sim/counts.csv"}}"#);
    let out = gramtomo(&["reconstruct", "--config", cfg.to_str().unwrap(), "--dims", "4", "--out", "file"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let a = json(&tmp.path().join("sim/reconstruction.json"));
    let b = json(&tmp.path().join("file/reconstruction.json"));
    assert_eq!(a["rho"], b["rho"]);
    assert_eq!(a["log_likelihood"], b["log_likelihood"]);
    assert_eq!(b["counts_source"], "sim/counts.csv");
}

#[test]
fn count_file_length_mismatch_names_both_lengths() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("short.csv"), "phase_index,bin_index,count\n0,0,5\n0,1,7\n").unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"reconstruct": {"counts": "short.csv"}}"#);
    let out = gramtomo(&["reconstruct", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("2 rows") && msg.contains("306 outcomes"), "{msg}");
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn environment_supplies_default_output_directory() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "t.json", TOY);
    let run = |extra: &[&str]| {
        let mut args = vec!["gram-spectrum", "--config", cfg.to_str().unwrap(), "--format", "csv"];
        args.extend_from_slice(extra);
        Command::new(env!("CARGO_BIN_EXE_gramtomo"))
            .args(&args)
            .current_dir(tmp.path())
            .env("GRAMTOMO_OUT", "from-env")
            .output()
            .unwrap()
    };
    assert_eq!(run(&[]).status.code(), Some(0));
    assert!(tmp.path().join("from-env/gram_spectrum.csv").exists());
    assert_eq!(run(&["--out", "from-flag"]).status.code(), Some(0));
    assert!(tmp.path().join("from-flag/gram_spectrum.csv").exists());
}

#[test]
fn sweep_and_stability_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"cutoff": 6, "target": {"kind": "cat", "alpha": [1.0, 0.0], "parity": "even"},
            "measurement": {"kind": "homodyne", "phases": 4, "bins": 21, "range": [-4, 4]},
            "noise": {"exposure": 5000}, "solver": {"max_iterations": 300},
            "wigner": {"x_points": 5, "p_points": 7}}"#,
    );
    let cfg = cfg.to_str().unwrap();
    let out = gramtomo(&["sweep", "--config", cfg, "--trials", "3", "--dims", "1,2,6", "--out", "s"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = csv_rows(&tmp.path().join("s/sweep.csv"));
    assert_eq!(rows.len(), 2 * 3 * 3);
    assert_eq!(&rows[0][..3], &["gram", "1", "0"]);
    let doc = json(&tmp.path().join("s/sweep.json"));
    assert_eq!(doc["format"], "SweepResult");
    assert_eq!(doc["results"][1]["basis"], "fock");

    let out = gramtomo(&["stability", "--config", cfg, "--trials", "3", "--basis", "fock", "--out", "t"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for name in ["stability.csv", "stability_summary.csv", "wigner_mean.csv", "wigner_spread.csv", "wigner_trial_2.csv", "stability.json"] {
        assert!(tmp.path().join("t").join(name).exists(), "{name}");
    }
    let grid = csv_rows(&tmp.path().join("t/wigner_target.csv"));
    assert_eq!((grid.len(), grid[0].len()), (5, 8));
}

#[test]
fn every_artifact_embeds_the_resolved_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "t.json", TOY);
    let out = gramtomo(&["frames-check", "--config", cfg.to_str().unwrap(), "--out", "o", "--seed", "42"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let out = gramtomo(&["gram-spectrum", "--config", cfg.to_str().unwrap(), "--out", "o", "--seed", "42"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    for entry in fs::read_dir(tmp.path().join("o")).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let config: Value = if path.extension().unwrap() == "csv" {
            let line = text.lines().next().unwrap();
            serde_json::from_str(line.strip_prefix("# config: ").expect("config comment")).unwrap()
        } else {
            json(&path)["config"].clone()
        };
        assert_eq!(config["noise"]["seed"], 42, "{}", path.display());
        assert_eq!(config["reconstruct"]["dim"], 5, "{}", path.display());
    }
}
