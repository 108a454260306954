use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(verb: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mefcons"))
        .arg(verb)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Parses a CSV, checks the header and that every field is a 17-digit
/// number; returns the rows.
fn check_csv(path: &Path, header: &[&str]) -> Vec<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let got: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(got, header, "{}", path.display());
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            assert_eq!(r.len(), header.len());
            r.iter()
                .map(|f| {
                    let digits = f.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
                    assert_eq!(digits.len(), 17, "{f}");
                    f.parse::<f64>().unwrap()
                })
                .collect()
        })
        .collect()
}

#[test]
fn simulate_two_nodes_reaches_consensus_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = scenarios().join("two_node.toml");
    let a = run("simulate", &cfg, &dir.path().join("a"), &[]);
    assert!(a.status.success(), "{}", stderr(&a));
    let rows = check_csv(
        &dir.path().join("a/trajectory.csv"),
        &["t", "x_1", "x_2", "xhat_1", "xhat_2", "e_1", "e_2", "u_1", "u_2"],
    );
    assert_eq!(rows.len(), 5001);
    let last = rows.last().unwrap();
    assert!((last[1] - last[2]).abs() < 1e-6);

    let b = run("simulate", &cfg, &dir.path().join("b"), &[]);
    assert!(b.status.success());
    assert_eq!(
        fs::read(dir.path().join("a/trajectory.csv")).unwrap(),
        fs::read(dir.path().join("b/trajectory.csv")).unwrap()
    );

    let manifest = read_json(&dir.path().join("a/manifest.json"));
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["artifacts"]["trajectory"], "trajectory.csv");
    assert_eq!(manifest["config"]["integration"]["h"], 0.01);
    assert!(manifest["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn manifest_reproduces_the_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "noisy.toml",
        r#"
seed = 3
[graph]
family = "ring"
n = 4
[initial]
x_uniform = [-1.0, 1.0]
[disturbance]
kind = "white"
delta_max = 0.5
eps_max = 0.2
[integration]
t_end = 2.0
[output]
record_measurements = true
"#,
    );
    let first = run("simulate", &cfg, &dir.path().join("first"), &[]);
    assert!(first.status.success(), "{}", stderr(&first));
    let again = run("simulate", &dir.path().join("first/manifest.json"), &dir.path().join("again"), &[]);
    assert!(again.status.success(), "{}", stderr(&again));
    for file in ["trajectory.csv", "measurements.csv"] {
        assert_eq!(
            fs::read(dir.path().join("first").join(file)).unwrap(),
            fs::read(dir.path().join("again").join(file)).unwrap(),
            "{file}"
        );
    }
    let header: Vec<String> = std::iter::once("t".to_owned())
        .chain((1..=4).map(|i| format!("y_{i}_{i}")))
        .chain(["y_1_2", "y_1_4", "y_2_1", "y_2_3", "y_3_2", "y_3_4", "y_4_1", "y_4_3"].map(String::from))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    check_csv(&dir.path().join("first/measurements.csv"), &header);

    let other = run("simulate", &cfg, &dir.path().join("other"), &["--seed", "4"]);
    assert!(other.status.success());
    assert_ne!(
        fs::read(dir.path().join("first/trajectory.csv")).unwrap(),
        fs::read(dir.path().join("other/trajectory.csv")).unwrap()
    );
    assert_eq!(read_json(&dir.path().join("other/manifest.json"))["seed"], 4);
}

#[test]
fn config_errors_exit_2_with_diagnostics() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "h.toml",
        "[graph]\nfamily = \"complete\"\nn = 2\n[initial]\nx = [0.0, 1.0]\n[integration]\nh = 0.0\n",
    );
    let o = run("simulate", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("integration.h"), "{}", stderr(&o));

    let cfg = write_config(&dir, "key.toml", "[graph]\nfamily = \"complete\"\nn = 2\nsize = 3\n[initial]\nx = [0.0, 1.0]\n");
    let o = run("simulate", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));

    let o = run("simulate", &dir.path().join("missing.toml"), &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_blow_up_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "stiff.toml",
        "[graph]\nfamily = \"complete\"\nn = 3\n[filter]\nr = 1e-4\n[initial]\nx = [0.0, 1.0, 2.0]\n[integration]\nh = 1.0\nt_end = 5000.0\n",
    );
    let o = run("simulate", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("non-finite"));
}

#[test]
fn analyze_reports() {
    let dir = TempDir::new().unwrap();
    let o = run("analyze", &scenarios().join("two_node.toml"), &dir.path().join("a"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout: Value = serde_json::from_slice(&o.stdout).unwrap();
    let report = read_json(&dir.path().join("a/report.json"));
    assert_eq!(stdout, report);
    assert_eq!(report["spectral"]["zero_count"], 1);
    assert!((report["equilibrium"]["x_star"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(report["phi_max"], 0.0);

    let o = run("analyze", &scenarios().join("two_ring_sinusoid.toml"), &dir.path().join("b"), &[]);
    assert!(o.status.success());
    let report = read_json(&dir.path().join("b/report.json"));
    assert!((report["phi_max"].as_f64().unwrap() - 0.68284).abs() < 1e-5);
    let a = report["exp_bound"]["a"].as_f64().unwrap();
    let b = report["exp_bound"]["b"].as_f64().unwrap();
    let ball = report["iss_ball_radius"].as_f64().unwrap();
    assert!((ball - b * report["phi_max"].as_f64().unwrap() / a).abs() < 1e-12);

    let o = run("analyze", &scenarios().join("disconnected.toml"), &dir.path().join("c"), &[]);
    assert!(o.status.success());
    let report = read_json(&dir.path().join("c/report.json"));
    assert_eq!(report["spectral"]["zero_count"], 2);
    assert!(report["equilibrium"].is_null());
    assert!(stderr(&o).contains("2 zero eigenvalues"));
}

#[test]
fn envelope_without_decay_constants_exits_4() {
    // B = 0 zeroes the gain, so the zero eigenvalue of F is defective
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "b0.toml",
        "[graph]\nfamily = \"complete\"\nn = 3\n[filter]\nb = 0.0\n[initial]\nx = [0.0, 1.0, 2.0]\n",
    );
    let o = run("envelope", &cfg, &dir.path().join("a"), &[]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let o = run("analyze", &cfg, &dir.path().join("b"), &[]);
    assert!(o.status.success());
    assert!(read_json(&dir.path().join("b/report.json"))["exp_bound"].is_null());
}

#[test]
fn compare_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "quiet.toml",
        "[graph]\nfamily = \"complete\"\nn = 5\n[initial]\nx = [0.0, 1.0, 2.0, 3.0, 4.0]\n[integration]\nt_end = 40.0\n",
    );
    let o = run("compare", &cfg, &dir.path().join("q"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = check_csv(&dir.path().join("q/compare.csv"), &["t", "baseline_deviation", "mef_deviation"]);
    let last = rows.last().unwrap();
    assert!(last[1] < 1e-12 && last[2] < 1e-9, "{last:?}");
    assert!((rows[0][1] - 10.0).abs() < 1e-12);

    let cfg = write_config(
        &dir,
        "k100.toml",
        "seed = 2\n[graph]\nfamily = \"complete\"\nn = 100\n[initial]\nx_uniform = [-1.0, 1.0]\n[disturbance]\nkind = \"white\"\ndelta_max = 1.0\neps_max = 1.0\n[integration]\nt_end = 1.0\n",
    );
    let o = run("compare", &cfg, &dir.path().join("k"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = read_json(&dir.path().join("k/compare_summary.json"));
    assert!((summary["analytical_d_ave"].as_f64().unwrap() - 0.495).abs() < 1e-12);
    assert_eq!(summary["nodes"], 100);
    assert!(summary["baseline"]["empirical_deviation"].as_f64().unwrap() > 0.0);
}

#[test]
fn envelope_checks() {
    let dir = TempDir::new().unwrap();
    let o = run("envelope", &scenarios().join("two_ring_sinusoid.toml"), &dir.path().join("a"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = check_csv(&dir.path().join("a/envelope.csv"), &["t", "disagreement_norm", "envelope"]);
    assert!(rows.iter().all(|r| r[1] <= r[2]));
    let summary = read_json(&dir.path().join("a/envelope_summary.json"));
    assert_eq!(summary["violations"], 0);

    // no disturbance: the envelope is a pure exponential
    let o = run("envelope", &scenarios().join("two_node.toml"), &dir.path().join("b"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = read_json(&dir.path().join("b/envelope_summary.json"));
    let (a, b, z0) = (
        summary["a"].as_f64().unwrap(),
        summary["b"].as_f64().unwrap(),
        summary["initial_norm"].as_f64().unwrap(),
    );
    assert_eq!(summary["phi_max"], 0.0);
    for r in check_csv(&dir.path().join("b/envelope.csv"), &["t", "disagreement_norm", "envelope"]) {
        assert!((r[2] - b * z0 * (-a * r[0]).exp()).abs() <= 1e-15 * (1.0 + r[2]));
    }

    let o = run("envelope", &scenarios().join("complete100_white.toml"), &dir.path().join("c"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bounded and continuous"));
}

#[test]
fn riccati_flag_is_echoed() {
    let dir = TempDir::new().unwrap();
    let o = run("simulate", &scenarios().join("two_node.toml"), &dir.path().join("a"), &["--riccati", "dynamic"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_json(&dir.path().join("a/manifest.json"))["config"]["filter"]["riccati"], "dynamic");
}
