use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fair_rmab::cli::load_config;
use fair_rmab::ExperimentConfig;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fair-rmab"));
    c.env("RUST_LOG", "warn").env_remove("FAIR_RMAB_OUT");
    c
}

fn small(out: &Path) -> Vec<String> {
    ["--episodes", "40", "--horizon", "20", "--seeds", "3", "--out"]
        .iter()
        .map(|s| s.to_string())
        .chain([out.display().to_string()])
        .collect()
}

fn output_dir(o: &Output) -> PathBuf {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    PathBuf::from(String::from_utf8(o.stdout.clone()).unwrap().trim())
}

#[test]
fn run_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin().arg("run").args(small(tmp.path())).output().unwrap();
    let dir = output_dir(&o);
    for f in ["regret.csv", "exposure.csv", "diagnostics.csv", "summary.json"] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let regret = std::fs::read_to_string(dir.join("regret.csv")).unwrap();
    assert_eq!(regret.lines().count(), 1 + 3 * 40);
    let diagnostics = std::fs::read_to_string(dir.join("diagnostics.csv")).unwrap();
    assert_eq!(diagnostics.lines().count(), 1 + 3 * 40 * 5);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    for key in ["final_fr_mean", "final_fr_std", "t0_mean", "g_mean", "eta", "omega"] {
        assert!(summary.get(key).is_some(), "summary lacks {key}");
    }

    let manifest = std::fs::read_to_string(tmp.path().join("manifests.jsonl")).unwrap();
    let line: serde_json::Value = serde_json::from_str(manifest.lines().next().unwrap()).unwrap();
    assert_eq!(line["command"], "run");
    assert_eq!(line["seeds"], serde_json::json!([0, 1, 2]));
    assert_eq!(line["optimal_pi_normalization"], "indicator-over-k");
}

#[test]
fn sweep_has_one_row_per_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "--arms", "10", "--sweep-kn", "0.1,0.2,0.3,0.4,0.5,0.8"])
        .args(small(tmp.path()))
        .output()
        .unwrap();
    let sweep = std::fs::read_to_string(output_dir(&o).join("sweep.csv")).unwrap();
    let mut lines = sweep.lines();
    assert_eq!(lines.next().unwrap(), "config_hash,ratio,k,n,fr_final_mean,fr_final_std");
    let ks: Vec<String> = lines.map(|l| l.split(',').nth(2).unwrap().to_string()).collect();
    assert_eq!(ks, ["1", "2", "3", "4", "5", "8"]);
}

#[test]
fn table1_and_kernels() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["table1", "--grid", "5:1,10:2", "--domains", "synthetic,cpap"])
        .args(small(tmp.path()))
        .output()
        .unwrap();
    let table = std::fs::read_to_string(output_dir(&o).join("table1.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "domain,n,k,g_mean,g_std,t0_mean,t0_std");
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("cpap,10,2,"));

    let o = bin()
        .args(["kernels", "--domain", "cpap", "--arms", "10", "--seed-list", "7", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    let kernels = std::fs::read_to_string(output_dir(&o).join("kernels-7.csv")).unwrap();
    assert_eq!(kernels.lines().next().unwrap(), "arm,s,a,p_to_good");
    assert_eq!(kernels.lines().count(), 1 + 40);
    for line in kernels.lines().skip(1) {
        let p: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((0.01..=0.99).contains(&p));
    }
}

#[test]
fn print_config_round_trips() {
    let o = bin().args(["run", "--arms", "12", "--budget", "3", "--print-config"]).output().unwrap();
    assert!(o.status.success());
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("c.toml");
    std::fs::write(&path, &o.stdout).unwrap();
    let cfg = load_config(&path).unwrap();
    assert_eq!(
        cfg,
        ExperimentConfig {
            num_arms: 12,
            budget: 3,
            ..Default::default()
        }
    );
    let o = bin().args(["run", "--config"]).arg(&path).arg("--print-config").output().unwrap();
    assert_eq!(o.stdout, std::fs::read(&path).unwrap());
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["run", "--arms", "1", "--budget", "1"],
        vec!["run", "--budget", "6"],
        vec!["run", "--algo", "greedy"],
        vec!["run", "--arms", "10", "--sweep-kn", "0.25"],
        vec!["table1", "--grid", "1:1"],
        vec!["run", "--config", "/nonexistent/config.toml"],
    ] {
        let o = bin().args(&args).arg("--out").arg(tmp.path()).output().unwrap();
        let code = o.status.code().unwrap();
        assert!(code == 2 || (code == 1 && args.contains(&"--config")), "{args:?} exited {code}");
    }
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "num_arms = \"five\"\n").unwrap();
    let o = bin().args(["run", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .env("FAIR_RMAB_OUT", tmp.path())
        .args(["run", "--episodes", "5", "--horizon", "5", "--seeds", "1"])
        .output()
        .unwrap();
    assert!(output_dir(&o).starts_with(tmp.path()));
    assert!(tmp.path().join("manifests.jsonl").is_file());
}
