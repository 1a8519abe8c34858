//! CSV, JSON and manifest writers.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, State, TransitionKernel};
use crate::sim::{mean_std, Aggregate, Domain, ExperimentConfig, RunRecord, SweepPoint};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FAIR_RMAB_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub config_hash: String,
    pub seed: u64,
    pub episode: u64,
    pub fr_t: f64,
    pub fr_cum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureRow {
    pub config_hash: String,
    pub seed: u64,
    pub arm: usize,
    pub pulls: u64,
    pub mu_star: f64,
    pub pi_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub config_hash: String,
    pub seed: u64,
    pub episode: u64,
    pub arm: usize,
    pub d_00: f64,
    pub d_01: f64,
    pub d_10: f64,
    pub d_11: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub contains_truth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub config_hash: String,
    pub ratio: f64,
    pub k: usize,
    pub n: usize,
    pub fr_final_mean: f64,
    pub fr_final_std: f64,
}

impl From<&SweepPoint> for SweepRow {
    fn from(p: &SweepPoint) -> Self {
        Self {
            config_hash: p.config_hash.clone(),
            ratio: p.ratio,
            k: p.k,
            n: p.n,
            fr_final_mean: p.fr_final_mean,
            fr_final_std: p.fr_final_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRow {
    pub arm: usize,
    pub s: usize,
    pub a: usize,
    pub p_to_good: f64,
}

impl KernelRow {
    pub fn table(kernels: &[TransitionKernel]) -> Vec<KernelRow> {
        let mut rows = Vec::with_capacity(4 * kernels.len());
        for (arm, k) in kernels.iter().enumerate() {
            for s in State::ALL {
                for a in Action::ALL {
                    rows.push(KernelRow {
                        arm,
                        s: s.index(),
                        a: a.index(),
                        p_to_good: k.to_good(s, a),
                    });
                }
            }
        }
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub domain: Domain,
    pub n: usize,
    pub k: usize,
    /// Empty when no run visited every pair of every arm.
    pub g_mean: Option<f64>,
    pub g_std: Option<f64>,
    pub t0_mean: f64,
    pub t0_std: f64,
}

impl Table1Row {
    pub fn new(cfg: &ExperimentConfig, agg: &Aggregate) -> Self {
        Self {
            domain: cfg.domain,
            n: cfg.num_arms,
            k: cfg.budget,
            g_mean: agg.g_mean,
            g_std: agg.g_std,
            t0_mean: agg.t0_mean,
            t0_std: agg.t0_std,
        }
    }
}

/// Seed-aggregated figures for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub final_fr_mean: f64,
    pub final_fr_std: f64,
    pub t0_mean: f64,
    pub t0_std: f64,
    pub t0_max: u64,
    pub g_mean: Option<f64>,
    pub g_std: Option<f64>,
    pub eta: Option<f64>,
    pub omega: Option<f64>,
    pub coverage_failure_rate: f64,
    pub envelope_violations: u64,
    pub runs_assumption_verified: usize,
}

impl Summary {
    pub fn new(records: &[RunRecord], agg: &Aggregate) -> Self {
        let episodes: usize = records.iter().map(RunRecord::episodes).sum();
        let failures: usize = records.iter().map(RunRecord::coverage_failures).sum();
        Self {
            config_hash: agg.config_hash.clone(),
            seeds: agg.seeds.clone(),
            final_fr_mean: agg.final_fr_mean,
            final_fr_std: agg.final_fr_std,
            t0_mean: agg.t0_mean,
            t0_std: agg.t0_std,
            t0_max: records.iter().map(|r| r.t0).max().unwrap_or(0),
            g_mean: agg.g_mean,
            g_std: agg.g_std,
            eta: agg.eta_max,
            omega: agg.omega_max,
            coverage_failure_rate: failures as f64 / episodes.max(1) as f64,
            envelope_violations: records.iter().map(|r| r.reward_envelope().violations).sum(),
            runs_assumption_verified: records.iter().filter(|r| r.assumption_verified).count(),
        }
    }
}

/// One line of `manifests.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub version: String,
    pub outputs: Vec<PathBuf>,
    pub config: ExperimentConfig,
    pub optimal_pi_normalization: String,
    pub noise_semantics: String,
    pub carry_over_state: bool,
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig, outputs: Vec<PathBuf>) -> Self {
        Self {
            command: command.to_string(),
            config_hash: cfg.config_hash(),
            seeds: cfg.seeds.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs,
            config: cfg.clone(),
            optimal_pi_normalization: "indicator-over-k".to_string(),
            noise_semantics: serde_json::to_value(cfg.cpap_noise_semantics)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            carry_over_state: cfg.carry_over_state,
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidConfig(format!("csv: {other:?}")),
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn append_manifest(out: &Path, manifest: &Manifest) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(out.join("manifests.jsonl"))?;
    writeln!(f, "{}", serde_json::to_string(manifest)?)?;
    Ok(())
}

/// Writes regret, exposure, diagnostics and summary files into `dir`.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, records: &[RunRecord], agg: &Aggregate) -> Result<Vec<PathBuf>> {
    let hash = cfg.config_hash();
    let regret = dir.join("regret.csv");
    write_rows(
        &regret,
        records.iter().flat_map(|r| {
            let hash = &hash;
            r.regret
                .per_episode
                .iter()
                .zip(&r.regret.cumulative)
                .enumerate()
                .map(move |(t, (&fr_t, &fr_cum))| RegretRow {
                    config_hash: hash.clone(),
                    seed: r.seed,
                    episode: t as u64 + 1,
                    fr_t,
                    fr_cum,
                })
        }),
    )?;

    let exposure = dir.join("exposure.csv");
    write_rows(
        &exposure,
        records.iter().flat_map(|r| {
            let hash = &hash;
            (0..r.num_arms).map(move |arm| ExposureRow {
                config_hash: hash.clone(),
                seed: r.seed,
                arm,
                pulls: r.exposure[arm],
                mu_star: r.mu_star[arm],
                pi_star: r.pi_star[arm],
            })
        }),
    )?;

    let diagnostics = dir.join("diagnostics.csv");
    write_rows(
        &diagnostics,
        records.iter().flat_map(|r| {
            let hash = &hash;
            r.arm_stats.iter().enumerate().flat_map(move |(t, ep)| {
                ep.iter().enumerate().map(move |(arm, s)| DiagnosticsRow {
                    config_hash: hash.clone(),
                    seed: r.seed,
                    episode: t as u64 + 1,
                    arm,
                    d_00: s.radii.0[0][0],
                    d_01: s.radii.0[0][1],
                    d_10: s.radii.0[1][0],
                    d_11: s.radii.0[1][1],
                    eta1: s.gaps.eta1,
                    eta2: s.gaps.eta2,
                    omega1: s.gaps.omega1,
                    omega2: s.gaps.omega2,
                    contains_truth: s.contains_truth,
                })
            })
        }),
    )?;

    let summary = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&Summary::new(records, agg))?;
    text.push('\n');
    std::fs::write(&summary, text)?;

    let (fr, _) = mean_std(&records.iter().map(|r| r.regret.total()).collect::<Vec<_>>());
    log::debug!("wrote {} runs (mean FR^T {fr:.3}) to {}", records.len(), dir.display());
    Ok(vec![regret, exposure, diagnostics, summary])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(path: &Path) -> String {
        std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
    }

    #[test]
    fn headers_are_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            episodes: 3,
            horizon: 5,
            seeds: vec![0, 1],
            ..Default::default()
        };
        let records: Vec<_> = cfg
            .seeds
            .iter()
            .map(|&s| crate::sim::run_experiment(&cfg, s).unwrap())
            .collect();
        let agg = crate::sim::aggregate_runs(&records).unwrap();
        let paths = write_run(dir.path(), &cfg, &records, &agg).unwrap();
        assert_eq!(header(&paths[0]), "config_hash,seed,episode,fr_t,fr_cum");
        assert_eq!(header(&paths[1]), "config_hash,seed,arm,pulls,mu_star,pi_star");
        assert_eq!(
            header(&paths[2]),
            "config_hash,seed,episode,arm,d_00,d_01,d_10,d_11,eta1,eta2,omega1,omega2,contains_truth"
        );
        let regret = std::fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(regret.lines().count(), 1 + 2 * 3);

        let sweep = dir.path().join("sweep.csv");
        write_rows(
            &sweep,
            [SweepRow {
                config_hash: "x".into(),
                ratio: 0.5,
                k: 1,
                n: 2,
                fr_final_mean: 1.0,
                fr_final_std: 0.0,
            }],
        )
        .unwrap();
        assert_eq!(header(&sweep), "config_hash,ratio,k,n,fr_final_mean,fr_final_std");

        let kernels = dir.path().join("kernels.csv");
        write_rows(&kernels, KernelRow::table(&cfg.population(0).unwrap())).unwrap();
        assert_eq!(header(&kernels), "arm,s,a,p_to_good");
        assert_eq!(std::fs::read_to_string(&kernels).unwrap().lines().count(), 1 + 4 * 5);
    }

    #[test]
    fn table1_row_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_rows(
            &path,
            [Table1Row {
                domain: Domain::SyntheticAlternate,
                n: 5,
                k: 1,
                g_mean: None,
                g_std: None,
                t0_mean: 8.5,
                t0_std: 1.0,
            }],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "domain,n,k,g_mean,g_std,t0_mean,t0_std\nsynthetic-alternate,5,1,,,8.5,1.0\n");
    }

    #[test]
    fn manifests_append() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::default();
        for _ in 0..2 {
            append_manifest(dir.path(), &Manifest::new("run", &cfg, vec![])).unwrap();
        }
        let text = std::fs::read_to_string(dir.path().join("manifests.jsonl")).unwrap();
        assert_eq!(text.lines().count(), 2);
        let m: Manifest = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(m.config_hash, cfg.config_hash());
        assert_eq!(m.noise_semantics, "std");
    }
}
