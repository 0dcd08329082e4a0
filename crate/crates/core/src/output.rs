//! Result persistence.
//!
//! Data files are rendered to bytes first so reruns can be compared without
//! touching the disk. Floats use Rust's shortest round-trip formatting.
//!
//! | file | columns |
//! |------|---------|
//! | `sweep.csv` | protocol, system, q, estimate, ci95, analytic |
//! | `analytic.csv` | protocol, system, q, lambda, T, v, beta, value, abs_err_estimate |
//! | `compare.csv` | quantity, protocol, system, q, lambda, v, beta, empirical, ci95, analytic, abs_diff, pass |
//! | `ts.csv` | k, arm, q, block_reward, cumulative_regret (first run) |
//! | `ts_summary.csv` | lambda, run, oracle_arm, oracle_q, modal_arm, modal_q, identified, final_regret |
//! | `posteriors.json` | posterior snapshots of the first run, every 100 blocks |
//! | `regret.csv` | lambda, k, mean_regret, envelope |
//! | `regret_summary.csv` | lambda, runs, K, ratio_2k_over_k, below_envelope |
//!
//! Every non-empty run also writes `config.toml` (the resolved config) and
//! `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bandit::PosteriorSnapshot;
use crate::config::ExperimentConfig;
use crate::montecarlo::{AnalyticRow, CompareRow, RegretCurve, SweepResult, TsStudyRun};
use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.toml";

/// Output of one subcommand.
#[derive(Debug, Clone)]
pub enum Results {
    Empty,
    Sweep(Vec<SweepResult>),
    Analytic(Vec<AnalyticRow>),
    Compare(Vec<CompareRow>),
    Ts(Vec<TsStudyRun>),
    Regret(Vec<RegretCurve>),
}

impl Results {
    pub fn is_empty(&self) -> bool {
        match self {
            Results::Empty => true,
            Results::Sweep(r) => r.is_empty(),
            Results::Analytic(r) => r.is_empty(),
            Results::Compare(r) => r.is_empty(),
            Results::Ts(r) => r.is_empty(),
            Results::Regret(r) => r.is_empty(),
        }
    }
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Number of leading blocks excluded when picking the modal arm.
pub fn burn_in(num_blocks: usize) -> usize {
    num_blocks / 5
}

/// Renders the data files for `results`, in a fixed order.
pub fn render_data(results: &Results, config: &ExperimentConfig) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    match results {
        Results::Empty => {}
        Results::Sweep(rows) => {
            let body = rows.iter().map(|r| {
                vec![r.protocol.to_string(), r.system.to_string(), r.q.to_string(), r.estimate.to_string(), r.half_width_95.to_string(), opt(r.analytic)]
            });
            files.push(("sweep.csv".into(), csv_bytes(&["protocol", "system", "q", "estimate", "ci95", "analytic"], body)));
        }
        Results::Analytic(rows) => {
            let body = rows.iter().map(|r| {
                vec![
                    r.protocol.to_string(),
                    r.system.to_string(),
                    r.q.to_string(),
                    r.lambda.to_string(),
                    r.block_len.to_string(),
                    r.v.to_string(),
                    opt(r.beta),
                    r.value.to_string(),
                    r.abs_err.to_string(),
                ]
            });
            let header = ["protocol", "system", "q", "lambda", "T", "v", "beta", "value", "abs_err_estimate"];
            files.push(("analytic.csv".into(), csv_bytes(&header, body)));
        }
        Results::Compare(rows) => {
            let body = rows.iter().map(|r| {
                let quantity = serde_json::to_value(r.quantity).expect("enum serializes");
                vec![
                    quantity.as_str().unwrap_or_default().to_string(),
                    r.protocol.to_string(),
                    r.system.to_string(),
                    r.q.to_string(),
                    r.lambda.to_string(),
                    r.v.to_string(),
                    opt(r.beta),
                    r.empirical.to_string(),
                    r.ci95.to_string(),
                    r.analytic.to_string(),
                    r.abs_diff.to_string(),
                    r.pass.to_string(),
                ]
            });
            let header = ["quantity", "protocol", "system", "q", "lambda", "v", "beta", "empirical", "ci95", "analytic", "abs_diff", "pass"];
            files.push(("compare.csv".into(), csv_bytes(&header, body)));
        }
        Results::Ts(runs) => {
            if let Some(first) = runs.first() {
                let body = first.run.blocks.iter().map(|b| {
                    vec![b.k.to_string(), b.arm.to_string(), b.q.to_string(), b.reward.to_string(), b.cumulative_regret.to_string()]
                });
                files.push(("ts.csv".into(), csv_bytes(&["k", "arm", "q", "block_reward", "cumulative_regret"], body)));
                files.push(("posteriors.json".into(), json_bytes(&first.run.snapshots)?));
            }
            let from = burn_in(config.num_blocks);
            let body = runs.iter().map(|r| {
                let oracle = r.run.trace.oracle_arm_index;
                let modal = r.run.modal_arm(from);
                vec![
                    r.lambda.to_string(),
                    r.index.to_string(),
                    oracle.to_string(),
                    config.arms[oracle].to_string(),
                    modal.to_string(),
                    config.arms[modal].to_string(),
                    (oracle == modal).to_string(),
                    opt(r.run.trace.cumulative.last()),
                ]
            });
            let header = ["lambda", "run", "oracle_arm", "oracle_q", "modal_arm", "modal_q", "identified", "final_regret"];
            files.push(("ts_summary.csv".into(), csv_bytes(&header, body)));
        }
        Results::Regret(curves) => {
            let body = curves.iter().flat_map(|c| {
                c.mean_regret.iter().zip(&c.envelope).enumerate().map(move |(i, (m, e))| {
                    vec![c.lambda.to_string(), (i + 1).to_string(), m.to_string(), e.to_string()]
                })
            });
            files.push(("regret.csv".into(), csv_bytes(&["lambda", "k", "mean_regret", "envelope"], body)));
            let mut summary = Vec::new();
            for c in curves {
                let mut k = 1000;
                while 2 * k <= c.mean_regret.len() {
                    summary.push(vec![c.lambda.to_string(), c.runs.to_string(), k.to_string(), opt(c.doubling_ratio(k)), c.below_envelope().to_string()]);
                    k += 500;
                }
            }
            files.push(("regret_summary.csv".into(), csv_bytes(&["lambda", "runs", "K", "ratio_2k_over_k", "below_envelope"], summary)));
        }
    }
    Ok(files)
}

fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| Error::DegenerateInput(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Provenance record written next to the data files.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Manifest {
    pub toolkit_version: String,
    pub mode: String,
    pub seed: u64,
    pub config_sha256: String,
    pub wall_time_s: f64,
    pub threads: usize,
    pub files: Vec<FileEntry>,
    pub config: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EmitOptions {
    pub overwrite: bool,
    pub wall_time_s: f64,
}

/// Writes data files, the resolved config and the manifest into `out_dir`.
/// An empty result set produces the manifest alone. Existing files are only
/// replaced when `opts.overwrite` is set; nothing is written otherwise.
pub fn emit_results(results: &Results, config: &ExperimentConfig, out_dir: &Path, opts: EmitOptions) -> Result<Vec<PathBuf>> {
    let config_text = config.to_toml();
    let mut files = render_data(results, config)?;
    if !results.is_empty() {
        files.push((CONFIG.into(), config_text.clone().into_bytes()));
    }
    let manifest = Manifest {
        toolkit_version: env!("CARGO_PKG_VERSION").into(),
        mode: serde_json::to_value(config.mode).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default(),
        seed: config.seed,
        config_sha256: sha256_hex(config_text.as_bytes()),
        wall_time_s: opts.wall_time_s,
        threads: rayon::current_num_threads(),
        files: files.iter().map(|(name, data)| FileEntry { name: name.clone(), sha256: sha256_hex(data), bytes: data.len() }).collect(),
        config: config_text,
    };
    files.push((MANIFEST.into(), json_bytes(&manifest)?));

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    if !opts.overwrite {
        for (name, _) in &files {
            let path = out_dir.join(name);
            if path.exists() {
                return Err(Error::WouldOverwrite { path });
            }
        }
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, data) in files {
        let path = out_dir.join(name);
        fs::write(&path, data).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Reads posterior snapshots written by [`emit_results`].
pub fn read_snapshots(path: &Path) -> Result<Vec<PosteriorSnapshot>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::DegenerateInput(format!("{}: {e}", path.display())))
}
