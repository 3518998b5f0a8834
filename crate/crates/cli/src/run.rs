//! Run orchestration and output files.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use stoch_euler::ensemble::{
    momentum_conservation_test, run_ensemble, EnsembleStats, MomentumStatus,
    DEFAULT_MIN_REALIZATIONS,
};
use stoch_euler::snapshot::SnapshotStore;

use crate::config::RunConfig;
use crate::error::CliError;

pub const CSV_FILE: &str = "stats.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const FAILURE_FILE: &str = "failure.json";
pub const SNAPSHOT_DIR: &str = "snapshots";

pub const CSV_HEADER: &str = "t,mean_energy,time_avg_energy,mean_mass,mean_momentum,momentum_stderr,min_rho,itô_injection_rate,invariant_violations";

/// Relative mass drift allowed per realization.
pub const MASS_TOLERANCE: f64 = 1e-12;

pub fn write_csv<W: Write>(stats: &EnsembleStats, mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in &stats.rows {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.t,
            r.mean_energy,
            r.time_avg_energy,
            r.mean_mass,
            r.mean_momentum,
            r.momentum_stderr,
            r.min_rho,
            r.ito_injection_rate,
            r.invariant_violations
        )?;
    }
    Ok(())
}

pub fn config_hash(cfg: &RunConfig) -> Result<String, CliError> {
    let digest = Sha256::digest(cfg.to_toml()?.as_bytes());
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        write!(s, "{b:02x}").expect("writing to a String");
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantChecks {
    pub mass: bool,
    pub positivity: bool,
    pub invariant_region: bool,
}

impl InvariantChecks {
    pub fn all(&self) -> bool {
        self.mass && self.positivity && self.invariant_region
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub preset: Option<String>,
    pub config_hash: String,
    pub n_realizations: usize,
    pub horizon: f64,
    pub n_cells: usize,
    pub final_mean_energy: f64,
    pub final_energy_stderr: f64,
    pub final_time_avg_energy: f64,
    pub final_time_avg_energy_stderr: f64,
    /// Time average of the logged `½E∫G²∂²_qqη_E`.
    pub ito_injection_rate: f64,
    /// `½‖σ‖²_{l²}·E∫h` at t = 0, for comparison with the logged rate.
    pub sigma_l2_injection_rate: f64,
    pub final_mean_momentum: f64,
    pub final_momentum_stderr: f64,
    pub momentum_test: String,
    pub max_mass_drift: f64,
    pub max_det_momentum_drift: f64,
    pub min_rho: f64,
    pub invariant_violations: u64,
    pub max_grad_u_weighted: f64,
    pub max_u_l8: f64,
    pub invariants: InvariantChecks,
    pub passed: bool,
}

pub fn summarize(cfg: &RunConfig, stats: &EnsembleStats, hash: String) -> Summary {
    let last = stats.rows.last().expect("at least one recorded time");
    let ito = stats.rows.iter().map(|r| r.ito_injection_rate).sum::<f64>() / stats.rows.len() as f64;
    let momentum = match momentum_conservation_test(stats, DEFAULT_MIN_REALIZATIONS).status {
        MomentumStatus::Pass => "pass",
        MomentumStatus::Fail => "fail",
        MomentumStatus::InsufficientN => "insufficient_n",
    };
    let invariants = InvariantChecks {
        mass: stats.max_mass_drift() <= MASS_TOLERANCE,
        positivity: stats.min_rho() >= 0.0,
        invariant_region: stats.total_violations() == 0,
    };
    Summary {
        preset: cfg.preset.clone(),
        config_hash: hash,
        n_realizations: stats.n_realizations(),
        horizon: cfg.horizon,
        n_cells: cfg.n_cells,
        final_mean_energy: last.mean_energy,
        final_energy_stderr: last.energy_stderr,
        final_time_avg_energy: last.time_avg_energy,
        final_time_avg_energy_stderr: last.time_avg_energy_stderr,
        ito_injection_rate: ito,
        sigma_l2_injection_rate: 0.5 * cfg.noise.sigma_l2_squared() * stats.rows[0].mean_mass,
        final_mean_momentum: last.mean_momentum,
        final_momentum_stderr: last.momentum_stderr,
        momentum_test: momentum.into(),
        max_mass_drift: stats.max_mass_drift(),
        max_det_momentum_drift: stats.max_det_momentum_drift(),
        min_rho: stats.min_rho(),
        invariant_violations: stats.total_violations(),
        max_grad_u_weighted: stats.summaries().map(|s| s.grad_u_weighted).fold(0.0, f64::max),
        max_u_l8: stats.summaries().map(|s| s.u_l8).fold(0.0, f64::max),
        passed: invariants.all(),
        invariants,
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub stats: EnsembleStats,
    pub summary: Summary,
    pub snapshots: Option<SnapshotStore>,
}

/// Runs the ensemble and writes config, CSV, summary and snapshots to
/// `cfg.output_dir`. Broken hard invariants give [`CliError::Invariant`]
/// after all files are written.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let ens = cfg.ensemble_config()?;
    let hash = config_hash(cfg)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_FILE), cfg.to_toml()?)?;

    let result = run_ensemble(&ens).map_err(CliError::Run)?;
    let stats = result.stats;
    write_csv(&stats, io::BufWriter::new(fs::File::create(dir.join(CSV_FILE))?))?;
    let summary = summarize(cfg, &stats, hash.clone());
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(dir.join(SUMMARY_FILE), json + "\n")?;
    if let Some(store) = &result.snapshots {
        store.write(&dir.join(SNAPSHOT_DIR), &hash).map_err(CliError::Run)?;
    }
    if !summary.passed {
        let c = &summary.invariants;
        return Err(CliError::Invariant(format!(
            "mass {}, positivity {}, invariant region {}",
            ok(c.mass),
            ok(c.positivity),
            ok(c.invariant_region)
        )));
    }
    Ok(RunOutcome { stats, summary, snapshots: result.snapshots })
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

#[derive(Debug, Serialize)]
struct FailureRecord<'a> {
    kind: &'a str,
    exit_code: i32,
    message: String,
}

/// Writes the machine-readable failure record, to `dir` if possible, and
/// always to stdout.
pub fn report_failure(dir: Option<&Path>, err: &CliError) {
    let rec = FailureRecord { kind: err.kind(), exit_code: err.exit_code(), message: err.to_string() };
    let json = serde_json::to_string(&rec).expect("failure record serializes");
    if let Some(d) = dir {
        if fs::create_dir_all(d).is_ok() {
            let _ = fs::write(d.join(FAILURE_FILE), format!("{json}\n"));
        }
    }
    println!("{json}");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{load_preset, NoiseSpec};

    fn small(dir: &Path) -> RunConfig {
        RunConfig {
            n_realizations: 2,
            horizon: 0.01,
            n_cells: 32,
            output_stride: 2,
            output_dir: dir.to_path_buf(),
            ..load_preset("test3").unwrap()
        }
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&small(dir.path())).unwrap();
        let text = fs::read_to_string(dir.path().join(CSV_FILE)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), out.stats.rows.len());
        let first: Vec<&str> = rows[0].split(',').collect();
        assert_eq!(first.len(), 9);
        assert_eq!(first[0], "0.0000000000000000e0");
        assert_eq!(first[3].parse::<f64>().unwrap(), 1.0);
        assert!(dir.path().join(SUMMARY_FILE).exists());
        assert!(!dir.path().join(SNAPSHOT_DIR).exists());
    }

    #[test]
    fn snapshots_written_with_hash() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig { emit_snapshots: true, snapshot_realizations: 1, ..small(dir.path()) };
        run(&cfg).unwrap();
        let (store, hash) = SnapshotStore::read(&dir.path().join(SNAPSHOT_DIR)).unwrap();
        assert_eq!(hash, config_hash(&cfg).unwrap());
        assert_eq!(store.realizations(), vec![0]);
    }

    #[test]
    fn invariant_region_violation_fails_the_run() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(dir.path());
        cfg.scheme.kappa_bound = Some(1e-3);
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(dir.path().join(CSV_FILE).exists());
    }

    #[test]
    fn sigma_rate_uses_mass() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(dir.path());
        cfg.noise = NoiseSpec::Zero;
        let out = run(&cfg).unwrap();
        assert_eq!(out.summary.sigma_l2_injection_rate, 0.0);
        assert_eq!(out.summary.ito_injection_rate, 0.0);
        assert_eq!(out.summary.momentum_test, "insufficient_n");
    }
}
