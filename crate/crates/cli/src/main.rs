use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use stoch_euler_cli::config::{parse_table, resolve};
use stoch_euler_cli::run::{report_failure, run};
use stoch_euler_cli::CliError;
use toml::{Table, Value};

/// Monte Carlo runs of the stochastically forced shallow-water system.
#[derive(Debug, Parser)]
#[command(name = "stoch-euler", version)]
struct Args {
    /// TOML config file with dotted sections (scheme.epsilon, noise.kind, ...).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Experiment preset: test1, test2, test3, test4 or custom.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, value_name = "N")]
    realizations: Option<u32>,
    /// Final time T; must be a multiple of 2·tau.
    #[arg(long, value_name = "T")]
    horizon: Option<f64>,
    #[arg(long, value_name = "N")]
    cells: Option<usize>,
    #[arg(long, value_name = "F")]
    tau: Option<f64>,
    #[arg(long, value_name = "F")]
    epsilon: Option<f64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Store per-realization snapshots in <out>/snapshots.
    #[arg(long)]
    snapshots: bool,
}

impl Args {
    fn flag_table(&self) -> Result<Table, CliError> {
        let mut t = Table::new();
        let mut scheme = Table::new();
        if let Some(p) = &self.preset {
            t.insert("preset".into(), Value::String(p.clone()));
        }
        if let Some(s) = self.seed {
            let s = i64::try_from(s)
                .map_err(|_| CliError::Config("--seed must be below 2^63".into()))?;
            t.insert("master_seed".into(), Value::Integer(s));
        }
        if let Some(n) = self.realizations {
            t.insert("n_realizations".into(), Value::Integer(n.into()));
        }
        if let Some(h) = self.horizon {
            t.insert("horizon".into(), Value::Float(h));
        }
        if let Some(n) = self.cells {
            let n = i64::try_from(n).map_err(|_| CliError::Config("--cells is too large".into()))?;
            t.insert("n_cells".into(), Value::Integer(n));
        }
        if let Some(x) = self.tau {
            scheme.insert("tau".into(), Value::Float(x));
        }
        if let Some(x) = self.epsilon {
            scheme.insert("epsilon".into(), Value::Float(x));
        }
        if !scheme.is_empty() {
            t.insert("scheme".into(), Value::Table(scheme));
        }
        if let Some(d) = &self.out {
            let s = d
                .to_str()
                .ok_or_else(|| CliError::Config("--out must be valid UTF-8".into()))?;
            t.insert("output_dir".into(), Value::String(s.into()));
        }
        if self.snapshots {
            t.insert("emit_snapshots".into(), Value::Boolean(true));
        }
        Ok(t)
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let cfg = (|| {
        let file = match &args.config {
            Some(p) => Some(parse_table(&std::fs::read_to_string(p).map_err(|e| {
                CliError::Config(format!("cannot read {}: {e}", p.display()))
            })?)?),
            None => None,
        };
        resolve(file, args.flag_table()?)
    })();
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            report_failure(args.out.as_deref(), &e);
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&cfg) {
        Ok(out) => {
            let s = &out.summary;
            eprintln!(
                "{} realizations to t = {}: time-averaged energy {:.6e} ± {:.2e}, min rho {:.3e}, invariants ok",
                s.n_realizations, s.horizon, s.final_time_avg_energy, s.final_time_avg_energy_stderr, s.min_rho
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            report_failure(Some(&cfg.output_dir), &e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
