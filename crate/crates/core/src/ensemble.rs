//! Monte Carlo driver over noise realizations and the ensemble diagnostics.

use rayon::prelude::*;

use crate::dynamics::{split_advance_with, RngKeys, SchemeConfig, StepKind};
use crate::entropy::energy_density;
use crate::error::{Result, SimError};
use crate::gas::{ConservedField, GasLaw, Grid};
use crate::noise::NoiseModel;
use crate::snapshot::SnapshotStore;

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub n_realizations: u32,
    /// Id of the first realization; ids are `first_realization..first_realization + n`.
    pub first_realization: u32,
    pub master_seed: u64,
    pub horizon: f64,
    /// Steps (half-periods of length τ) between recorded times.
    pub output_stride: usize,
    pub scheme: SchemeConfig,
    pub noise: NoiseModel,
    pub law: GasLaw,
    pub initial: ConservedField,
    /// Realizations with id below this keep snapshots at every recorded step.
    pub snapshot_realizations: u32,
}

impl EnsembleConfig {
    pub fn n_periods(&self) -> Result<usize> {
        let periods = self.horizon / (2.0 * self.scheme.tau);
        let rounded = periods.round();
        if !(self.horizon > 0.0) || rounded < 1.0 || (periods - rounded).abs() > 1e-9 * rounded {
            return Err(SimError::InvalidConfig(format!(
                "horizon {} is not a positive multiple of 2·tau = {}",
                self.horizon,
                2.0 * self.scheme.tau
            )));
        }
        Ok(rounded as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        self.n_periods()?;
        if self.n_realizations == 0 {
            return Err(SimError::InvalidConfig("n_realizations must be >= 1".into()));
        }
        if self.output_stride == 0 {
            return Err(SimError::InvalidConfig("output_stride must be >= 1".into()));
        }
        Grid::new(self.initial.len())?;
        Ok(())
    }

    /// Steps at which statistics are recorded: multiples of the stride plus the last step.
    pub fn record_steps(&self) -> Result<Vec<usize>> {
        let last = 2 * self.n_periods()?;
        let mut s: Vec<usize> = (0..=last).step_by(self.output_stride).collect();
        if *s.last().unwrap() != last {
            s.push(last);
        }
        Ok(s)
    }
}

/// Quantities of one trajectory over the whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationSummary {
    pub id: u32,
    /// `max_k |M(t_k) − M(0)| / M(0)`.
    pub max_mass_drift: f64,
    /// Largest relative momentum change over a single deterministic step.
    pub max_det_momentum_drift: f64,
    pub min_rho: f64,
    pub invariant_violations: u64,
    /// `∫∫ ρ|∂_x u|² 1_det dx dt`.
    pub grad_u_weighted: f64,
    /// Space-time `‖u‖_{L⁸}`.
    pub u_l8: f64,
    pub max_riemann: f64,
    pub det_substeps: u64,
}

/// Per-realization series at the recorded times.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationRecord {
    pub energy: Vec<f64>,
    pub time_avg_energy: Vec<f64>,
    pub mass: Vec<f64>,
    pub momentum: Vec<f64>,
    pub min_rho: Vec<f64>,
    /// `½∫G² ∂²_qq η_E dx = ½∫G²/ρ dx` at the recorded state.
    pub ito_rate: Vec<f64>,
    /// Violations accumulated up to the recorded time.
    pub violations: Vec<u64>,
    pub summary: RealizationSummary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsRow {
    pub t: f64,
    pub mean_energy: f64,
    pub energy_stderr: f64,
    pub time_avg_energy: f64,
    pub time_avg_energy_stderr: f64,
    pub mean_mass: f64,
    pub mean_momentum: f64,
    pub momentum_stderr: f64,
    pub min_rho: f64,
    pub ito_injection_rate: f64,
    pub invariant_violations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub rows: Vec<StatsRow>,
    /// Sorted by realization id.
    pub records: Vec<RealizationRecord>,
}

/// Sum by a fixed binary tree over the slice order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Mean and standard error of the mean (zero for a single sample).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

impl EnsembleStats {
    /// Aggregates realization records; the result depends only on the set of ids.
    pub fn from_records(
        steps: Vec<usize>,
        tau: f64,
        mut records: Vec<RealizationRecord>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(SimError::InvalidConfig("no realizations to aggregate".into()));
        }
        records.sort_by_key(|r| r.summary.id);
        if records.windows(2).any(|w| w[0].summary.id == w[1].summary.id) {
            return Err(SimError::InvalidConfig("duplicate realization id".into()));
        }
        let times: Vec<f64> = steps.iter().map(|&k| k as f64 * tau).collect();
        let rows = (0..steps.len())
            .map(|j| {
                let col = |f: &dyn Fn(&RealizationRecord) -> f64| -> Vec<f64> {
                    records.iter().map(f).collect()
                };
                let (mean_energy, energy_stderr) = mean_stderr(&col(&|r| r.energy[j]));
                let (time_avg_energy, time_avg_energy_stderr) =
                    mean_stderr(&col(&|r| r.time_avg_energy[j]));
                let (mean_mass, _) = mean_stderr(&col(&|r| r.mass[j]));
                let (mean_momentum, momentum_stderr) = mean_stderr(&col(&|r| r.momentum[j]));
                let (ito, _) = mean_stderr(&col(&|r| r.ito_rate[j]));
                StatsRow {
                    t: times[j],
                    mean_energy,
                    energy_stderr,
                    time_avg_energy,
                    time_avg_energy_stderr,
                    mean_mass,
                    mean_momentum,
                    momentum_stderr,
                    min_rho: records.iter().map(|r| r.min_rho[j]).fold(f64::INFINITY, f64::min),
                    ito_injection_rate: ito,
                    invariant_violations: records.iter().map(|r| r.violations[j]).sum(),
                }
            })
            .collect();
        Ok(Self { steps, times, rows, records })
    }

    pub fn n_realizations(&self) -> usize {
        self.records.len()
    }

    pub fn summaries(&self) -> impl Iterator<Item = &RealizationSummary> {
        self.records.iter().map(|r| &r.summary)
    }

    pub fn min_rho(&self) -> f64 {
        self.summaries().map(|s| s.min_rho).fold(f64::INFINITY, f64::min)
    }

    pub fn max_mass_drift(&self) -> f64 {
        self.summaries().map(|s| s.max_mass_drift).fold(0.0, f64::max)
    }

    pub fn max_det_momentum_drift(&self) -> f64 {
        self.summaries().map(|s| s.max_det_momentum_drift).fold(0.0, f64::max)
    }

    pub fn total_violations(&self) -> u64 {
        self.summaries().map(|s| s.invariant_violations).sum()
    }

    /// Index of the recorded time closest to `t`.
    pub fn index_at(&self, t: f64) -> usize {
        let mut best = 0;
        for (j, &s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = j;
            }
        }
        best
    }
}

#[derive(Debug)]
pub struct EnsembleRun {
    pub stats: EnsembleStats,
    pub snapshots: Option<SnapshotStore>,
}

/// Runs one realization, feeding snapshots to `store` if given.
pub fn run_realization(
    cfg: &EnsembleConfig,
    id: u32,
    store: Option<&SnapshotStore>,
) -> Result<RealizationRecord> {
    let n_periods = cfg.n_periods()?;
    let record_steps = cfg.record_steps()?;
    let grid = Grid::new(cfg.initial.len())?;
    let dx = grid.dx();
    let gn = cfg.noise.on_grid(&grid);
    let tau = cfg.scheme.tau;
    let law = cfg.law;
    let keep = store.filter(|_| id < cfg.snapshot_realizations);

    let n_rec = record_steps.len();
    let mut rec = RealizationRecord {
        energy: Vec::with_capacity(n_rec),
        time_avg_energy: Vec::with_capacity(n_rec),
        mass: Vec::with_capacity(n_rec),
        momentum: Vec::with_capacity(n_rec),
        min_rho: Vec::with_capacity(n_rec),
        ito_rate: Vec::with_capacity(n_rec),
        violations: Vec::with_capacity(n_rec),
        summary: RealizationSummary {
            id,
            max_mass_drift: 0.0,
            max_det_momentum_drift: 0.0,
            min_rho: f64::INFINITY,
            invariant_violations: 0,
            grad_u_weighted: 0.0,
            u_l8: 0.0,
            max_riemann: 0.0,
            det_substeps: 0,
        },
    };
    let mass0 = cfg.initial.total_mass(dx);
    let mut next = 0usize;
    let mut prev_energy = 0.0;
    let mut integral = 0.0;
    let mut u8 = 0.0;

    split_advance_with(
        &cfg.initial,
        &law,
        &cfg.noise,
        &cfg.scheme,
        RngKeys { master_seed: cfg.master_seed, realization_id: id },
        n_periods,
        |k, t, state, report| {
            let e: f64 = state
                .rho
                .iter()
                .zip(&state.q)
                .map(|(&r, &m)| energy_density(&law, r, m))
                .sum::<f64>()
                * dx;
            if k > 0 {
                integral += 0.5 * (prev_energy + e) * tau;
            }
            prev_energy = e;
            let s = &mut rec.summary;
            if let Some(r) = report {
                s.max_mass_drift =
                    s.max_mass_drift.max((r.mass_after - mass0).abs() / mass0.abs().max(f64::MIN_POSITIVE));
                if r.kind == StepKind::Deterministic {
                    s.max_det_momentum_drift = s.max_det_momentum_drift.max(r.relative_momentum_drift());
                    s.det_substeps += r.substeps_taken as u64;
                }
                s.min_rho = s.min_rho.min(r.min_rho);
                s.invariant_violations += r.invariant_violation_count as u64;
                s.grad_u_weighted += r.grad_u_weighted;
                s.max_riemann = s.max_riemann.max(r.max_riemann);
                u8 += r.u_pow8;
            } else {
                s.min_rho = state.rho.iter().copied().fold(f64::INFINITY, f64::min);
            }

            if next < record_steps.len() && record_steps[next] == k {
                next += 1;
                rec.energy.push(e);
                rec.time_avg_energy.push(if k == 0 { e } else { integral / t });
                rec.mass.push(state.total_mass(dx));
                rec.momentum.push(state.total_momentum(dx));
                rec.min_rho.push(state.rho.iter().copied().fold(f64::INFINITY, f64::min));
                let ito: f64 = (0..state.len())
                    .map(|i| {
                        let r = state.rho[i];
                        if r > 0.0 {
                            let u = state.q[i] / r;
                            0.5 * gn.g_squared(i, r, u) / r
                        } else {
                            0.0
                        }
                    })
                    .sum::<f64>()
                    * dx;
                rec.ito_rate.push(ito);
                rec.violations.push(rec.summary.invariant_violations);
                if let Some(store) = keep {
                    store.insert(id, k as u32, state)?;
                }
            }
            Ok(())
        },
    )?;
    rec.summary.u_l8 = u8.powf(0.125);
    Ok(rec)
}

/// Runs the ensemble in parallel; any failed realization fails the run.
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleRun> {
    cfg.validate()?;
    let store = (cfg.snapshot_realizations > 0)
        .then(|| SnapshotStore::new(cfg.initial.len(), cfg.scheme.tau));
    let ids: Vec<u32> = (0..cfg.n_realizations)
        .map(|j| {
            cfg.first_realization.checked_add(j).ok_or_else(|| {
                SimError::InvalidConfig("realization ids overflow u32".into())
            })
        })
        .collect::<Result<_>>()?;
    let results: Vec<Result<RealizationRecord>> = ids
        .par_iter()
        .map(|&id| run_realization(cfg, id, store.as_ref()))
        .collect();
    let mut records = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(e),
        }
    }
    if !failures.is_empty() {
        return Err(SimError::EnsembleFailed {
            count: failures.len(),
            first: Box::new(failures.swap_remove(0)),
        });
    }
    let stats = EnsembleStats::from_records(cfg.record_steps()?, cfg.scheme.tau, records)?;
    Ok(EnsembleRun { stats, snapshots: store })
}

/// Least-squares slope of `y` against `t`.
pub fn ls_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in t.iter().zip(y) {
        sxy += (a - tm) * (b - ym);
        sxx += (a - tm) * (a - tm);
    }
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceResidual {
    /// Mean over realizations of `slope_r − rate_r`.
    pub residual: f64,
    pub stderr: f64,
    pub slope: f64,
    pub slope_stderr: f64,
    /// Window-averaged `½E∫G²∂²_qqη_E`.
    pub ito_rate: f64,
    pub n_points: usize,
}

/// `d/dt E∫η_E − ½E∫G²∂²_qqη_E` over `[t0, t1]`.
///
/// Each realization contributes the least-squares slope of its energy over the
/// recorded times in the window minus its window-averaged Itô rate; the
/// residual and its standard error are taken across realizations.
pub fn energy_balance_residual(stats: &EnsembleStats, window: (f64, f64)) -> Result<BalanceResidual> {
    let (t0, t1) = window;
    let tol = 1e-9 * t1.abs().max(1.0);
    let idx: Vec<usize> = (0..stats.times.len())
        .filter(|&j| stats.times[j] >= t0 - tol && stats.times[j] <= t1 + tol)
        .collect();
    if idx.len() < 2 {
        return Err(SimError::InvalidConfig(format!(
            "window [{t0}, {t1}] holds {} recorded times, need at least 2",
            idx.len()
        )));
    }
    let t: Vec<f64> = idx.iter().map(|&j| stats.times[j]).collect();
    let mut slopes = Vec::with_capacity(stats.records.len());
    let mut rates = Vec::with_capacity(stats.records.len());
    let mut diffs = Vec::with_capacity(stats.records.len());
    for r in &stats.records {
        let y: Vec<f64> = idx.iter().map(|&j| r.energy[j]).collect();
        let s = ls_slope(&t, &y);
        let rate = idx.iter().map(|&j| r.ito_rate[j]).sum::<f64>() / idx.len() as f64;
        slopes.push(s);
        rates.push(rate);
        diffs.push(s - rate);
    }
    let (residual, stderr) = mean_stderr(&diffs);
    let (slope, slope_stderr) = mean_stderr(&slopes);
    let (ito_rate, _) = mean_stderr(&rates);
    Ok(BalanceResidual { residual, stderr, slope, slope_stderr, ito_rate, n_points: idx.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentumStatus {
    Pass,
    Fail,
    InsufficientN,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumCheck {
    pub t: f64,
    pub drift: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumReport {
    pub status: MomentumStatus,
    pub checks: Vec<MomentumCheck>,
}

pub const DEFAULT_MIN_REALIZATIONS: usize = 64;

/// `|E M(t) − E M(0)| ≤ 3·stderr(t)` at every recorded time. The bound carries
/// an extra `1e−12·(1 + |E M(0)|)` for round-off in pathwise-exact cases.
pub fn momentum_conservation_test(stats: &EnsembleStats, min_n: usize) -> MomentumReport {
    if stats.n_realizations() < min_n {
        return MomentumReport { status: MomentumStatus::InsufficientN, checks: vec![] };
    }
    let m0 = stats.rows[0].mean_momentum;
    let checks: Vec<MomentumCheck> = stats
        .rows
        .iter()
        .map(|r| {
            let drift = (r.mean_momentum - m0).abs();
            let bound = 3.0 * r.momentum_stderr + 1e-12 * (1.0 + m0.abs());
            MomentumCheck { t: r.t, drift, bound, pass: drift <= bound }
        })
        .collect();
    let status = if checks.iter().all(|c| c.pass) { MomentumStatus::Pass } else { MomentumStatus::Fail };
    MomentumReport { status, checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::sw_topography_modes;
    use std::f64::consts::PI;

    fn base(n_real: u32, noise: NoiseModel) -> EnsembleConfig {
        let n = 32;
        let u: Vec<f64> = (0..n).map(|i| 0.3 * (2.0 * PI * (i as f64 + 0.5) / n as f64).sin()).collect();
        EnsembleConfig {
            n_realizations: n_real,
            first_realization: 0,
            master_seed: 11,
            horizon: 0.04,
            output_stride: 4,
            scheme: SchemeConfig { tau: 1e-3, epsilon: 1e-2, ..Default::default() },
            noise,
            law: GasLaw::shallow_water(2.0).unwrap(),
            initial: ConservedField::from_primitive(vec![1.0; n], &u).unwrap(),
            snapshot_realizations: 0,
        }
    }

    fn sw_noise() -> NoiseModel {
        sw_topography_modes(2.0, &[0.05; 5], 5).unwrap()
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_inputs() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 4950.0);
        assert_eq!(mean_stderr(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn horizon_must_be_whole_periods() {
        let mut cfg = base(1, NoiseModel::zero());
        cfg.horizon = 0.0035;
        assert!(cfg.validate().is_err());
        cfg.horizon = 0.004;
        assert_eq!(cfg.n_periods().unwrap(), 2);
        cfg.output_stride = 3;
        assert_eq!(cfg.record_steps().unwrap(), vec![0, 3, 4]);
    }

    #[test]
    fn single_deterministic_run() {
        let cfg = base(1, NoiseModel::zero());
        let run = run_ensemble(&cfg).unwrap();
        let s = &run.stats;
        assert_eq!(s.n_realizations(), 1);
        assert_eq!(s.rows[0].energy_stderr, 0.0);
        let e: Vec<f64> = s.rows.iter().map(|r| r.mean_energy).collect();
        assert!(e.windows(2).all(|w| w[1] <= w[0]));
        assert!(s.rows.iter().all(|r| r.ito_injection_rate == 0.0));
        let rep = momentum_conservation_test(s, 1);
        assert_eq!(rep.status, MomentumStatus::Pass);
    }

    #[test]
    fn extending_the_ensemble_keeps_earlier_paths() {
        let small = run_ensemble(&base(2, sw_noise())).unwrap().stats;
        let large = run_ensemble(&base(4, sw_noise())).unwrap().stats;
        assert_eq!(small.records[..], large.records[..2]);
    }

    #[test]
    fn partitioned_runs_aggregate_identically() {
        let full = run_ensemble(&base(5, sw_noise())).unwrap().stats;
        let mut a = base(2, sw_noise());
        let mut b = base(3, sw_noise());
        b.first_realization = 2;
        a.first_realization = 0;
        let ra = run_ensemble(&a).unwrap().stats.records;
        let rb = run_ensemble(&b).unwrap().stats.records;
        let merged = EnsembleStats::from_records(
            full.steps.clone(),
            1e-3,
            rb.into_iter().chain(ra).collect(),
        )
        .unwrap();
        assert_eq!(merged, full);
    }

    #[test]
    fn mass_constant_and_snapshots_kept() {
        let mut cfg = base(3, sw_noise());
        cfg.snapshot_realizations = 2;
        let run = run_ensemble(&cfg).unwrap();
        let m0 = run.stats.rows[0].mean_mass;
        for r in &run.stats.rows {
            assert!((r.mean_mass - m0).abs() <= 1e-12 * m0);
        }
        let store = run.snapshots.unwrap();
        assert_eq!(store.realizations(), vec![0, 1]);
        assert_eq!(store.steps().len(), run.stats.times.len());
    }

    #[test]
    fn small_n_is_reported_not_tested() {
        let s = run_ensemble(&base(2, sw_noise())).unwrap().stats;
        let rep = momentum_conservation_test(&s, DEFAULT_MIN_REALIZATIONS);
        assert_eq!(rep.status, MomentumStatus::InsufficientN);
    }

    #[test]
    fn balance_needs_two_points() {
        let s = run_ensemble(&base(1, NoiseModel::zero())).unwrap().stats;
        assert!(energy_balance_residual(&s, (0.0, 0.0)).is_err());
        let r = energy_balance_residual(&s, (0.0, 0.04)).unwrap();
        assert!(r.residual < 0.0);
    }
}
