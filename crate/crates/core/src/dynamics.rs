//! Time splitting of the viscous stochastic system.
//!
//! On `[t_{2k}, t_{2k+1})` the deterministic system `∂_t U + 2∂_x F(U) = 2ε ∂²_xx U`
//! is advanced; on `[t_{2k+1}, t_{2k+2})` the momentum follows
//! `dq = √2 Σ_k σ_k(x, ρ, u) dβ_k` with `ρ` frozen. Transport uses a
//! first-order Rusanov flux; diffusion is the exact spectral heat propagator
//! applied after every transport substep.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::gas::{in_region, riemann_invariants, ConservedField, GasLaw, Grid};
use crate::heat::HeatSolver;
use crate::noise::{sample_increments, GridNoise, NoiseModel, WienerIncrement};

/// Densities in `[−NEGATIVE_TOLERANCE, 0)` after a substep are clipped to vacuum.
pub const NEGATIVE_TOLERANCE: f64 = 1e-13;

/// Symbol of the diffusion propagator applied after each transport substep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Diffusion {
    /// Exact heat semigroup, `e^{−4π²n²νt}`.
    #[default]
    Spectral,
    /// Exponential of the three-point Laplacian; positivity preserving.
    Lattice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeConfig {
    /// Viscosity ε.
    pub epsilon: f64,
    /// Splitting interval τ.
    pub tau: f64,
    /// Courant number for the transport substeps.
    pub cfl: f64,
    /// Cells with `ρ ≤ rho_floor` use the vacuum convention `u = 0`.
    pub rho_floor: f64,
    /// Cells outside `Λ_{kappa_bound}` are counted as invariant-region violations.
    pub kappa_bound: Option<f64>,
    /// Euler–Maruyama substeps per stochastic interval.
    pub sto_substeps: usize,
    /// Blow-up ceiling for `max(|u| + c)`.
    pub max_wave_speed: f64,
    /// Guard on transport substeps per deterministic interval.
    pub max_substeps: usize,
    pub diffusion: Diffusion,
    /// Test hook: `false` drops the flux and leaves pure diffusion.
    pub transport: bool,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            tau: 1e-3,
            cfl: 0.45,
            rho_floor: 0.0,
            kappa_bound: None,
            sto_substeps: 4,
            max_wave_speed: 1e5,
            max_substeps: 1_000_000,
            diffusion: Diffusion::Spectral,
            transport: true,
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return bad(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return bad(format!("tau must be > 0, got {}", self.tau));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must be in (0, 1], got {}", self.cfl));
        }
        if !(self.rho_floor >= 0.0) {
            return bad(format!("rho_floor must be >= 0, got {}", self.rho_floor));
        }
        if let Some(k) = self.kappa_bound {
            if !(k >= 0.0) {
                return bad(format!("kappa_bound must be >= 0, got {k}"));
            }
        }
        if self.sto_substeps == 0 {
            return bad("sto_substeps must be >= 1".into());
        }
        if !(self.max_wave_speed > 0.0) {
            return bad("max_wave_speed must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Deterministic,
    Stochastic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub kind: StepKind,
    pub mass_before: f64,
    pub mass_after: f64,
    pub momentum_before: f64,
    pub momentum_after: f64,
    /// `∫|q| dx` before the step; scale for momentum drift.
    pub momentum_scale: f64,
    pub min_rho: f64,
    /// `max(|z|, |w|)` over cells above round-off density after the step.
    pub max_riemann: f64,
    pub substeps_taken: usize,
    pub invariant_violation_count: usize,
    /// `∫∫ ρ|∂_x u|² dx dt` over the step (zero for stochastic steps).
    pub grad_u_weighted: f64,
    /// `∫∫ |u|⁸ dx dt` over the step, end-state rectangle rule.
    pub u_pow8: f64,
}

impl StepReport {
    pub fn relative_mass_drift(&self) -> f64 {
        (self.mass_after - self.mass_before).abs() / self.mass_before.abs().max(f64::MIN_POSITIVE)
    }

    pub fn relative_momentum_drift(&self) -> f64 {
        let scale = self.momentum_scale.max(self.momentum_before.abs());
        if scale == 0.0 {
            (self.momentum_after - self.momentum_before).abs()
        } else {
            (self.momentum_after - self.momentum_before).abs() / scale
        }
    }
}

/// Per-trajectory workspace: FFT plans and flux buffers for one grid.
#[derive(Debug, Clone)]
pub struct Stepper {
    law: GasLaw,
    grid: Grid,
    cfg: SchemeConfig,
    heat: HeatSolver,
    vel: Vec<f64>,
    speed: Vec<f64>,
    flux_rho: Vec<f64>,
    flux_q: Vec<f64>,
}

impl Stepper {
    pub fn new(law: GasLaw, grid: Grid, cfg: SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        let n = grid.n_cells();
        let heat = match cfg.diffusion {
            Diffusion::Spectral => HeatSolver::new(n),
            Diffusion::Lattice => HeatSolver::lattice(n),
        };
        Ok(Self {
            law,
            grid,
            cfg,
            heat,
            vel: vec![0.0; n],
            speed: vec![0.0; n],
            flux_rho: vec![0.0; n],
            flux_q: vec![0.0; n],
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn law(&self) -> &GasLaw {
        &self.law
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    fn vel_of(&self, rho: f64, q: f64) -> f64 {
        if rho > self.cfg.rho_floor && rho > 0.0 {
            q / rho
        } else {
            0.0
        }
    }

    fn check_len(&self, field: &ConservedField) -> Result<()> {
        if field.len() != self.grid.n_cells() {
            return Err(SimError::InvalidConfig(format!(
                "field has {} cells, grid has {}",
                field.len(),
                self.grid.n_cells()
            )));
        }
        Ok(())
    }

    /// Advances `∂_t U + 2∂_x F(U) = 2ε ∂²_xx U` over `dt`.
    pub fn det_step(&mut self, field: &mut ConservedField, dt: f64) -> Result<StepReport> {
        self.check_len(field)?;
        if !(dt >= 0.0) {
            return Err(SimError::Domain(format!("dt must be >= 0, got {dt}")));
        }
        let n = self.grid.n_cells();
        let dx = self.grid.dx();
        let (mass_before, momentum_before, momentum_scale) = totals(field, dx);
        let mut t = 0.0;
        let mut substeps = 0usize;
        let mut grad_u_weighted = 0.0;
        let nu = 2.0 * self.cfg.epsilon;

        while dt - t > 1e-14 * dt {
            let remaining = dt - t;
            let h = if self.cfg.transport {
                let mut amax = 0.0_f64;
                for i in 0..n {
                    let (r, m) = (field.rho[i], field.q[i]);
                    let u = self.vel_of(r, m);
                    let a = u.abs() + self.law.sound_speed_unchecked(r.max(0.0));
                    self.vel[i] = u;
                    self.speed[i] = a;
                    amax = amax.max(a);
                }
                if !(amax <= self.cfg.max_wave_speed) {
                    return Err(SimError::BlowUp { speed: amax, ceiling: self.cfg.max_wave_speed });
                }
                let h = if amax > 0.0 {
                    (self.cfg.cfl * dx / (2.0 * amax)).min(remaining)
                } else {
                    remaining
                };
                self.transport(field, h);
                h
            } else {
                remaining
            };

            if nu > 0.0 {
                self.heat.apply_pair(&mut field.rho, &mut field.q, nu, h);
            }
            for i in 0..n {
                let r = field.rho[i];
                if r < 0.0 {
                    if r < -NEGATIVE_TOLERANCE {
                        return Err(SimError::NegativeDensity { cell: i, value: r });
                    }
                    field.rho[i] = 0.0;
                    field.q[i] = 0.0;
                }
            }
            grad_u_weighted += h * self.weighted_gradient(field);

            t += h;
            substeps += 1;
            if substeps > self.cfg.max_substeps {
                return Err(SimError::BlowUp {
                    speed: f64::INFINITY,
                    ceiling: self.cfg.max_wave_speed,
                });
            }
        }
        Ok(self.report(
            StepKind::Deterministic,
            field,
            dt,
            (mass_before, momentum_before, momentum_scale),
            substeps,
            grad_u_weighted,
        ))
    }

    /// One forward-Euler Rusanov update with the ×2 speed factor. Expects
    /// `self.vel` and `self.speed` filled from `field`.
    fn transport(&mut self, field: &mut ConservedField, h: f64) {
        let n = self.grid.n_cells();
        let ratio = 2.0 * h / self.grid.dx();
        // interface i carries the flux between cells i and i+1
        for i in 0..n {
            let j = if i + 1 == n { 0 } else { i + 1 };
            let (rl, ql, ul) = (field.rho[i], field.q[i], self.vel[i]);
            let (rr, qr, ur) = (field.rho[j], field.q[j], self.vel[j]);
            let a = self.speed[i].max(self.speed[j]);
            let fl = ql * ul + self.law.pressure_unchecked(rl.max(0.0));
            let fr = qr * ur + self.law.pressure_unchecked(rr.max(0.0));
            self.flux_rho[i] = 0.5 * (ql + qr) - 0.5 * a * (rr - rl);
            self.flux_q[i] = 0.5 * (fl + fr) - 0.5 * a * (qr - ql);
        }
        for i in 0..n {
            let left = if i == 0 { n - 1 } else { i - 1 };
            field.rho[i] -= ratio * (self.flux_rho[i] - self.flux_rho[left]);
            field.q[i] -= ratio * (self.flux_q[i] - self.flux_q[left]);
        }
    }

    /// `∫ ρ |∂_x u|² dx` with centered differences.
    fn weighted_gradient(&mut self, field: &ConservedField) -> f64 {
        let n = self.grid.n_cells();
        let dx = self.grid.dx();
        for i in 0..n {
            self.vel[i] = self.vel_of(field.rho[i], field.q[i]);
        }
        let mut s = 0.0;
        for i in 0..n {
            let l = if i == 0 { n - 1 } else { i - 1 };
            let r = if i + 1 == n { 0 } else { i + 1 };
            let du = (self.vel[r] - self.vel[l]) / (2.0 * dx);
            s += field.rho[i] * du * du;
        }
        s * dx
    }

    /// Euler–Maruyama for `dq = √2 Σ σ_k dβ_k`, one substep per increment.
    pub fn sto_step(
        &mut self,
        field: &mut ConservedField,
        noise: &GridNoise<'_>,
        increments: &[WienerIncrement],
    ) -> Result<StepReport> {
        self.check_len(field)?;
        let dx = self.grid.dx();
        let before = totals(field, dx);
        let mut dt = 0.0;
        for inc in increments {
            if inc.dw.len() != noise.n_modes() {
                return Err(SimError::InvalidConfig(format!(
                    "increment has {} modes, noise has {}",
                    inc.dw.len(),
                    noise.n_modes()
                )));
            }
            dt += inc.dt;
            if noise.n_modes() == 0 {
                continue;
            }
            for i in 0..field.len() {
                let r = field.rho[i];
                let u = self.vel_of(r, field.q[i]);
                field.q[i] += std::f64::consts::SQRT_2 * noise.forcing(i, r, u, &inc.dw);
            }
        }
        Ok(self.report(StepKind::Stochastic, field, dt, before, increments.len(), 0.0))
    }

    fn report(
        &self,
        kind: StepKind,
        field: &ConservedField,
        dt: f64,
        before: (f64, f64, f64),
        substeps_taken: usize,
        grad_u_weighted: f64,
    ) -> StepReport {
        let dx = self.grid.dx();
        let (mass_after, momentum_after, _) = totals(field, dx);
        let mut min_rho = f64::INFINITY;
        let mut max_riemann = 0.0_f64;
        let mut violations = 0usize;
        let mut u8 = 0.0;
        for (&r, &m) in field.rho.iter().zip(&field.q) {
            min_rho = min_rho.min(r);
            if r > NEGATIVE_TOLERANCE {
                let (z, w) = riemann_invariants(&self.law, r, m);
                max_riemann = max_riemann.max(z.abs()).max(w.abs());
            }
            if let Some(k) = self.cfg.kappa_bound {
                if !in_region(&self.law, r, m, k, NEGATIVE_TOLERANCE) {
                    violations += 1;
                }
            }
            let u = self.vel_of(r, m);
            let u2 = u * u;
            let u4 = u2 * u2;
            u8 += u4 * u4;
        }
        StepReport {
            kind,
            mass_before: before.0,
            mass_after,
            momentum_before: before.1,
            momentum_after,
            momentum_scale: before.2,
            min_rho,
            max_riemann,
            substeps_taken,
            invariant_violation_count: violations,
            grad_u_weighted,
            u_pow8: u8 * dx * dt,
        }
    }
}

fn totals(field: &ConservedField, dx: f64) -> (f64, f64, f64) {
    let mass = field.rho.iter().sum::<f64>() * dx;
    let mom = field.q.iter().sum::<f64>() * dx;
    let scale = field.q.iter().map(|q| q.abs()).sum::<f64>() * dx;
    (mass, mom, scale)
}

/// Functional form of [`Stepper::det_step`].
pub fn det_step(
    field: &ConservedField,
    law: &GasLaw,
    cfg: &SchemeConfig,
    dt: f64,
) -> Result<(ConservedField, StepReport)> {
    let grid = Grid::new(field.len())?;
    let mut stepper = Stepper::new(*law, grid, cfg.clone())?;
    let mut out = field.clone();
    let report = stepper.det_step(&mut out, dt)?;
    Ok((out, report))
}

/// Functional form of [`Stepper::sto_step`].
pub fn sto_step(
    field: &ConservedField,
    law: &GasLaw,
    noise: &NoiseModel,
    cfg: &SchemeConfig,
    increments: &[WienerIncrement],
) -> Result<(ConservedField, StepReport)> {
    let grid = Grid::new(field.len())?;
    let mut stepper = Stepper::new(*law, grid, cfg.clone())?;
    let gn = noise.on_grid(&grid);
    let mut out = field.clone();
    let report = stepper.sto_step(&mut out, &gn, increments)?;
    Ok((out, report))
}

/// Keys of the Brownian streams of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngKeys {
    pub master_seed: u64,
    pub realization_id: u32,
}

/// Increments for the stochastic interval of splitting period `period`.
pub fn period_increments(
    keys: RngKeys,
    period: usize,
    cfg: &SchemeConfig,
    n_modes: usize,
) -> Result<Vec<WienerIncrement>> {
    let sub = cfg.sto_substeps;
    let dt = cfg.tau / sub as f64;
    (0..sub)
        .map(|j| {
            let idx = period * sub + j;
            let idx = u32::try_from(idx).map_err(|_| {
                SimError::InvalidConfig(format!("step index {idx} exceeds the u32 stream range"))
            })?;
            sample_increments(keys.master_seed, keys.realization_id, idx, n_modes, dt)
        })
        .collect()
}

/// Drives the alternation det(τ), sto(τ), det(τ), ... and hands every state
/// at `t_k = kτ` to `observer(k, t_k, state, report)`; `report` is `None` at `k = 0`.
pub fn split_advance_with<F>(
    initial: &ConservedField,
    law: &GasLaw,
    noise: &NoiseModel,
    cfg: &SchemeConfig,
    keys: RngKeys,
    n_periods: usize,
    mut observer: F,
) -> Result<ConservedField>
where
    F: FnMut(usize, f64, &ConservedField, Option<&StepReport>) -> Result<()>,
{
    if n_periods == 0 {
        return Err(SimError::InvalidConfig("n_periods must be >= 1".into()));
    }
    let grid = Grid::new(initial.len())?;
    let mut stepper = Stepper::new(*law, grid, cfg.clone())?;
    let gn = noise.on_grid(&grid);
    let mut state = initial.clone();
    let tau = cfg.tau;
    let wrap = |k: usize, e: SimError| SimError::Step {
        realization: keys.realization_id,
        step: k as u64,
        source: Box::new(e),
    };
    observer(0, 0.0, &state, None)?;
    for p in 0..n_periods {
        let k = 2 * p + 1;
        let rep = stepper.det_step(&mut state, tau).map_err(|e| wrap(k, e))?;
        observer(k, k as f64 * tau, &state, Some(&rep))?;

        let k = 2 * p + 2;
        let inc = period_increments(keys, p, cfg, noise.n_modes()).map_err(|e| wrap(k, e))?;
        let rep = stepper.sto_step(&mut state, &gn, &inc).map_err(|e| wrap(k, e))?;
        observer(k, k as f64 * tau, &state, Some(&rep))?;
    }
    Ok(state)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ConservedField>,
    /// `reports[k − 1]` produced `states[k]`.
    pub reports: Vec<StepReport>,
}

/// Collects the whole trajectory; use [`split_advance_with`] for long runs.
pub fn split_advance(
    initial: &ConservedField,
    law: &GasLaw,
    noise: &NoiseModel,
    cfg: &SchemeConfig,
    keys: RngKeys,
    n_periods: usize,
) -> Result<Trajectory> {
    let mut traj = Trajectory { times: vec![], states: vec![], reports: vec![] };
    split_advance_with(initial, law, noise, cfg, keys, n_periods, |_, t, s, r| {
        traj.times.push(t);
        traj.states.push(s.clone());
        if let Some(r) = r {
            traj.reports.push(r.clone());
        }
        Ok(())
    })?;
    Ok(traj)
}
