//! Multiplicative noise `Φ(ρ, u) dW = Σ_k σ_k(x, ρ, u) dβ_k` on the momentum
//! equation, and reproducible Brownian increments.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::gas::{riemann_invariants, GasLaw, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    ShallowWaterTopography,
    GenericMultiplicative,
    Zero,
}

/// `(k, x, ρ, u) ↦ σ_k(x, ρ, u)`.
pub type CoefficientFn = Arc<dyn Fn(usize, f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Coefficients {
    Zero,
    /// Mode `2(k−1)` pairs with β_k♭, mode `2(k−1)+1` with β_k♯.
    Topography { g: f64, sigma: Vec<f64> },
    Generic(CoefficientFn),
}

/// Support cutoff onto `Λ_ϰ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Localization {
    pub kappa: f64,
    pub margin: f64,
    law: GasLaw,
}

impl Localization {
    /// Quintic smoothstep in `r = max(|z|, |w|)/ϰ`: 1 for `r ≤ 1 − margin`,
    /// 0 for `r ≥ 1`, C² in between.
    pub fn factor(&self, rho: f64, u: f64) -> f64 {
        let (z, w) = riemann_invariants(&self.law, rho, rho * u);
        let r = z.abs().max(w.abs()) / self.kappa;
        let inner = 1.0 - self.margin;
        if r <= inner {
            1.0
        } else if r >= 1.0 {
            0.0
        } else {
            let s = (r - inner) / self.margin;
            1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
        }
    }
}

#[derive(Clone)]
pub struct NoiseModel {
    kind: NoiseKind,
    n_modes: usize,
    a0: f64,
    coefficients: Coefficients,
    localization: Option<Localization>,
}

impl fmt::Debug for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NoiseModel")
            .field("kind", &self.kind)
            .field("n_modes", &self.n_modes)
            .field("a0", &self.a0)
            .field("localization", &self.localization)
            .finish()
    }
}

impl NoiseModel {
    pub fn zero() -> Self {
        Self {
            kind: NoiseKind::Zero,
            n_modes: 0,
            a0: 0.0,
            coefficients: Coefficients::Zero,
            localization: None,
        }
    }

    /// Generic model. The caller declares the growth constant `A0`; the
    /// coefficients must vanish at `ρ = 0`.
    pub fn generic(n_modes: usize, a0: f64, f: CoefficientFn) -> Self {
        Self {
            kind: NoiseKind::GenericMultiplicative,
            n_modes,
            a0,
            coefficients: Coefficients::Generic(f),
            localization: None,
        }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Growth constant: `G² ≤ A0² ρ² (1 + u² + ρ^{2θ})`.
    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn localization(&self) -> Option<&Localization> {
        self.localization.as_ref()
    }

    pub fn localization_kappa(&self) -> Option<f64> {
        self.localization.map(|l| l.kappa)
    }

    /// Restricts the support to `Λ_ϰ` of `law`.
    pub fn localize(mut self, law: &GasLaw, kappa: f64, margin: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(SimError::Domain(format!("kappa must be > 0, got {kappa}")));
        }
        if !(margin > 0.0 && margin < 1.0) {
            return Err(SimError::Domain(format!("margin must be in (0,1), got {margin}")));
        }
        self.localization = Some(Localization { kappa, margin, law: *law });
        Ok(self)
    }

    #[inline]
    fn cutoff(&self, rho: f64, u: f64) -> f64 {
        match &self.localization {
            Some(l) => l.factor(rho, u),
            None => 1.0,
        }
    }

    fn raw_sigma(&self, k: usize, x: f64, rho: f64, u: f64) -> f64 {
        match &self.coefficients {
            Coefficients::Zero => 0.0,
            Coefficients::Topography { g, sigma } => {
                let mode = k / 2 + 1;
                let arg = 2.0 * PI * mode as f64 * x;
                let amp = g * rho * 2.0 * PI * mode as f64 * sigma[mode - 1];
                if k % 2 == 0 {
                    amp * arg.sin()
                } else {
                    -amp * arg.cos()
                }
            }
            Coefficients::Generic(f) => f(k, x, rho, u),
        }
    }

    /// `σ_k(x, ρ, u)` for `k < n_modes`.
    pub fn sigma(&self, k: usize, x: f64, rho: f64, u: f64) -> f64 {
        if k >= self.n_modes || rho <= 0.0 {
            return 0.0;
        }
        let psi = self.cutoff(rho, u);
        if psi == 0.0 {
            return 0.0;
        }
        psi * self.raw_sigma(k, x, rho, u)
    }

    /// `G² = Σ_k σ_k²`.
    pub fn g_squared(&self, x: f64, rho: f64, u: f64) -> f64 {
        (0..self.n_modes)
            .map(|k| {
                let s = self.sigma(k, x, rho, u);
                s * s
            })
            .sum()
    }

    /// Caches the x-dependence of the coefficients on a grid.
    pub fn on_grid(&self, grid: &Grid) -> GridNoise<'_> {
        let n = grid.n_cells();
        let x = grid.centers();
        let table = match &self.coefficients {
            Coefficients::Topography { .. } => {
                let mut t = vec![0.0; self.n_modes * n];
                for k in 0..self.n_modes {
                    for i in 0..n {
                        t[k * n + i] = self.raw_sigma(k, x[i], 1.0, 0.0);
                    }
                }
                Some(t)
            }
            _ => None,
        };
        let table_sq = table.as_ref().map(|t| {
            (0..n)
                .map(|i| (0..self.n_modes).map(|k| t[k * n + i] * t[k * n + i]).sum())
                .collect()
        });
        GridNoise { model: self, x, table, table_sq }
    }
}

/// Shallow-water topography forcing `−g h ∂_x Z` with
/// `dZ = Σ_k σ_k [cos(2πkx) dβ_k♭ + sin(2πkx) dβ_k♯]`, truncated to `k ≤ K`.
///
/// Produces `2K` modes: `g h 2πk σ_k sin(2πkx)` and `−g h 2πk σ_k cos(2πkx)`.
pub fn sw_topography_modes(g: f64, sigma: &[f64], n_waves: usize) -> Result<NoiseModel> {
    if n_waves == 0 {
        return Err(SimError::Domain("topography noise needs K >= 1".into()));
    }
    if !g.is_finite() || sigma.iter().any(|s| !s.is_finite()) {
        return Err(SimError::Domain("non-finite topography noise parameters".into()));
    }
    let sigma: Vec<f64> = (0..n_waves).map(|k| sigma.get(k).copied().unwrap_or(0.0)).collect();
    if sigma.iter().all(|&s| s == 0.0) || g == 0.0 {
        return Ok(NoiseModel::zero());
    }
    let sum_k2s2: f64 = sigma
        .iter()
        .enumerate()
        .map(|(k, s)| ((k + 1) as f64 * s).powi(2))
        .sum();
    Ok(NoiseModel {
        kind: NoiseKind::ShallowWaterTopography,
        n_modes: 2 * n_waves,
        a0: 2.0 * PI * g.abs() * sum_k2s2.sqrt(),
        coefficients: Coefficients::Topography { g, sigma },
        localization: None,
    })
}

/// Noise coefficients with their spatial factors cached for one grid.
pub struct GridNoise<'a> {
    model: &'a NoiseModel,
    x: Vec<f64>,
    table: Option<Vec<f64>>,
    table_sq: Option<Vec<f64>>,
}

impl GridNoise<'_> {
    pub fn n_modes(&self) -> usize {
        self.model.n_modes
    }

    /// `Σ_k σ_k(x_i, ρ, u) dW_k`.
    pub fn forcing(&self, i: usize, rho: f64, u: f64, dw: &[f64]) -> f64 {
        if rho <= 0.0 || self.model.n_modes == 0 {
            return 0.0;
        }
        let psi = self.model.cutoff(rho, u);
        if psi == 0.0 {
            return 0.0;
        }
        match &self.table {
            Some(t) => {
                let n = self.x.len();
                let s: f64 = dw.iter().enumerate().map(|(k, d)| t[k * n + i] * d).sum();
                psi * rho * s
            }
            None => {
                let x = self.x[i];
                psi * dw
                    .iter()
                    .enumerate()
                    .map(|(k, d)| self.model.raw_sigma(k, x, rho, u) * d)
                    .sum::<f64>()
            }
        }
    }

    /// `G²(x_i, ρ, u)`.
    pub fn g_squared(&self, i: usize, rho: f64, u: f64) -> f64 {
        if rho <= 0.0 || self.model.n_modes == 0 {
            return 0.0;
        }
        match &self.table_sq {
            Some(t) => {
                let psi = self.model.cutoff(rho, u);
                psi * psi * rho * rho * t[i]
            }
            None => self.model.g_squared(self.x[i], rho, u),
        }
    }
}

/// Gaussian increments `ΔW_k ~ N(0, dt)` for one (realization, step).
#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrement {
    pub dw: Vec<f64>,
    pub dt: f64,
    pub realization_id: u32,
    pub step_index: u32,
}

// 64 ChaCha words per mode; a normal draw consumes far fewer.
const WORDS_PER_MODE: u128 = 64;

/// Draws `K` increments from the ChaCha stream keyed by
/// `(master_seed, realization_id, step_index)`, mode `k` at its own word offset,
/// so the result is independent of evaluation order.
pub fn sample_increments(
    master_seed: u64,
    realization_id: u32,
    step_index: u32,
    n_modes: usize,
    dt: f64,
) -> Result<WienerIncrement> {
    if !(dt > 0.0) {
        return Err(SimError::Domain(format!("increment dt must be > 0, got {dt}")));
    }
    let mut dw = Vec::with_capacity(n_modes);
    if n_modes > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(((realization_id as u64) << 32) | step_index as u64);
        let sd = dt.sqrt();
        for k in 0..n_modes {
            rng.set_word_pos(k as u128 * WORDS_PER_MODE);
            let z: f64 = rng.sample(StandardNormal);
            dw.push(sd * z);
        }
    }
    Ok(WienerIncrement { dw, dt, realization_id, step_index })
}
