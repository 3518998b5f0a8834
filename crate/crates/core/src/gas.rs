//! Gas law, periodic grid and conserved state.
//!
//! The pressure is `p(ρ) = a ρ^γ`. In normalized mode `a = κ = θ²/γ`, which
//! is the normalization the kinetic entropy formulas assume; in shallow-water
//! mode `γ = 2` and `a = g/2`. [`normalize_shallow_water`] maps the second
//! onto the first by a density rescaling that leaves the velocity alone.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PressureMode {
    Normalized,
    ShallowWater,
}

/// γ-law constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasLaw {
    pub gamma: f64,
    /// `(γ − 1) / 2`
    pub theta: f64,
    /// `θ² / γ`
    pub kappa: f64,
    /// `(3 − γ) / (2(γ − 1))`
    pub lambda: f64,
    /// `(∫₋₁¹ (1 − z²)^λ dz)⁻¹`
    pub c_lambda: f64,
    /// Coefficient `a` in `p = a ρ^γ`.
    pub pressure_coeff: f64,
    pub mode: PressureMode,
}

/// `∫₋₁¹ (1 − z²)^λ dz = B(1/2, λ + 1)`.
pub(crate) fn jacobi_mass(lambda: f64) -> f64 {
    (ln_gamma(0.5) + ln_gamma(lambda + 1.0) - ln_gamma(lambda + 1.5)).exp()
}

impl GasLaw {
    fn with_coeff(gamma: f64, coeff: Option<f64>) -> Result<Self> {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(SimError::Domain(format!("gamma must be > 1, got {gamma}")));
        }
        let theta = 0.5 * (gamma - 1.0);
        let kappa = theta * theta / gamma;
        let lambda = (3.0 - gamma) / (2.0 * (gamma - 1.0));
        if !(lambda > -0.5) {
            return Err(SimError::Domain(format!(
                "gamma = {gamma} gives lambda = {lambda} <= -1/2; quadrature weight not integrable"
            )));
        }
        let (pressure_coeff, mode) = match coeff {
            None => (kappa, PressureMode::Normalized),
            Some(a) => (a, PressureMode::ShallowWater),
        };
        Ok(Self {
            gamma,
            theta,
            kappa,
            lambda,
            c_lambda: 1.0 / jacobi_mass(lambda),
            pressure_coeff,
            mode,
        })
    }

    /// Normalized law `p = (θ²/γ) ρ^γ`.
    pub fn normalized(gamma: f64) -> Result<Self> {
        Self::with_coeff(gamma, None)
    }

    /// Saint-Venant law `p = g h² / 2` (γ = 2).
    pub fn shallow_water(g: f64) -> Result<Self> {
        if !(g > 0.0) || !g.is_finite() {
            return Err(SimError::Domain(format!("gravity must be > 0, got {g}")));
        }
        Self::with_coeff(2.0, Some(0.5 * g))
    }

    pub fn is_normalized(&self) -> bool {
        self.mode == PressureMode::Normalized
    }

    /// Gravity of a shallow-water law (`2a`).
    pub fn gravity(&self) -> Option<f64> {
        match self.mode {
            PressureMode::ShallowWater => Some(2.0 * self.pressure_coeff),
            PressureMode::Normalized => None,
        }
    }

    #[inline]
    pub(crate) fn rho_pow_theta(&self, rho: f64) -> f64 {
        if self.theta == 0.5 {
            rho.sqrt()
        } else if self.theta == 1.0 {
            rho
        } else {
            rho.powf(self.theta)
        }
    }

    #[inline]
    pub(crate) fn rho_pow_gamma(&self, rho: f64) -> f64 {
        if self.gamma == 2.0 {
            rho * rho
        } else {
            rho.powf(self.gamma)
        }
    }

    /// Factor `s` such that `z, w = u ∓ s ρ^θ`; exactly 1 in normalized mode.
    #[inline]
    pub fn riemann_scale(&self) -> f64 {
        match self.mode {
            PressureMode::Normalized => 1.0,
            PressureMode::ShallowWater => {
                2.0 * (self.pressure_coeff * self.gamma).sqrt() / (self.gamma - 1.0)
            }
        }
    }

    #[inline]
    pub(crate) fn pressure_unchecked(&self, rho: f64) -> f64 {
        self.pressure_coeff * self.rho_pow_gamma(rho)
    }

    #[inline]
    pub(crate) fn sound_speed_unchecked(&self, rho: f64) -> f64 {
        match self.mode {
            PressureMode::Normalized => self.theta * self.rho_pow_theta(rho),
            PressureMode::ShallowWater => {
                (self.pressure_coeff * self.gamma).sqrt() * self.rho_pow_theta(rho)
            }
        }
    }
}

/// `p(ρ) = a ρ^γ`.
pub fn pressure(law: &GasLaw, rho: f64) -> Result<f64> {
    if rho < 0.0 {
        return Err(SimError::Domain(format!("negative density {rho}")));
    }
    Ok(law.pressure_unchecked(rho))
}

/// `√p'(ρ)`.
pub fn sound_speed(law: &GasLaw, rho: f64) -> Result<f64> {
    if rho < 0.0 {
        return Err(SimError::Domain(format!("negative density {rho}")));
    }
    Ok(law.sound_speed_unchecked(rho))
}

/// Velocity with the vacuum convention `u = 0` where `ρ = 0`.
#[inline]
pub fn velocity(rho: f64, q: f64) -> f64 {
    if rho > 0.0 {
        q / rho
    } else {
        0.0
    }
}

/// `F(U) = (q, q²/ρ + p(ρ))`, zero at vacuum.
#[inline]
pub fn flux(law: &GasLaw, rho: f64, q: f64) -> (f64, f64) {
    let u = velocity(rho, q);
    (q, q * u + law.pressure_unchecked(rho.max(0.0)))
}

/// `(z, w) = (u − sρ^θ, u + sρ^θ)`, see [`GasLaw::riemann_scale`].
#[inline]
pub fn riemann_invariants(law: &GasLaw, rho: f64, q: f64) -> (f64, f64) {
    let u = velocity(rho, q);
    let c = law.riemann_scale() * law.rho_pow_theta(rho.max(0.0));
    (u - c, u + c)
}

/// `−ϰ ≤ z ≤ w ≤ ϰ` in conserved form, `|q| ≤ ρ(ϰ − sρ^θ) + q_slack`, which
/// stays meaningful where `q/ρ` is round-off over round-off.
pub fn in_region(law: &GasLaw, rho: f64, q: f64, kappa: f64, q_slack: f64) -> bool {
    let c = law.riemann_scale() * law.rho_pow_theta(rho.max(0.0));
    c <= kappa && q.abs() <= rho.max(0.0) * (kappa - c) + q_slack
}

/// Inverse of [`riemann_invariants`]: `(ρ, u)`.
pub fn from_riemann_invariants(law: &GasLaw, z: f64, w: f64) -> (f64, f64) {
    let half_gap = (0.5 * (w - z)).max(0.0) / law.riemann_scale();
    let rho = if half_gap > 0.0 {
        if law.theta == 0.5 {
            half_gap * half_gap
        } else {
            half_gap.powf(1.0 / law.theta)
        }
    } else {
        0.0
    };
    (rho, 0.5 * (w + z))
}

/// Uniform cell-centered grid on the unit torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    n_cells: usize,
}

impl Grid {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 4 {
            return Err(SimError::InvalidConfig(format!(
                "grid needs at least 4 cells, got {n_cells}"
            )));
        }
        Ok(Self { n_cells })
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    #[inline]
    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.n_cells as isize) as usize
    }
}

/// Cell averages of `U = (ρ, q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservedField {
    pub rho: Vec<f64>,
    pub q: Vec<f64>,
}

impl ConservedField {
    /// Checks `ρ ≥ 0` and `q = 0` wherever `ρ = 0`.
    pub fn new(rho: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if rho.len() != q.len() {
            return Err(SimError::InvalidConfig(format!(
                "rho has {} cells but q has {}",
                rho.len(),
                q.len()
            )));
        }
        for (i, (&r, &m)) in rho.iter().zip(&q).enumerate() {
            if !(r >= 0.0) || !r.is_finite() || !m.is_finite() {
                return Err(SimError::Domain(format!("cell {i}: rho = {r}, q = {m}")));
            }
            if r == 0.0 && m != 0.0 {
                return Err(SimError::Domain(format!(
                    "cell {i}: nonzero momentum {m} in vacuum"
                )));
            }
        }
        Ok(Self { rho, q })
    }

    /// Builds `(ρ, ρu)` from primitive samples.
    pub fn from_primitive(rho: Vec<f64>, u: &[f64]) -> Result<Self> {
        let q = rho.iter().zip(u).map(|(r, v)| r * v).collect();
        Self::new(rho, q)
    }

    pub fn uniform(n: usize, rho: f64, u: f64) -> Result<Self> {
        Self::new(vec![rho; n], vec![rho * u; n])
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn velocity(&self, i: usize) -> f64 {
        velocity(self.rho[i], self.q[i])
    }

    pub fn total_mass(&self, dx: f64) -> f64 {
        self.rho.iter().sum::<f64>() * dx
    }

    pub fn total_momentum(&self, dx: f64) -> f64 {
        self.q.iter().sum::<f64>() * dx
    }
}

/// Riemann invariants per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RiemannPair {
    pub z: Vec<f64>,
    pub w: Vec<f64>,
}

pub fn riemann_pair(law: &GasLaw, field: &ConservedField) -> RiemannPair {
    let (z, w) = field
        .rho
        .iter()
        .zip(&field.q)
        .map(|(&r, &m)| riemann_invariants(law, r, m))
        .unzip();
    RiemannPair { z, w }
}

/// Membership of `Λ_ϰ = {−ϰ ≤ z ≤ w ≤ ϰ}` per cell, plus the global flag.
pub fn in_invariant_region(pair: &RiemannPair, kappa_bound: f64) -> (Vec<bool>, bool) {
    let cells: Vec<bool> = pair
        .z
        .iter()
        .zip(&pair.w)
        .map(|(&z, &w)| -kappa_bound <= z && z <= w && w <= kappa_bound)
        .collect();
    let all = cells.iter().all(|&b| b);
    (cells, all)
}

/// Density factor `β = (a/κ)^{1/(γ−1)}` of the shallow-water bridge.
pub fn shallow_water_scaling(law: &GasLaw) -> f64 {
    (law.pressure_coeff / law.kappa).powf(1.0 / (law.gamma - 1.0))
}

/// Rescales a shallow-water state to the normalized law: `ρ̃ = βρ`, `q̃ = βq`.
pub fn normalize_shallow_water(
    law_sw: &GasLaw,
    field: &ConservedField,
) -> Result<(GasLaw, ConservedField)> {
    if law_sw.mode != PressureMode::ShallowWater {
        return Err(SimError::Domain(
            "normalize_shallow_water expects a shallow-water law".into(),
        ));
    }
    let beta = shallow_water_scaling(law_sw);
    let law = GasLaw::normalized(law_sw.gamma)?;
    let scaled = ConservedField {
        rho: field.rho.iter().map(|r| beta * r).collect(),
        q: field.q.iter().map(|m| beta * m).collect(),
    };
    Ok((law, scaled))
}

/// Inverse of [`normalize_shallow_water`].
pub fn denormalize_shallow_water(law_sw: &GasLaw, field: &ConservedField) -> ConservedField {
    let beta = shallow_water_scaling(law_sw);
    ConservedField {
        rho: field.rho.iter().map(|r| r / beta).collect(),
        q: field.q.iter().map(|m| m / beta).collect(),
    }
}
