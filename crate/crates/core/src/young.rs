//! Empirical Young measures over the Riemann-invariant plane.

use crate::entropy::{eval_pair_point, EntropyKernel};
use crate::error::{Result, SimError};
use crate::gas::{from_riemann_invariants, riemann_invariants, GasLaw, Grid};
use crate::quadrature::JacobiQuadrature;
use crate::snapshot::SnapshotStore;

/// Relative vacuum threshold: a sample is vacuum when `ρ < VACUUM_FACTOR · mean ρ₀`.
pub const VACUUM_FACTOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSpec {
    pub w_range: (f64, f64),
    pub z_range: (f64, f64),
    pub n_w: usize,
    pub n_z: usize,
}

impl BinSpec {
    fn validate(&self) -> Result<()> {
        if self.n_w == 0 || self.n_z == 0 {
            return Err(SimError::InvalidConfig("histogram needs at least one bin per axis".into()));
        }
        if !(self.w_range.1 > self.w_range.0) || !(self.z_range.1 > self.z_range.0) {
            return Err(SimError::InvalidConfig("histogram ranges must be nonempty".into()));
        }
        Ok(())
    }

    fn axis(v: f64, (lo, hi): (f64, f64), n: usize) -> usize {
        let f = ((v - lo) / (hi - lo) * n as f64).floor();
        if f.is_nan() || f < 0.0 {
            0
        } else {
            (f as usize).min(n - 1)
        }
    }

    /// Flat bin index; out-of-range samples land in the edge bins.
    pub fn index(&self, w: f64, z: f64) -> usize {
        Self::axis(w, self.w_range, self.n_w) * self.n_z + Self::axis(z, self.z_range, self.n_z)
    }

    pub fn n_bins(&self) -> usize {
        self.n_w * self.n_z
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoungWindow {
    pub x_range: (f64, f64),
    pub step: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct YoungHistogram {
    pub window: Option<YoungWindow>,
    pub bins: BinSpec,
    pub counts: Vec<u64>,
    /// Per-bin sums of `w` and `z`, so each bin is represented by its centroid.
    w_sum: Vec<f64>,
    z_sum: Vec<f64>,
    pub vacuum_count: u64,
    pub samples: u64,
    pub gamma: f64,
    pub vacuum_threshold: f64,
}

impl YoungHistogram {
    pub fn new(law: &GasLaw, bins: BinSpec, vacuum_threshold: f64) -> Result<Self> {
        bins.validate()?;
        let nb = bins.n_bins();
        Ok(Self {
            window: None,
            bins,
            counts: vec![0; nb],
            w_sum: vec![0.0; nb],
            z_sum: vec![0.0; nb],
            vacuum_count: 0,
            samples: 0,
            gamma: law.gamma,
            vacuum_threshold,
        })
    }

    /// Adds one state; `(w, z)` are computed with `law`.
    pub fn add(&mut self, law: &GasLaw, rho: f64, q: f64) {
        self.samples += 1;
        if rho < self.vacuum_threshold || rho <= 0.0 {
            self.vacuum_count += 1;
            return;
        }
        let (z, w) = riemann_invariants(law, rho, q);
        let b = self.bins.index(w, z);
        self.counts[b] += 1;
        self.w_sum[b] += w;
        self.z_sum[b] += z;
    }

    pub fn vacuum_mass(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.vacuum_count as f64 / self.samples as f64
        }
    }

    /// `(probability, w, z)` of every occupied non-vacuum bin.
    pub fn atoms(&self) -> Vec<(f64, f64, f64)> {
        let n = self.samples as f64;
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(b, &c)| (c as f64 / n, self.w_sum[b] / c as f64, self.z_sum[b] / c as f64))
            .collect()
    }
}

/// Histogram of all (realization, cell) samples of `store` at `window.step`
/// with cell centers in `window.x_range`.
pub fn young_histogram(
    store: &SnapshotStore,
    law: &GasLaw,
    window: YoungWindow,
    bins: BinSpec,
    vacuum_threshold: f64,
) -> Result<YoungHistogram> {
    let grid = Grid::new(store.n_cells())?;
    let mut h = YoungHistogram::new(law, bins, vacuum_threshold)?;
    h.window = Some(window);
    let states = store.at_step(window.step);
    if states.is_empty() {
        return Err(SimError::InvalidConfig(format!("no snapshots at step {}", window.step)));
    }
    let (a, b) = window.x_range;
    for (_, f) in &states {
        for i in 0..f.len() {
            let x = grid.center(i);
            if x >= a && x <= b {
                h.add(law, f.rho[i], f.q[i]);
            }
        }
    }
    Ok(h)
}

/// Mass of the heaviest non-vacuum bin plus the vacuum mass.
pub fn dirac_or_vacuum_score(h: &YoungHistogram) -> Result<f64> {
    if h.samples == 0 {
        return Err(SimError::InvalidConfig("empty histogram".into()));
    }
    let top = h.counts.iter().copied().max().unwrap_or(0);
    Ok(top as f64 / h.samples as f64 + h.vacuum_mass())
}

/// `⟨η̂⟩⟨H⟩ − ⟨η⟩⟨Ĥ⟩ − ⟨η̂H − ηĤ⟩` over the histogram, with `(η, H)` generated by
/// `pair1` and `(η̂, Ĥ)` by `pair2` on the normalized law of the same γ.
/// Vacuum mass contributes zero to every moment.
pub fn functional_equation_residual(
    h: &YoungHistogram,
    pair1: &EntropyKernel,
    pair2: &EntropyKernel,
) -> Result<f64> {
    let law = GasLaw::normalized(h.gamma)?;
    let quad = JacobiQuadrature::with_default_nodes(law.lambda)?;
    let (mut eta, mut flux, mut eta_hat, mut flux_hat, mut cross) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, w, z) in h.atoms() {
        let (rho, u) = from_riemann_invariants(&law, z, w);
        let q = rho * u;
        let (e1, h1) = eval_pair_point(&law, pair1, &quad, rho, q)?;
        let (e2, h2) = eval_pair_point(&law, pair2, &quad, rho, q)?;
        eta += p * e1;
        flux += p * h1;
        eta_hat += p * e2;
        flux_hat += p * h2;
        cross += p * (e2 * h1 - e1 * h2);
    }
    Ok(eta_hat * flux - eta * flux_hat - cross)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize) -> BinSpec {
        BinSpec { w_range: (-4.0, 4.0), z_range: (-4.0, 4.0), n_w: n, n_z: n }
    }

    #[test]
    fn constant_state_fills_one_bin() {
        let law = GasLaw::shallow_water(2.0).unwrap();
        let mut h = YoungHistogram::new(&law, spec(16), 1e-6).unwrap();
        for _ in 0..100 {
            h.add(&law, 1.0, 0.3);
        }
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.counts.iter().sum::<u64>(), 100);
        assert_eq!(dirac_or_vacuum_score(&h).unwrap(), 1.0);
        let r = functional_equation_residual(&h, &EntropyKernel::energy(), &EntropyKernel::moment(2))
            .unwrap();
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn vacuum_only() {
        let law = GasLaw::normalized(2.0).unwrap();
        let mut h = YoungHistogram::new(&law, spec(4), 1e-6).unwrap();
        for _ in 0..10 {
            h.add(&law, 0.0, 0.0);
        }
        assert_eq!(h.vacuum_mass(), 1.0);
        assert_eq!(dirac_or_vacuum_score(&h).unwrap(), 1.0);
        let r = functional_equation_residual(&h, &EntropyKernel::energy(), &EntropyKernel::density())
            .unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn two_point_measure_by_hand() {
        // pair1 = (ρ, q), pair2 = (q, q²/ρ + κρ²) for γ = 2, κ = 1/8
        let law = GasLaw::normalized(2.0).unwrap();
        let mut h = YoungHistogram::new(&law, spec(8), 1e-6).unwrap();
        let a = (1.0, 0.5);
        let b = (2.0, -2.0);
        h.add(&law, a.0, a.1);
        h.add(&law, b.0, b.1);
        let f = |(r, m): (f64, f64)| (r, m, m, m * m / r + r * r / 8.0);
        let (ea, ha, eha, hha) = f(a);
        let (eb, hb, ehb, hhb) = f(b);
        let mean = |x: f64, y: f64| 0.5 * (x + y);
        let expected = mean(eha, ehb) * mean(ha, hb)
            - mean(ea, eb) * mean(hha, hhb)
            - mean(eha * ha - ea * hha, ehb * hb - eb * hhb);
        let r = functional_equation_residual(&h, &EntropyKernel::density(), &EntropyKernel::momentum())
            .unwrap();
        assert!((r - expected).abs() < 1e-12 * expected.abs().max(1.0), "{r} vs {expected}");
        assert!(expected.abs() > 0.1);
    }

    #[test]
    fn uniform_histogram_score() {
        let law = GasLaw::normalized(2.0).unwrap();
        let bins = spec(5);
        let mut h = YoungHistogram::new(&law, bins, 1e-6).unwrap();
        for iw in 0..5 {
            for iz in 0..5 {
                let w = -4.0 + 1.6 * (iw as f64 + 0.5);
                let z = -4.0 + 1.6 * (iz as f64 + 0.5);
                if z < w {
                    let (rho, u) = from_riemann_invariants(&law, z, w);
                    h.add(&law, rho, rho * u);
                }
            }
        }
        let occupied = h.counts.iter().filter(|&&c| c > 0).count();
        assert_eq!(occupied, 10);
        assert!((dirac_or_vacuum_score(&h).unwrap() - 0.1).abs() < 1e-12);
    }
}
