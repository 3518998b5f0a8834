//! Split-step simulation of the stochastically forced isentropic Euler
//! (equivalently, γ = 2 shallow-water) system on the unit torus.
//!
//! Modules, bottom-up:
//!
//! * [`gas`]: γ-law constants, grid, conserved state, Riemann invariants.
//! * [`quadrature`] and [`entropy`]: Gauss–Jacobi rules and kinetic entropy pairs.
//! * [`heat`]: the periodic heat semigroup.
//! * [`noise`]: multiplicative noise models and keyed Brownian increments.
//! * [`dynamics`]: deterministic/stochastic splitting steps.
//! * [`ensemble`]: Monte Carlo driver and diagnostics.
//! * [`snapshot`] and [`young`]: stored states and empirical Young measures.

pub mod dynamics;
pub mod ensemble;
pub mod entropy;
pub mod error;
pub mod gas;
pub mod heat;
pub mod noise;
pub mod quadrature;
pub mod snapshot;
pub mod young;

pub use error::{Result, SimError};
pub use gas::{ConservedField, GasLaw, Grid, PressureMode, RiemannPair};
