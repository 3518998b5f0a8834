//! Kinetic entropy–entropy-flux pairs.
//!
//! For a convex `g`, the pair generated by the kernel
//! `χ = c_λ (ρ^{2θ} − (ξ − u)²)₊^λ` is evaluated after the change of
//! variables `ξ = u + z ρ^θ`:
//!
//! ```text
//! η(U) = ρ c_λ ∫ g(u + zρ^θ) (1 − z²)^λ dz
//! H(U) = ρ c_λ ∫ g(u + zρ^θ) (u + zθρ^θ) (1 − z²)^λ dz
//! ```
//!
//! so every integral is a Gauss–Jacobi sum with the matching weight. All
//! formulas here require a law in normalized mode.

use std::fmt;
use std::sync::Arc;

use crate::error::{Result, SimError};
use crate::gas::{velocity, ConservedField, GasLaw};
use crate::quadrature::JacobiQuadrature;

/// Densities below this are treated as vacuum by the derivative operations.
pub const RHO_FLOOR: f64 = 1e-12;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A convex generator `g` together with `g'` and `g''`.
#[derive(Clone)]
pub struct EntropyKernel {
    g: ScalarFn,
    g1: ScalarFn,
    g2: ScalarFn,
    /// `C(g)` with `|g| ≤ C(1+ξ²)`, `|g'| ≤ C(1+|ξ|)`, when `g` is subquadratic.
    pub subquadratic_constant: Option<f64>,
    label: String,
}

impl fmt::Debug for EntropyKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EntropyKernel")
            .field("label", &self.label)
            .field("subquadratic_constant", &self.subquadratic_constant)
            .finish()
    }
}

impl EntropyKernel {
    pub fn new<G, G1, G2>(
        label: impl Into<String>,
        g: G,
        g1: G1,
        g2: G2,
        subquadratic_constant: Option<f64>,
    ) -> Self
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        G1: Fn(f64) -> f64 + Send + Sync + 'static,
        G2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            g: Arc::new(g),
            g1: Arc::new(g1),
            g2: Arc::new(g2),
            subquadratic_constant,
            label: label.into(),
        }
    }

    /// `g = 1`: the pair `(ρ, q)`.
    pub fn density() -> Self {
        Self::new("1", |_| 1.0, |_| 0.0, |_| 0.0, Some(1.0))
    }

    /// `g = ξ`: the pair `(q, q²/ρ + p)`.
    pub fn momentum() -> Self {
        Self::new("xi", |x| x, |_| 1.0, |_| 0.0, Some(1.0))
    }

    /// `g = ξ²/2`: the mechanical energy.
    pub fn energy() -> Self {
        Self::new("xi^2/2", |x| 0.5 * x * x, |x| x, |_| 1.0, Some(1.0))
    }

    /// `g = ξ^{2m}`, generator of the moment entropy `η_m`.
    pub fn moment(m: u32) -> Self {
        let n = 2 * m as i32;
        let nf = n as f64;
        Self::new(
            format!("xi^{n}"),
            move |x| x.powi(n),
            move |x| if n >= 1 { nf * x.powi(n - 1) } else { 0.0 },
            move |x| if n >= 2 { nf * (nf - 1.0) * x.powi(n - 2) } else { 0.0 },
            if m <= 1 { Some(1.0) } else { None },
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn g(&self, xi: f64) -> f64 {
        (self.g)(xi)
    }

    #[inline]
    pub fn g1(&self, xi: f64) -> f64 {
        (self.g1)(xi)
    }

    #[inline]
    pub fn g2(&self, xi: f64) -> f64 {
        (self.g2)(xi)
    }

    /// Convexity and growth audit on sample points; returns the first offending ξ.
    pub fn check_admissible(&self, samples: &[f64]) -> std::result::Result<(), f64> {
        for &xi in samples {
            if self.g2(xi) < 0.0 {
                return Err(xi);
            }
            if let Some(c) = self.subquadratic_constant {
                if self.g(xi).abs() > c * (1.0 + xi * xi) || self.g1(xi).abs() > c * (1.0 + xi.abs())
                {
                    return Err(xi);
                }
            }
        }
        Ok(())
    }
}

/// Entropy and entropy flux per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyValue {
    pub eta: Vec<f64>,
    pub h_flux: Vec<f64>,
}

fn require_normalized(law: &GasLaw) -> Result<()> {
    if law.is_normalized() {
        Ok(())
    } else {
        Err(SimError::ModeMismatch)
    }
}

/// `(η, H)` at a single state.
pub fn eval_pair_point(
    law: &GasLaw,
    kernel: &EntropyKernel,
    quad: &JacobiQuadrature,
    rho: f64,
    q: f64,
) -> Result<(f64, f64)> {
    require_normalized(law)?;
    if rho < 0.0 {
        return Err(SimError::Domain(format!("negative density {rho}")));
    }
    if rho == 0.0 {
        return Ok((0.0, 0.0));
    }
    let u = q / rho;
    let c = law.rho_pow_theta(rho);
    let mut eta = 0.0;
    let mut h = 0.0;
    for (&z, &w) in quad.nodes().iter().zip(quad.weights()) {
        let gv = w * kernel.g(u + z * c);
        eta += gv;
        h += gv * (u + z * law.theta * c);
    }
    let scale = rho * law.c_lambda;
    Ok((scale * eta, scale * h))
}

/// `(η, H)` on every cell of a field.
pub fn eval_pair(
    law: &GasLaw,
    kernel: &EntropyKernel,
    quad: &JacobiQuadrature,
    field: &ConservedField,
) -> Result<EntropyValue> {
    let mut eta = Vec::with_capacity(field.len());
    let mut h_flux = Vec::with_capacity(field.len());
    for (&r, &m) in field.rho.iter().zip(&field.q) {
        let (e, h) = eval_pair_point(law, kernel, quad, r, m)?;
        eta.push(e);
        h_flux.push(h);
    }
    Ok(EntropyValue { eta, h_flux })
}

/// Mechanical energy `½ρu² + a ρ^γ/(γ−1)`.
///
/// With `a = κ` this is the `g = ξ²/2` entropy; for a shallow-water law it is
/// `hu²/2 + gh²/2`. Closed form, valid in either mode.
#[inline]
pub fn energy_density(law: &GasLaw, rho: f64, q: f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    0.5 * q * q / rho + law.pressure_unchecked(rho) / (law.gamma - 1.0)
}

pub fn energy(law: &GasLaw, field: &ConservedField) -> Vec<f64> {
    field
        .rho
        .iter()
        .zip(&field.q)
        .map(|(&r, &m)| energy_density(law, r, m))
        .collect()
}

/// `d_λ(m) = c_λ ∫ z^{2m} (1 − z²)^λ dz`.
pub fn d_lambda(law: &GasLaw, m: u32, quad: &JacobiQuadrature) -> Result<f64> {
    if 2 * m as usize > quad.exact_degree() {
        return Err(SimError::Domain(format!(
            "quadrature with {} nodes cannot resolve degree {}",
            quad.n_nodes(),
            2 * m
        )));
    }
    let n = 2 * m as i32;
    Ok(law.c_lambda * quad.integrate(|z| z.powi(n)))
}

/// Moment entropy `η_m` (generator `ξ^{2m}`) via the binomial expansion
///
/// `η_m = ρ Σ_{j even} C(2m, j) u^j ρ^{θ(2m−j)} d_λ((2m−j)/2)`,
///
/// whose odd terms vanish by symmetry of the weight.
pub fn eta_moment_point(
    law: &GasLaw,
    m: u32,
    quad: &JacobiQuadrature,
    rho: f64,
    q: f64,
) -> Result<f64> {
    require_normalized(law)?;
    if rho < 0.0 {
        return Err(SimError::Domain(format!("negative density {rho}")));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    let u = q / rho;
    let c = law.rho_pow_theta(rho);
    let n = 2 * m;
    let mut total = 0.0;
    let mut binom = 1.0_f64; // C(n, j)
    for j in 0..=n {
        if j > 0 {
            binom *= (n - j + 1) as f64 / j as f64;
        }
        if j % 2 == 0 {
            let k = n - j;
            total += binom * u.powi(j as i32) * c.powi(k as i32) * d_lambda(law, k / 2, quad)?;
        }
    }
    Ok(rho * total)
}

pub fn eta_moment(
    law: &GasLaw,
    m: u32,
    quad: &JacobiQuadrature,
    field: &ConservedField,
) -> Result<Vec<f64>> {
    field
        .rho
        .iter()
        .zip(&field.q)
        .map(|(&r, &p)| eta_moment_point(law, m, quad, r, p))
        .collect()
}

/// The kinetic kernel `(v − z)₊^λ (w − v)₊^λ`.
pub fn chi(law: &GasLaw, rho: f64, q: f64, v: f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    let u = velocity(rho, q);
    let c = law.rho_pow_theta(rho);
    let (z, w) = (u - c, u + c);
    let a = v - z;
    let b = w - v;
    if a > 0.0 && b > 0.0 {
        a.powf(law.lambda) * b.powf(law.lambda)
    } else {
        0.0
    }
}

/// `(∂_q η, ∂²_qq η)` at a single state above [`RHO_FLOOR`].
pub fn eta_derivatives_point(
    law: &GasLaw,
    kernel: &EntropyKernel,
    quad: &JacobiQuadrature,
    rho: f64,
    q: f64,
) -> Result<(f64, f64)> {
    require_normalized(law)?;
    if !(rho > RHO_FLOOR) {
        return Err(SimError::SingularState { rho, floor: RHO_FLOOR });
    }
    let u = q / rho;
    let c = law.rho_pow_theta(rho);
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for (&z, &w) in quad.nodes().iter().zip(quad.weights()) {
        let xi = u + z * c;
        d1 += w * kernel.g1(xi);
        d2 += w * kernel.g2(xi);
    }
    Ok((law.c_lambda * d1, law.c_lambda * d2 / rho))
}

pub fn eta_derivatives(
    law: &GasLaw,
    kernel: &EntropyKernel,
    quad: &JacobiQuadrature,
    field: &ConservedField,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut d1 = Vec::with_capacity(field.len());
    let mut d2 = Vec::with_capacity(field.len());
    for (&r, &m) in field.rho.iter().zip(&field.q) {
        let (a, b) = eta_derivatives_point(law, kernel, quad, r, m)?;
        d1.push(a);
        d2.push(b);
    }
    Ok((d1, d2))
}
