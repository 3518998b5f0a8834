//! Gauss–Jacobi rules for the symmetric weight `(1 − z²)^λ` on `(−1, 1)`.
//!
//! Nodes come from the Golub–Welsch eigenproblem on the Jacobi matrix and
//! are then polished by Newton iteration on the orthonormal recurrence;
//! weights are the Christoffel numbers `1 / Σ_k p̂_k(z)²`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Result, SimError};
use crate::gas::jacobi_mass;

#[derive(Debug, Clone, PartialEq)]
pub struct JacobiQuadrature {
    lambda: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

pub const DEFAULT_NODES: usize = 48;

impl JacobiQuadrature {
    pub fn new(lambda: f64, n_nodes: usize) -> Result<Self> {
        if !(lambda > -0.5) || !lambda.is_finite() {
            return Err(SimError::Domain(format!(
                "quadrature exponent must exceed -1/2, got {lambda}"
            )));
        }
        if n_nodes == 0 {
            return Err(SimError::Domain("quadrature needs at least one node".into()));
        }
        let mu0 = jacobi_mass(lambda);
        let offdiag: Vec<f64> = (1..n_nodes).map(|k| recurrence_coeff(lambda, k)).collect();

        let mut jac = DMatrix::<f64>::zeros(n_nodes, n_nodes);
        for (k, &b) in offdiag.iter().enumerate() {
            jac[(k, k + 1)] = b;
            jac[(k + 1, k)] = b;
        }
        let mut nodes: Vec<f64> = SymmetricEigen::new(jac).eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

        for x in nodes.iter_mut() {
            for _ in 0..4 {
                let (p, dp, _) = orthonormal_eval(lambda, mu0, n_nodes, *x);
                if dp == 0.0 {
                    break;
                }
                let step = p / dp;
                *x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
        }
        // exact reflection symmetry so odd moments cancel
        for j in 0..n_nodes / 2 {
            let m = 0.5 * (nodes[n_nodes - 1 - j] - nodes[j]);
            nodes[j] = -m;
            nodes[n_nodes - 1 - j] = m;
        }
        if n_nodes % 2 == 1 {
            nodes[n_nodes / 2] = 0.0;
        }

        let mut weights: Vec<f64> = nodes
            .iter()
            .map(|&x| 1.0 / orthonormal_eval(lambda, mu0, n_nodes, x).2)
            .collect();
        for j in 0..n_nodes / 2 {
            let w = 0.5 * (weights[j] + weights[n_nodes - 1 - j]);
            weights[j] = w;
            weights[n_nodes - 1 - j] = w;
        }
        Ok(Self { lambda, nodes, weights })
    }

    pub fn with_default_nodes(lambda: f64) -> Result<Self> {
        Self::new(lambda, DEFAULT_NODES)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫₋₁¹ f(z) (1 − z²)^λ dz`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).sum()
    }

    /// Highest polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        2 * self.nodes.len() - 1
    }
}

/// Off-diagonal entry `b_k` of the Jacobi matrix for α = β = λ.
fn recurrence_coeff(lambda: f64, k: usize) -> f64 {
    let k = k as f64;
    let s = k + lambda;
    (k * (k + 2.0 * lambda) / (4.0 * s * s - 1.0)).sqrt()
}

/// Returns `(p̂_n(x), p̂_n'(x), Σ_{k<n} p̂_k(x)²)`.
fn orthonormal_eval(lambda: f64, mu0: f64, n: usize, x: f64) -> (f64, f64, f64) {
    let mut p_prev = 0.0;
    let mut dp_prev = 0.0;
    let mut p = 1.0 / mu0.sqrt();
    let mut dp = 0.0;
    let mut sumsq = 0.0;
    let mut b_prev = 0.0;
    for k in 0..n {
        sumsq += p * p;
        let b = recurrence_coeff(lambda, k + 1);
        let p_next = (x * p - b_prev * p_prev) / b;
        let dp_next = (p + x * dp - b_prev * dp_prev) / b;
        p_prev = p;
        dp_prev = dp;
        p = p_next;
        dp = dp_next;
        b_prev = b;
    }
    (p, dp, sumsq)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `∫ z^{2m} (1 − z²)^λ dz` by the ratio recurrence of the Beta function.
    fn even_moment(lambda: f64, m: usize) -> f64 {
        let mut v = jacobi_mass(lambda);
        for j in 0..m {
            let j = j as f64;
            v *= (j + 0.5) / (j + lambda + 1.5);
        }
        v
    }

    #[test]
    fn weights_sum_to_mass() {
        for lambda in [-0.3, 0.0, 0.5, 2.0, 3.0] {
            let q = JacobiQuadrature::with_default_nodes(lambda).unwrap();
            let s: f64 = q.weights().iter().sum();
            let m = jacobi_mass(lambda);
            assert!((s - m).abs() < 1e-12 * m, "λ = {lambda}: {s} vs {m}");
            assert!(q.weights().iter().all(|&w| w > 0.0));
            assert!(q.nodes().windows(2).all(|p| p[0] < p[1]));
            assert!(q.nodes().iter().all(|z| z.abs() < 1.0));
        }
    }

    #[test]
    fn exact_up_to_degree() {
        // γ = 1.4, 2, 3 and 5
        for lambda in [2.0, 0.5, 0.0, -0.25] {
            let q = JacobiQuadrature::new(lambda, 12).unwrap();
            for m in 0..12 {
                let exact = even_moment(lambda, m);
                let got = q.integrate(|z| z.powi(2 * m as i32));
                assert!((got - exact).abs() < 1e-13 * exact, "λ = {lambda}, m = {m}");
                let odd = q.integrate(|z| z.powi(2 * m as i32 + 1));
                assert!(odd.abs() < 1e-15);
            }
            assert_eq!(q.exact_degree(), 23);
        }
    }

    #[test]
    fn legendre_case() {
        let q = JacobiQuadrature::new(0.0, 2).unwrap();
        let x = 1.0 / 3f64.sqrt();
        assert!((q.nodes()[1] - x).abs() < 1e-15);
        assert!((q.weights()[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(JacobiQuadrature::new(-0.5, 8).is_err());
        assert!(JacobiQuadrature::new(1.0, 0).is_err());
    }
}
