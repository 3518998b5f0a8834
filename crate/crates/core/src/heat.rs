//! Periodic heat semigroup on the unit torus.
//!
//! `S(t)` multiplies the Fourier mode `e_n = e^{2πinx}` by `e^{−4π²n²t}`.
//! [`HeatSolver`] applies it with cached FFT plans; [`heat_apply_kernel`]
//! is the direct convolution with the periodized Gaussian, kept as an
//! independent route.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, SimError};

/// Signed wavenumber of FFT bin `j` for a length-`n` transform.
#[inline]
pub fn wavenumber(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Fourier coefficients of real periodic samples, normalized so that
/// `f(x_i) = Σ_n c_n e^{2πi n j / N}` on grid index `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    coefficients: Vec<Complex64>,
}

impl SpectralField {
    pub fn forward(samples: &[f64]) -> Self {
        let n = samples.len();
        let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
        let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fft.process(&mut buf);
        let scale = 1.0 / n as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        Self { coefficients: buf }
    }

    pub fn inverse(&self) -> Vec<f64> {
        let n = self.coefficients.len();
        let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
        let mut buf = self.coefficients.clone();
        fft.process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Coefficient of wavenumber `n`, for `|n| ≤ N/2`.
    pub fn coefficient(&self, n: i64) -> Complex64 {
        let len = self.coefficients.len() as i64;
        self.coefficients[n.rem_euclid(len) as usize]
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }
}

/// Spectral heat propagator for a fixed grid size.
pub struct HeatSolver {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
    decay_rate: Vec<f64>,
}

impl std::fmt::Debug for HeatSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HeatSolver").field("n", &self.n).finish()
    }
}

impl Clone for HeatSolver {
    fn clone(&self) -> Self {
        Self {
            n: self.n,
            forward: Arc::clone(&self.forward),
            inverse: Arc::clone(&self.inverse),
            buf: self.buf.clone(),
            scratch: self.scratch.clone(),
            decay_rate: self.decay_rate.clone(),
        }
    }
}

impl HeatSolver {
    pub fn new(n: usize) -> Self {
        let rates = (0..n)
            .map(|j| {
                let k = wavenumber(j, n) as f64;
                4.0 * PI * PI * k * k
            })
            .collect();
        Self::with_rates(n, rates)
    }

    /// Propagator `e^{tΔ_h}` of the three-point Laplacian, symbol
    /// `(4/dx²) sin²(πn/N)`. Its kernel is strictly positive, so it keeps
    /// densities nonnegative where the truncated Gaussian multiplier can ring.
    pub fn lattice(n: usize) -> Self {
        let nf = n as f64;
        let rates = (0..n)
            .map(|j| {
                let s = (PI * j as f64 / nf).sin();
                4.0 * nf * nf * s * s
            })
            .collect();
        Self::with_rates(n, rates)
    }

    fn with_rates(n: usize, decay_rate: Vec<f64>) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            buf: vec![Complex64::new(0.0, 0.0); n],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            decay_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn damp(&mut self, s: f64) {
        let norm = 1.0 / self.n as f64;
        for (c, &r) in self.buf.iter_mut().zip(&self.decay_rate) {
            *c *= norm * (-r * s).exp();
        }
    }

    /// In-place `f ← S(ν t) f`.
    pub fn apply(&mut self, field: &mut [f64], nu: f64, dt: f64) {
        assert_eq!(field.len(), self.n, "field length does not match solver");
        let s = nu * dt;
        if s == 0.0 {
            return;
        }
        for (c, &x) in self.buf.iter_mut().zip(field.iter()) {
            *c = Complex64::new(x, 0.0);
        }
        self.forward.process_with_scratch(&mut self.buf, &mut self.scratch);
        self.damp(s);
        self.inverse.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (x, c) in field.iter_mut().zip(&self.buf) {
            *x = c.re;
        }
    }

    /// Applies the propagator to two real fields with one complex transform.
    ///
    /// The multiplier is real and even in `n`, so it acts on `a + ib`
    /// without mixing the real and imaginary parts.
    pub fn apply_pair(&mut self, a: &mut [f64], b: &mut [f64], nu: f64, dt: f64) {
        assert_eq!(a.len(), self.n, "field length does not match solver");
        assert_eq!(b.len(), self.n, "field length does not match solver");
        let s = nu * dt;
        if s == 0.0 {
            return;
        }
        for ((c, &x), &y) in self.buf.iter_mut().zip(a.iter()).zip(b.iter()) {
            *c = Complex64::new(x, y);
        }
        self.forward.process_with_scratch(&mut self.buf, &mut self.scratch);
        self.damp(s);
        self.inverse.process_with_scratch(&mut self.buf, &mut self.scratch);
        for ((x, y), c) in a.iter_mut().zip(b.iter_mut()).zip(&self.buf) {
            *x = c.re;
            *y = c.im;
        }
    }
}

/// `S(ν dt) f` by FFT.
pub fn heat_apply(field: &[f64], nu: f64, dt: f64) -> Result<Vec<f64>> {
    if !(nu >= 0.0) || !(dt >= 0.0) {
        return Err(SimError::Domain(format!(
            "heat_apply needs nu, dt >= 0, got nu = {nu}, dt = {dt}"
        )));
    }
    let mut out = field.to_vec();
    HeatSolver::new(field.len()).apply(&mut out, nu, dt);
    Ok(out)
}

fn image_count(t: f64) -> i64 {
    // The first omitted image sits at distance ≥ 13√t, where the Gaussian
    // factor is below e^{−42} ≈ 6e−19.
    (1.0 + 13.0 * t.sqrt()).ceil() as i64
}

/// Periodized heat kernel `K_t(x) = Σ_n G_t(x + n)`, `G_t = (4πt)^{−1/2} e^{−x²/4t}`.
pub fn kernel_eval(t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(SimError::Domain(format!("kernel time must be > 0, got {t}")));
    }
    Ok(kernel_unchecked(t, x))
}

fn kernel_unchecked(t: f64, x: f64) -> f64 {
    let x = x - x.floor();
    let norm = 1.0 / (4.0 * PI * t).sqrt();
    let m = image_count(t);
    let mut sum = 0.0;
    for n in -m..=m {
        let y = x + n as f64;
        sum += (-y * y / (4.0 * t)).exp();
    }
    norm * sum
}

/// `S(ν dt) f` by midpoint-rule convolution with the periodized kernel.
/// `O(N²)`; reference route for checking the spectral solver.
pub fn heat_apply_kernel(field: &[f64], nu: f64, dt: f64) -> Result<Vec<f64>> {
    let t = nu * dt;
    if t == 0.0 {
        return Ok(field.to_vec());
    }
    if !(t > 0.0) {
        return Err(SimError::Domain(format!("kernel time must be > 0, got {t}")));
    }
    let n = field.len();
    let dx = 1.0 / n as f64;
    let kernel: Vec<f64> = (0..n).map(|d| kernel_unchecked(t, d as f64 * dx) * dx).collect();
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|j| kernel[(i + n - j) % n] * field[j])
                .sum::<f64>()
        })
        .collect())
}

/// Spectral derivative `∂_x f` of the trigonometric interpolant at the grid points.
pub fn spectral_derivative(field: &[f64]) -> Vec<f64> {
    let n = field.len();
    let mut spec = SpectralField::forward(field);
    for (j, c) in spec.coefficients.iter_mut().enumerate() {
        let k = wavenumber(j, n);
        *c *= if 2 * k.unsigned_abs() as usize == n {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, 2.0 * PI * k as f64)
        };
    }
    spec.inverse()
}
