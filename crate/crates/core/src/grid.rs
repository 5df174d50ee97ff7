//! Radial grids and the three-dimensional radial Fourier transform.
//!
//! A radial function `u(r)` in R^3 is represented through `psi = r u`, which
//! extends oddly to the line. On `r_k = k dr` (`k = 1..n`, `r_n = r_max`) the
//! transform `u_hat(rho) = (4 pi / rho) int_0^inf sin(rho r) psi(r) dr` becomes
//! a type-I discrete sine transform evaluated at `rho_k = k pi / r_max`, and the
//! inverse carries the `(2 pi)^-3` factor. The sample at `r_max` and the mode at
//! `rho_max = pi / dr` are pinned to zero by the sine basis.
//!
//! Sine and cosine sums are computed with a complex FFT of length `2n` on the
//! odd (resp. even) extension. FFT plans are cached per length; scratch buffers
//! are allocated per call.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default limit on the fraction of `L^2` mass allowed beyond `0.9 r_max`.
pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-6;
/// Spectral fraction above `rho_max / 2` tolerated by spectral differentiation.
pub const ALIASING_TOL: f64 = 1e-4;

const MIN_POINTS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    r_max: f64,
    n: usize,
}

impl RadialGrid {
    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if !n.is_power_of_two() || n < MIN_POINTS {
            return Err(Error::Config(format!("grid size n = {n} must be a power of two >= {MIN_POINTS}")));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::Config(format!("r_max = {r_max} must be positive and finite")));
        }
        Ok(Self { r_max, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn dr(&self) -> f64 {
        self.r_max / self.n as f64
    }

    pub fn d_rho(&self) -> f64 {
        PI / self.r_max
    }

    pub fn rho_max(&self) -> f64 {
        PI / self.dr()
    }

    /// Radius of sample `i` (zero-based), i.e. `r_{i+1}`.
    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.dr()
    }

    /// Frequency of mode `i` (zero-based), i.e. `rho_{i+1}`.
    #[inline]
    pub fn rho(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.d_rho()
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.r(i)).collect()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.rho(i)).collect()
    }

    /// Grid carrying `u(lambda x)` with the same samples: `r_max / lambda`, same `n`.
    pub fn rescaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Config(format!("scale factor {lambda} must be positive")));
        }
        Self::new(self.r_max / lambda, self.n)
    }

    /// Same radius, twice the samples.
    pub fn refined(&self) -> Self {
        Self { r_max: self.r_max, n: 2 * self.n }
    }

    pub fn sample<F, C>(&self, f: F) -> RadialField
    where
        F: Fn(f64) -> C,
        C: Into<Complex64>,
    {
        let values = (0..self.n).map(|i| f(self.r(i)).into()).collect();
        RadialField { grid: *self, values }
    }

    /// Trapezoid weight of sample `i` in `int_0^{r_max} ... dr`; `r = 0` carries no sample.
    #[inline]
    fn weight(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            0.5 * self.dr()
        } else {
            self.dr()
        }
    }
}

/// Complex samples of a radial function on a [`RadialGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct RadialField {
    grid: RadialGrid,
    values: Vec<Complex64>,
}

impl RadialField {
    pub fn new(grid: RadialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::Config(format!("field has {} samples but grid has {}", values.len(), grid.n())));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Config(format!("non-finite sample at r = {}", grid.r(i))));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.n()] }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        let values = self.values.iter().enumerate().map(|(i, &v)| f(self.grid.r(i), v)).collect();
        Self { grid: self.grid, values }
    }

    pub fn scale(&self, c: impl Into<Complex64>) -> Self {
        let c = c.into();
        self.map(|_, v| c * v)
    }

    pub fn conj(&self) -> Self {
        self.map(|_, v| v.conj())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Self { grid: self.grid, values }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Self { grid: self.grid, values }
    }

    /// Maximum of `|u|` over the samples.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `L^2` norm by the trapezoid rule, without the boundary check.
    pub fn l2_norm(&self) -> f64 {
        radial_integral_unchecked(self, 2.0, 0.0).sqrt()
    }

    /// Fraction of `int |u|^2 4 pi r^2 dr` carried by `r > 0.9 r_max` (zero for the zero field).
    pub fn boundary_mass_fraction(&self) -> f64 {
        let cut = 0.9 * self.grid.r_max();
        let (mut outer, mut total) = (0.0, 0.0);
        for (i, v) in self.values.iter().enumerate() {
            let r = self.grid.r(i);
            let m = v.norm_sqr() * r * r * self.grid.weight(i);
            total += m;
            if r > cut {
                outer += m;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            outer / total
        }
    }

    pub fn check_boundary(&self, tol: f64) -> Result<()> {
        let fraction = self.boundary_mass_fraction();
        if fraction > tol {
            Err(Error::TailLeak { fraction, tol })
        } else {
            Ok(())
        }
    }
}

/// Transform of a [`RadialField`] sampled on the frequency nodes `rho_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: RadialGrid,
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: RadialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::Config(format!("spectrum has {} modes but grid has {}", values.len(), grid.n())));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        let values = self.values.iter().enumerate().map(|(i, &v)| f(self.grid.rho(i), v)).collect();
        Self { grid: self.grid, values }
    }

    pub fn map_indexed(&self, f: impl Fn(usize, Complex64) -> Complex64) -> Self {
        let values = self.values.iter().enumerate().map(|(i, &v)| f(i, v)).collect();
        Self { grid: self.grid, values }
    }

    /// `(2 pi)^-3 int rho^{2s} |u_hat|^2 4 pi rho^2 d rho` on the frequency nodes.
    pub fn weighted_energy(&self, s: f64) -> f64 {
        let d_rho = self.grid.d_rho();
        let sum: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let rho = self.grid.rho(i);
                rho.powf(2.0 * s) * v.norm_sqr() * rho * rho
            })
            .sum();
        sum * 4.0 * PI * d_rho / (2.0 * PI).powi(3)
    }
}

static PLANS: Lazy<PlanCache> = Lazy::new(Default::default);

#[derive(Default)]
struct PlanCache(Mutex<HashMap<usize, Arc<dyn Fft<f64>>>>);

impl PlanCache {
    fn get(&self, len: usize) -> Arc<dyn Fft<f64>> {
        let mut map = self.0.lock().expect("fft plan cache poisoned");
        map.entry(len).or_insert_with(|| FftPlanner::new().plan_fft_forward(len)).clone()
    }
}

fn run_fft(buf: &mut [Complex64]) {
    let fft = PLANS.get(buf.len());
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(buf, &mut scratch);
}

/// `S_k = sum_{j=1}^{n-1} x_j sin(pi j k / n)` for `k = 1..n`, with `x_j = input[j-1]`.
/// `input[n-1]` is ignored and `S_n = 0`.
pub(crate) fn sine_sum(input: &[Complex64]) -> Vec<Complex64> {
    let n = input.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
    for j in 1..n {
        buf[j] = input[j - 1];
        buf[2 * n - j] = -input[j - 1];
    }
    run_fft(&mut buf);
    // Y_k = -2i S_k
    let half_i = Complex64::new(0.0, 0.5);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..n {
        out[k - 1] = buf[k] * half_i;
    }
    out
}

/// `C_j = sum_{k=1}^{n-1} a_k cos(pi j k / n)` for `j = 1..n`, with `a_k = coeffs[k-1]`.
pub(crate) fn cosine_sum(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
    for k in 1..n {
        buf[k] = coeffs[k - 1];
        buf[2 * n - k] = coeffs[k - 1];
    }
    run_fft(&mut buf);
    (1..=n).map(|j| 0.5 * buf[j % (2 * n)]).collect()
}

/// Radial Fourier transform `u_hat(rho) = int u(x) e^{-i x.xi} dx` on the frequency nodes.
pub fn to_frequency(u: &RadialField) -> Spectrum {
    let grid = u.grid;
    let psi: Vec<Complex64> = u.values.iter().enumerate().map(|(i, &v)| grid.r(i) * v).collect();
    let s = sine_sum(&psi);
    let c = 4.0 * PI * grid.dr();
    let values = s.iter().enumerate().map(|(i, &v)| c * v / grid.rho(i)).collect();
    Spectrum { grid, values }
}

/// Inverse of [`to_frequency`].
pub fn from_frequency(spectrum: &Spectrum) -> RadialField {
    let grid = spectrum.grid;
    let n = grid.n();
    let c = 1.0 / (4.0 * PI * grid.dr());
    let coeffs: Vec<Complex64> = spectrum.values.iter().enumerate().map(|(i, &v)| c * grid.rho(i) * v).collect();
    let psi = sine_sum(&coeffs);
    let norm = 2.0 / n as f64;
    let mut values: Vec<Complex64> = psi.iter().enumerate().map(|(i, &v)| norm * v / grid.r(i)).collect();
    values[n - 1] = Complex64::new(0.0, 0.0);
    RadialField { grid, values }
}

/// `int_0^{r_max} r^alpha |u|^q 4 pi r^2 dr` by the trapezoid rule.
///
/// Fails with [`Error::TailLeak`] when more than [`DEFAULT_BOUNDARY_TOL`] of the
/// mass sits beyond `0.9 r_max`.
pub fn radial_integral(u: &RadialField, q: f64, alpha: f64) -> Result<f64> {
    radial_integral_with_tol(u, q, alpha, DEFAULT_BOUNDARY_TOL)
}

pub fn radial_integral_with_tol(u: &RadialField, q: f64, alpha: f64, tol: f64) -> Result<f64> {
    if !(q >= 1.0 && alpha >= 0.0) {
        return Err(Error::Config(format!("radial_integral needs q >= 1, alpha >= 0 (got {q}, {alpha})")));
    }
    u.check_boundary(tol)?;
    Ok(radial_integral_unchecked(u, q, alpha))
}

/// Same quadrature as [`radial_integral`] with no boundary check, for intermediate
/// quantities such as low-frequency Littlewood-Paley pieces.
pub fn radial_integral_unchecked(u: &RadialField, q: f64, alpha: f64) -> f64 {
    let grid = u.grid;
    let sum: f64 = u
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let r = grid.r(i);
            let m = if q == 2.0 { v.norm_sqr() } else { v.norm().powf(q) };
            let w = if alpha == 0.0 { 1.0 } else { r.powf(alpha) };
            w * m * r * r * grid.weight(i)
        })
        .sum();
    4.0 * PI * sum
}

/// Fraction of spectral mass above `rho_max / 2`.
pub fn top_octave_fraction(spectrum: &Spectrum) -> f64 {
    let half = 0.5 * spectrum.grid.rho_max();
    let (mut top, mut total) = (0.0, 0.0);
    for (i, v) in spectrum.values.iter().enumerate() {
        let rho = spectrum.grid.rho(i);
        let m = v.norm_sqr() * rho * rho;
        total += m;
        if rho > half {
            top += m;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        top / total
    }
}

/// Spectral `d u / d r` through `u' = psi' / r - psi / r^2`, `psi = r u`.
pub fn radial_derivative(u: &RadialField) -> Result<RadialField> {
    let spectrum = to_frequency(u);
    let fraction = top_octave_fraction(&spectrum);
    if fraction > ALIASING_TOL {
        return Err(Error::Aliasing { fraction, tol: ALIASING_TOL });
    }
    Ok(derivative_from_spectrum(&spectrum))
}

/// `d/dr` of the field whose transform is `spectrum` (no aliasing check).
pub(crate) fn derivative_from_spectrum(spectrum: &Spectrum) -> RadialField {
    let grid = spectrum.grid;
    let n = grid.n();
    // psi(r) = sum_k b_k sin(rho_k r), b_k = rho_k u_hat_k / (2 pi^2) * d_rho
    let c = grid.d_rho() / (2.0 * PI * PI);
    let scaled: Vec<Complex64> = spectrum
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let rho = grid.rho(i);
            c * rho * rho * v
        })
        .collect();
    let dpsi = cosine_sum(&scaled);
    let coeffs: Vec<Complex64> = spectrum.values.iter().enumerate().map(|(i, &v)| c * grid.rho(i) * v).collect();
    let psi = sine_sum(&coeffs);
    let values = (0..n)
        .map(|i| {
            let r = grid.r(i);
            let psi_i = if i + 1 == n { Complex64::new(0.0, 0.0) } else { psi[i] };
            dpsi[i] / r - psi_i / (r * r)
        })
        .collect();
    RadialField { grid, values }
}

/// `from_frequency(m(rho) * to_frequency(u))`.
pub fn apply_multiplier<M, C>(u: &RadialField, m: M) -> RadialField
where
    M: Fn(f64) -> C,
    C: Into<Complex64>,
{
    let spectrum = to_frequency(u).map(|rho, v| m(rho).into() * v);
    from_frequency(&spectrum)
}
