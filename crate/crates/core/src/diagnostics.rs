//! Scalar functionals of radial fields and trajectories.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{simpson_uniform, Equation, NormPair, Simulator, StepPolicy, Trajectory};
use crate::grid::{
    cosine_sum, derivative_from_spectrum, radial_derivative, radial_integral, radial_integral_unchecked,
    radial_integral_with_tol, to_frequency, RadialField, RadialGrid, Spectrum, DEFAULT_BOUNDARY_TOL,
};
use crate::littlewood_paley::{
    besov_norm, besov_report, critical_besov_regularity, critical_exponent, sobolev_norm, DIM,
};

/// Boundary tolerance for functionals carrying the weight `|x|`.
pub const WEIGHTED_BOUNDARY_TOL: f64 = DEFAULT_BOUNDARY_TOL / 100.0;

/// Largest sample spacing accepted for centered differences of the
/// pseudoconformal energy.
pub const MAX_DIFFERENCE_SPACING: f64 = 0.05;

/// `M(u) = int |u|^2`.
pub fn mass(u: &RadialField) -> Result<f64> {
    radial_integral(u, 2.0, 0.0)
}

/// `E(u) = int |∇u|^2 / 2 + |u|^{p+1} / (p+1)`, gradient term by Parseval.
pub fn energy(u: &RadialField, p: f64) -> Result<f64> {
    let potential = radial_integral(u, p + 1.0, 0.0)?;
    let kinetic = to_frequency(u).weighted_energy(1.0);
    Ok(0.5 * kinetic + potential / (p + 1.0))
}

/// `P(u) = int Im(conj(u) ∇u) dx` as a Cartesian vector.
///
/// For radial `u` the integrand is `Im(conj(u) u') x/|x|`; the angular integral
/// is carried out by a midpoint rule in `(cos theta, phi)`, so the result is a
/// residual at rounding level rather than an exact zero.
pub fn momentum(u: &RadialField) -> Result<[f64; 3]> {
    u.check_boundary(DEFAULT_BOUNDARY_TOL)?;
    let du = radial_derivative(u)?;
    let grid = u.grid();
    let radial: f64 = (0..grid.n())
        .map(|i| {
            let r = grid.r(i);
            (u.values()[i].conj() * du.values()[i]).im * r * r * grid.dr()
        })
        .sum();
    const N_MU: usize = 32;
    const N_PHI: usize = 64;
    let (d_mu, d_phi) = (2.0 / N_MU as f64, 2.0 * PI / N_PHI as f64);
    let mut dir = [0.0; 3];
    for a in 0..N_MU {
        let mu = -1.0 + (a as f64 + 0.5) * d_mu;
        let s = (1.0 - mu * mu).sqrt();
        for b in 0..N_PHI {
            let phi = (b as f64 + 0.5) * d_phi;
            dir[0] += s * phi.cos();
            dir[1] += s * phi.sin();
            dir[2] += mu;
        }
    }
    Ok(dir.map(|c| c * d_mu * d_phi * radial))
}

/// Radial profile of `(x + 2it∇) v`, i.e. `r v + 2it ∂_r v`.
pub fn vector_field(v: &RadialField, t: f64) -> Result<RadialField> {
    let dv = radial_derivative(v)?;
    let two_it = Complex64::new(0.0, 2.0 * t);
    Ok(v.map(|r, x| r * x).add(&dv.scale(two_it)))
}

/// Transform of the potential `F(r) = int_r^inf s f(s) ds`, which satisfies
/// `∇F = -x f` and `F_hat(rho) = -f_hat'(rho) / rho`.
pub fn moment_potential_spectrum(f: &RadialField) -> Spectrum {
    let grid = *f.grid();
    let f_hat = to_frequency(f);
    // f_hat'(rho) = -f_hat / rho + (4 pi / rho) int r^2 f cos(rho r) dr
    let weighted: Vec<Complex64> = f.values().iter().enumerate().map(|(i, &v)| grid.r(i) * grid.r(i) * v).collect();
    let cos = cosine_sum(&weighted);
    let c = 4.0 * PI * grid.dr();
    f_hat.map_indexed(|k, v| {
        let rho = grid.rho(k);
        let derivative = -v / rho + c * cos[k] / rho;
        -derivative / rho
    })
}

/// Radial profile of `e^{itΔ}(x f)` along `x/|x|`, computed as
/// `-∂_r e^{itΔ} F` with `F` from [`moment_potential_spectrum`].
pub fn free_flow_of_moment(f: &RadialField, t: f64) -> Result<RadialField> {
    let spectrum = moment_potential_spectrum(f).map(|rho, v| Complex64::from_polar(1.0, -rho * rho * t) * v);
    let out = derivative_from_spectrum(&spectrum).scale(-1.0);
    out.check_boundary(DEFAULT_BOUNDARY_TOL)?;
    Ok(out)
}

/// Relative `L^2` residual of `(x + 2it∇) e^{itΔ} f = e^{itΔ}(x f)`.
pub fn commutation_residual(f: &RadialField, t: f64) -> Result<f64> {
    let lhs = vector_field(&crate::evolution::free_flow(f, t)?, t)?;
    let rhs = free_flow_of_moment(f, t)?;
    let scale = radial_integral_unchecked(&f.map(|r, v| r * v), 2.0, 0.0).sqrt();
    let diff = radial_integral_unchecked(&lhs.sub(&rhs), 2.0, 0.0).sqrt();
    Ok(if scale == 0.0 { diff } else { diff / scale })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoconformalRecord {
    pub t: f64,
    pub e_pc: f64,
    /// `||(x + 2it∇) v||^2`.
    pub part_vector: f64,
    /// `8/(p+1) t^2 ||v||_{p+1}^{p+1}`.
    pub part_potential: f64,
    /// `-4 (d(p-1) - 4)/(p+1) t ||v||_{p+1}^{p+1}`, the exact time derivative of `e_pc`
    /// along a defocusing solution.
    pub rhs: f64,
}

/// Coefficient `c` in `dℰ/dt = -c t ||v||_{p+1}^{p+1}`.
pub fn pseudoconformal_rate(p: f64) -> f64 {
    4.0 * (DIM * (p - 1.0) - 4.0) / (p + 1.0)
}

pub fn pseudoconformal_energy(v: &RadialField, t: f64, p: f64) -> Result<PseudoconformalRecord> {
    if !(t >= 0.0) {
        return Err(Error::Config(format!("pseudoconformal energy needs t >= 0, got {t}")));
    }
    v.check_boundary(WEIGHTED_BOUNDARY_TOL)?;
    let part_vector = radial_integral_unchecked(&vector_field(v, t)?, 2.0, 0.0);
    let lp = radial_integral_unchecked(v, p + 1.0, 0.0);
    let part_potential = 8.0 / (p + 1.0) * t * t * lp;
    Ok(PseudoconformalRecord {
        t,
        e_pc: part_vector + part_potential,
        part_vector,
        part_potential,
        rhs: -pseudoconformal_rate(p) * t * lp,
    })
}

/// Pseudoconformal records of a run, taken every `stride` steps once `t >= t_start`.
pub fn pseudoconformal_run(
    u0: &RadialField,
    equation: Equation,
    t_start: f64,
    t_end: f64,
    policy: StepPolicy,
    stride: usize,
) -> Result<Vec<PseudoconformalRecord>> {
    if stride == 0 {
        return Err(Error::Stride("record stride must be positive".into()));
    }
    let mut sim = Simulator::new(u0, equation, policy, &[])?;
    let mut records = Vec::new();
    let start = (t_start / policy.dt - 1e-9).ceil().max(0.0) as u64;
    sim.advance_with(t_end, |s| {
        let k = s.step_index();
        if k >= start && (k - start).is_multiple_of(stride as u64) {
            records.push(pseudoconformal_energy(s.field(), s.time(), equation.p)?);
        }
        Ok(())
    })?;
    Ok(records)
}

/// Records for every snapshot of `traj` at or after `t_start`.
pub fn pseudoconformal_records(traj: &Trajectory, t_start: f64) -> Result<Vec<PseudoconformalRecord>> {
    traj.snapshots
        .iter()
        .filter(|s| s.t >= t_start - 1e-12)
        .map(|s| pseudoconformal_energy(&s.field, s.t, traj.equation.p))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityDefect {
    pub t: Vec<f64>,
    /// Centered difference of ℰ.
    pub derivative: Vec<f64>,
    pub rhs: Vec<f64>,
    pub defect: Vec<f64>,
    /// `max_k |defect_k| / max(|rhs_k|, floor)`.
    pub max_relative: f64,
    pub floor: f64,
    pub nonincreasing: bool,
}

/// Compare centered differences of ℰ with its predicted derivative at interior samples.
pub fn monotonicity_defect(records: &[PseudoconformalRecord]) -> Result<MonotonicityDefect> {
    if records.len() < 3 {
        return Err(Error::Stride(format!("{} records are too few to difference", records.len())));
    }
    let h = records[1].t - records[0].t;
    let uniform = records.windows(2).all(|w| ((w[1].t - w[0].t) - h).abs() <= 1e-9 * h.abs().max(1.0));
    if !(h > 0.0 && uniform) {
        return Err(Error::Stride("records must be equally spaced in increasing time".into()));
    }
    if h > MAX_DIFFERENCE_SPACING {
        return Err(Error::Stride(format!("spacing {h} exceeds {MAX_DIFFERENCE_SPACING}")));
    }
    let floor = 1e-8 * records[0].e_pc;
    let mut out = MonotonicityDefect {
        t: Vec::new(),
        derivative: Vec::new(),
        rhs: Vec::new(),
        defect: Vec::new(),
        max_relative: 0.0,
        floor,
        nonincreasing: records.windows(2).all(|w| w[1].e_pc - w[0].e_pc <= 1e-10 * records[0].e_pc),
    };
    for w in records.windows(3) {
        let derivative = (w[2].e_pc - w[0].e_pc) / (2.0 * h);
        let defect = derivative - w[1].rhs;
        let denom = w[1].rhs.abs().max(floor);
        let rel = if denom > 0.0 { defect.abs() / denom } else { defect.abs() };
        out.max_relative = out.max_relative.max(rel);
        out.t.push(w[1].t);
        out.derivative.push(derivative);
        out.rhs.push(w[1].rhs);
        out.defect.push(defect);
    }
    Ok(out)
}

/// `(int_window ||u(t)||_{L^{r_x}}^{q_t} dt)^{1/q_t}` by Simpson's rule on the recorded samples.
pub fn spacetime_norm(traj: &Trajectory, pair: &NormPair, window: (f64, f64)) -> Result<f64> {
    let series = traj.series(pair)?;
    let (a, b) = (window.0.min(window.1), window.0.max(window.1));
    let slack = 1e-9 * traj.dt.abs();
    let values: Vec<f64> = traj
        .sample_times
        .iter()
        .zip(&series.values)
        .filter(|(t, _)| **t >= a - slack && **t <= b + slack)
        .map(|(_, v)| v.powf(pair.q_t))
        .collect();
    if values.len() < 2 {
        if b - a > slack {
            return Err(Error::Stride(format!("window [{a}, {b}] holds fewer than two samples")));
        }
        return Ok(0.0);
    }
    Ok(simpson_uniform(&values, traj.dt.abs()).powf(1.0 / pair.q_t))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersiveRatios {
    pub times: Vec<f64>,
    /// `t^{1/(p-1)} ||e^{itΔ}u0||_∞ / B`.
    pub sup: Vec<f64>,
    /// `t^{1/(p-1) + 1/2} ||∇e^{itΔ}u0||_∞ / B`.
    pub gradient: Vec<f64>,
    /// `t^{2/(p-1)} || |∇|^{2/(p-1)} e^{itΔ}u0 ||_∞ / B`.
    pub fractional: Vec<f64>,
    /// `B = ||u0||_{B^{d/2+s_c}_{1,1}}`.
    pub besov: f64,
}

impl DispersiveRatios {
    pub fn constants(&self) -> [f64; 3] {
        let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        [max(&self.sup), max(&self.gradient), max(&self.fractional)]
    }
}

/// Decay ratios with the Besov norm of `u0` evaluated on its own grid.
pub fn dispersive_ratio(u0: &RadialField, p: f64, times: &[f64]) -> Result<DispersiveRatios> {
    let besov = besov_norm(u0, critical_besov_regularity(p)?)?;
    dispersive_ratio_with(u0, p, times, besov)
}

/// Decay ratios normalised by a precomputed Besov norm (for instance from a
/// wider grid than the one carrying the evolution).
pub fn dispersive_ratio_with(u0: &RadialField, p: f64, times: &[f64], besov: f64) -> Result<DispersiveRatios> {
    critical_exponent(p, DIM)?;
    let a = 1.0 / (p - 1.0);
    let base = to_frequency(u0);
    let frac = base.map(|rho, v| rho.powf(2.0 * a) * v);
    let rows: Vec<[f64; 3]> = times
        .iter()
        .map(|&t| {
            if !(t > 0.0) {
                return Err(Error::Config(format!("dispersive ratios need t > 0, got {t}")));
            }
            let phase = |s: &Spectrum| s.map(|rho, v| Complex64::from_polar(1.0, -rho * rho * t) * v);
            let flowed = phase(&base);
            let u = crate::grid::from_frequency(&flowed);
            u.check_boundary(DEFAULT_BOUNDARY_TOL)?;
            let du = derivative_from_spectrum(&flowed);
            let fu = crate::grid::from_frequency(&phase(&frac));
            let norm = |x: f64| if besov > 0.0 { x / besov } else { 0.0 };
            Ok([
                norm(t.powf(a) * u.sup_norm()),
                norm(t.powf(a + 0.5) * du.sup_norm()),
                norm(t.powf(2.0 * a) * fu.sup_norm()),
            ])
        })
        .collect::<Result<_>>()?;
    Ok(DispersiveRatios {
        times: times.to_vec(),
        sup: rows.iter().map(|r| r[0]).collect(),
        gradient: rows.iter().map(|r| r[1]).collect(),
        fractional: rows.iter().map(|r| r[2]).collect(),
        besov,
    })
}

/// `max_r r^alpha |u(r)|` over the grid.
pub fn weighted_sup(u: &RadialField, alpha: f64) -> f64 {
    let grid = u.grid();
    u.values()
        .iter()
        .enumerate()
        .map(|(i, v)| if alpha == 0.0 { v.norm() } else { grid.r(i).powf(alpha) * v.norm() })
        .fold(0.0, f64::max)
}

/// `(1 + ||u0||_{H^{1/2}}^3) ||u0||_{H^1}^3 ||u0||_{L^2}^3`.
pub fn morawetz_rhs(u0: &RadialField) -> Result<f64> {
    let half = sobolev_norm(u0, 0.5)?;
    let one = sobolev_norm(u0, 1.0)?;
    let l2 = mass(u0)?.sqrt();
    Ok((1.0 + half.powi(3)) * one.powi(3) * l2.powi(3))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OctaveRatio {
    pub j: i32,
    /// `||∇u||_{L^2_t L^6_x([2^j, 2^{j+1}])}`.
    pub local_norm: f64,
    pub ratio: f64,
}

/// Minimum number of samples required inside each octave.
pub const MIN_SAMPLES_PER_OCTAVE: usize = 8;

/// Octave norms `||∇u||_{L^2_t L^6_x([2^j, 2^{j+1}])}` normalised by
/// `2^{j (s_c - 1)/2} ||u0||_{B^{d/2+s_c}_{1,1}}`.
///
/// `traj` must carry the gradient pair `(2, 6)`.
pub fn local_dyadic_bound(traj: &Trajectory, octaves: &[i32], besov: f64) -> Result<Vec<OctaveRatio>> {
    let s_c = critical_exponent(traj.equation.p, DIM)?;
    let pair = NormPair::of_gradient(2.0, 2.0 * DIM / (DIM - 2.0));
    traj.series(&pair)?;
    octaves
        .iter()
        .map(|&j| {
            let (a, b) = (2f64.powi(j), 2f64.powi(j + 1));
            let count = traj.sample_times.iter().filter(|&&t| t >= a && t <= b).count();
            if count < MIN_SAMPLES_PER_OCTAVE {
                return Err(Error::Stride(format!(
                    "octave [2^{j}, 2^{}] holds {count} samples, need {MIN_SAMPLES_PER_OCTAVE}",
                    j + 1
                )));
            }
            let local_norm = spacetime_norm(traj, &pair, (a, b))?;
            let scale = 2f64.powf(j as f64 * (s_c - 1.0) / 2.0) * besov;
            Ok(OctaveRatio { j, local_norm, ratio: if scale > 0.0 { local_norm / scale } else { 0.0 } })
        })
        .collect()
}

/// Named diagnostics of a single field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub r_max: f64,
    pub n: usize,
    pub p: f64,
    pub values: BTreeMap<String, f64>,
    /// Diagnostics that could not be evaluated, with the reason.
    pub skipped: BTreeMap<String, String>,
}

pub fn norm_report(u: &RadialField, p: f64) -> Result<NormReport> {
    let s_c = critical_exponent(p, DIM)?;
    let grid: &RadialGrid = u.grid();
    let mut values = BTreeMap::new();
    let mut skipped = BTreeMap::new();
    values.insert("mass".to_string(), mass(u)?);
    values.insert("energy".to_string(), energy(u, p)?);
    let m = momentum(u)?;
    values.insert("momentum_residual".to_string(), m.iter().map(|c| c * c).sum::<f64>().sqrt());
    for q in [2.0, 4.0, p + 1.0] {
        values.insert(format!("L^{q}"), radial_integral_with_tol(u, q, 0.0, DEFAULT_BOUNDARY_TOL)?.powf(1.0 / q));
    }
    values.insert("L^inf".to_string(), u.sup_norm());
    for s in [s_c, 0.5, 1.0] {
        values.insert(format!("H^{s}"), sobolev_norm(u, s)?);
    }
    let s_b = critical_besov_regularity(p)?;
    let report = besov_report(u, s_b);
    match besov_norm(u, s_b) {
        Ok(b) => {
            values.insert(format!("B^{s_b}_11"), b);
        }
        Err(e) => {
            skipped.insert(format!("B^{s_b}_11"), e.to_string());
        }
    }
    values.insert("besov_edge_fraction".to_string(), report.edge_fraction);
    for alpha in [1.0, 2.0 / (p - 1.0)] {
        values.insert(format!("sup r^{alpha}|u|"), weighted_sup(u, alpha));
    }
    Ok(NormReport { r_max: grid.r_max(), n: grid.n(), p, values, skipped })
}
