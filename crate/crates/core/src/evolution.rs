//! Time integration of `i u_t + Δu = |u|^{p-1} u` for radial data.
//!
//! The linear flow is applied exactly in frequency space (`e^{-i rho^2 t}`); the
//! nonlinear sub-flow preserves `|u|` pointwise and is the exact phase rotation
//! `u e^{-i tau |u|^{p-1}}`. One step is the symmetric (Strang) composition
//! half-phase, linear, half-phase.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics;
use crate::error::{Error, Result};
use crate::grid::{
    from_frequency, radial_integral_unchecked, to_frequency, RadialField, RadialGrid, DEFAULT_BOUNDARY_TOL,
};
use crate::littlewood_paley::{critical_exponent, DIM};

pub mod checkpoint;

/// Power nonlinearity, or none at all for linear reference runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equation {
    pub p: f64,
    pub nonlinear: bool,
}

impl Equation {
    pub fn defocusing(p: f64) -> Self {
        Self { p, nonlinear: true }
    }

    pub fn linear(p: f64) -> Self {
        Self { p, nonlinear: false }
    }

    /// Theorem range `7/3 < p <= 3` in three dimensions (`0 < s_c <= 1/2`).
    pub fn in_theorem_range(&self) -> bool {
        self.p > 7.0 / 3.0 && self.p <= 3.0
    }

    pub fn critical_exponent(&self) -> Result<f64> {
        critical_exponent(self.p, DIM)
    }

    /// Exponent pair `((p+1)/(1-s_c), p+1)` of the scattering size.
    pub fn scattering_pair(&self) -> Result<NormPair> {
        let s_c = self.critical_exponent()?;
        Ok(NormPair::new((self.p + 1.0) / (1.0 - s_c), self.p + 1.0))
    }

    fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::Config(format!("nonlinearity power p = {} must exceed 1", self.p)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dealias {
    /// On for the cubic equation, off otherwise.
    #[default]
    Auto,
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub dt: f64,
    /// Keep a snapshot every `snapshot_stride` steps (0 keeps only the endpoints).
    pub snapshot_stride: usize,
    /// Record mass and energy every `log_stride` steps (0 logs only the endpoints).
    pub log_stride: usize,
    pub dealias: Dealias,
    pub oversample_factor: f64,
    pub boundary_tol: f64,
}

impl StepPolicy {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            snapshot_stride: 0,
            log_stride: 0,
            dealias: Dealias::Auto,
            oversample_factor: 8.0,
            boundary_tol: DEFAULT_BOUNDARY_TOL,
        }
    }

    pub fn with_snapshots(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn with_log(mut self, stride: usize) -> Self {
        self.log_stride = stride;
        self
    }

    pub fn with_dealias(mut self, dealias: Dealias) -> Self {
        self.dealias = dealias;
        self
    }

    /// `|dt| rho_max^2 <= 2 pi * oversample_factor`.
    pub fn check_phase_guard(&self, grid: &RadialGrid) -> Result<()> {
        if !(self.dt.is_finite()) {
            return Err(Error::Config(format!("time step {} is not finite", self.dt)));
        }
        let value = self.dt.abs() * grid.rho_max().powi(2);
        let limit = 2.0 * PI * self.oversample_factor;
        if value > limit {
            return Err(Error::PhaseGuard { value, limit });
        }
        Ok(())
    }

    fn dealias_for(&self, eq: &Equation) -> bool {
        match self.dealias {
            Dealias::On => true,
            Dealias::Off => false,
            Dealias::Auto => eq.nonlinear && eq.p == 3.0,
        }
    }
}

/// Space-time exponents of an `L^{q_t}_t L^{r_x}_x` norm, optionally of `∇u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormPair {
    pub q_t: f64,
    pub r_x: f64,
    #[serde(default)]
    pub gradient: bool,
}

impl NormPair {
    pub fn new(q_t: f64, r_x: f64) -> Self {
        Self { q_t, r_x, gradient: false }
    }

    pub fn of_gradient(q_t: f64, r_x: f64) -> Self {
        Self { q_t, r_x, gradient: true }
    }

    fn same(&self, other: &Self) -> bool {
        self.gradient == other.gradient && (self.q_t - other.q_t).abs() < 1e-12 && (self.r_x - other.r_x).abs() < 1e-12
    }

    /// `||u||_{L^{r_x}}` (or of `∂_r u`) at one instant.
    pub fn spatial_norm(&self, u: &RadialField) -> f64 {
        let field;
        let target = if self.gradient {
            field = crate::grid::derivative_from_spectrum(&to_frequency(u));
            &field
        } else {
            u
        };
        if self.r_x.is_infinite() {
            target.sup_norm()
        } else {
            radial_integral_unchecked(target, self.r_x, 0.0).powf(1.0 / self.r_x)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSeries {
    pub pair: NormPair,
    /// `||u(t_k)||_{L^{r_x}}` at every step.
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservationEntry {
    pub step: u64,
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    pub t: f64,
    pub field: RadialField,
}

/// Record of one run: snapshots, per-step spatial norms and the conservation log.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub equation: Equation,
    pub grid: RadialGrid,
    pub dt: f64,
    pub dealiased: bool,
    /// Data outside `7/3 < p <= 3`.
    pub off_theorem: bool,
    pub snapshots: Vec<Snapshot>,
    /// Times `k dt` at which every norm series is sampled.
    pub sample_times: Vec<f64>,
    pub norms: Vec<NormSeries>,
    pub log: Vec<ConservationEntry>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &RadialField {
        &self.snapshots.last().expect("trajectory always holds the initial snapshot").field
    }

    pub fn series(&self, pair: &NormPair) -> Result<&NormSeries> {
        self.norms.iter().find(|s| s.pair.same(pair)).ok_or(Error::UnconfiguredNorm {
            q_t: pair.q_t,
            r_x: pair.r_x,
            gradient: pair.gradient,
        })
    }

    /// Running Simpson integrals of `||u(t)||^{q_t}` at every even step.
    pub fn running_integral(&self, pair: &NormPair) -> Result<Vec<(f64, f64)>> {
        let series = self.series(pair)?;
        let h = self.dt.abs();
        let mut out = vec![(self.sample_times[0], 0.0)];
        let mut acc = 0.0;
        let f: Vec<f64> = series.values.iter().map(|v| v.powf(pair.q_t)).collect();
        let mut k = 0;
        while k + 2 < f.len() {
            acc += h / 3.0 * (f[k] + 4.0 * f[k + 1] + f[k + 2]);
            k += 2;
            out.push((self.sample_times[k], acc));
        }
        Ok(out)
    }

    /// Largest relative mass deviation from the first log entry.
    pub fn mass_drift(&self) -> f64 {
        relative_drift(self.log.iter().map(|e| e.mass))
    }

    pub fn energy_drift(&self) -> f64 {
        relative_drift(self.log.iter().map(|e| e.energy))
    }
}

fn relative_drift(mut values: impl Iterator<Item = f64>) -> f64 {
    let Some(first) = values.next() else { return 0.0 };
    let worst = values.map(|v| (v - first).abs()).fold(0.0, f64::max);
    if first == 0.0 {
        worst
    } else {
        worst / first.abs()
    }
}

/// Composite Simpson rule on uniformly spaced samples; an odd interval count
/// closes with the three-eighths rule.
pub fn simpson_uniform(values: &[f64], h: f64) -> f64 {
    let n = values.len().saturating_sub(1);
    match n {
        0 => 0.0,
        1 => 0.5 * h * (values[0] + values[1]),
        2 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ => {
            let even = if n.is_multiple_of(2) { n } else { n - 3 };
            let mut acc = 0.0;
            let mut k = 0;
            while k < even {
                acc += h / 3.0 * (values[k] + 4.0 * values[k + 1] + values[k + 2]);
                k += 2;
            }
            if even < n {
                let v = &values[even..];
                acc += 3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
            }
            acc
        }
    }
}

/// Exact linear propagation `e^{itΔ} u0`.
pub fn free_flow(u0: &RadialField, t: f64) -> Result<RadialField> {
    if !t.is_finite() {
        return Err(Error::Config(format!("free flow time {t} is not finite")));
    }
    if t == 0.0 {
        return Ok(u0.clone());
    }
    let out = crate::grid::apply_multiplier(u0, |rho: f64| Complex64::from_polar(1.0, -rho * rho * t));
    out.check_boundary(DEFAULT_BOUNDARY_TOL)?;
    Ok(out)
}

/// One Strang step of size `dt` (negative steps run backwards).
pub fn nls_step(u: &RadialField, dt: f64, p: f64) -> Result<RadialField> {
    let policy = StepPolicy::new(dt).with_dealias(Dealias::Off);
    let mut sim = Simulator::new(u, Equation::defocusing(p), policy, &[])?;
    sim.step()?;
    Ok(sim.field().clone())
}

/// Stateful integrator. Produces a [`Trajectory`] and can be checkpointed.
pub struct Simulator {
    equation: Equation,
    policy: StepPolicy,
    grid: RadialGrid,
    dealias: bool,
    propagator: Vec<Complex64>,
    field: RadialField,
    step: u64,
    snapshots: Vec<Snapshot>,
    norms: Vec<NormSeries>,
    log: Vec<ConservationEntry>,
}

impl Simulator {
    pub fn new(u0: &RadialField, equation: Equation, policy: StepPolicy, pairs: &[NormPair]) -> Result<Self> {
        equation.validate()?;
        policy.check_phase_guard(u0.grid())?;
        if !u0.is_finite() {
            return Err(Error::Instability { step: 0, t: 0.0 });
        }
        u0.check_boundary(policy.boundary_tol)?;
        let mut sim = Self::assemble(u0.clone(), equation, policy, 0);
        sim.norms = pairs.iter().map(|&pair| NormSeries { pair, values: Vec::new() }).collect();
        sim.record()?;
        Ok(sim)
    }

    fn assemble(field: RadialField, equation: Equation, policy: StepPolicy, step: u64) -> Self {
        let grid = *field.grid();
        let dealias = policy.dealias_for(&equation);
        let cutoff = 2.0 / 3.0 * grid.rho_max();
        let propagator = grid
            .frequencies()
            .iter()
            .map(|&rho| {
                if dealias && rho > cutoff {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::from_polar(1.0, -rho * rho * policy.dt)
                }
            })
            .collect();
        Self {
            equation,
            policy,
            grid,
            dealias,
            propagator,
            field,
            step,
            snapshots: Vec::new(),
            norms: Vec::new(),
            log: Vec::new(),
        }
    }

    pub fn field(&self) -> &RadialField {
        &self.field
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.policy.dt
    }

    pub fn equation(&self) -> &Equation {
        &self.equation
    }

    pub fn policy(&self) -> &StepPolicy {
        &self.policy
    }

    fn half_phase(&mut self) {
        if !self.equation.nonlinear {
            return;
        }
        let tau = 0.5 * self.policy.dt;
        let exponent = self.equation.p - 1.0;
        let cubic = self.equation.p == 3.0;
        for v in self.field.values_mut() {
            let m = if cubic { v.norm_sqr() } else { v.norm().powf(exponent) };
            *v *= Complex64::from_polar(1.0, -tau * m);
        }
    }

    /// Advance one step without recording.
    pub fn step(&mut self) -> Result<()> {
        self.half_phase();
        let spectrum = to_frequency(&self.field);
        let propagated = spectrum.map_indexed(|i, v| self.propagator[i] * v);
        self.field = from_frequency(&propagated);
        self.half_phase();
        self.step += 1;
        if !self.field.is_finite() {
            return Err(Error::Instability { step: self.step, t: self.time() });
        }
        Ok(())
    }

    fn due(stride: usize, step: u64) -> bool {
        stride > 0 && step.is_multiple_of(stride as u64)
    }

    fn record(&mut self) -> Result<()> {
        for series in &mut self.norms {
            series.values.push(series.pair.spatial_norm(&self.field));
        }
        if self.step == 0 || Self::due(self.policy.log_stride, self.step) {
            self.log_conserved()?;
        }
        if self.step == 0 || Self::due(self.policy.snapshot_stride, self.step) {
            self.snapshots.push(Snapshot { step: self.step, t: self.time(), field: self.field.clone() });
        }
        Ok(())
    }

    fn log_conserved(&mut self) -> Result<()> {
        self.field.check_boundary(self.policy.boundary_tol)?;
        let mass = diagnostics::mass(&self.field)?;
        let energy = diagnostics::energy(&self.field, self.equation.p)?;
        self.log.push(ConservationEntry { step: self.step, t: self.time(), mass, energy });
        Ok(())
    }

    /// Step until `t_end`, calling `observer` after every step.
    pub fn advance_with(&mut self, t_end: f64, mut observer: impl FnMut(&Simulator) -> Result<()>) -> Result<()> {
        let target = steps_to(t_end, self.policy.dt)?;
        if self.step == 0 {
            observer(self)?;
        }
        while self.step < target {
            self.step()?;
            self.record()?;
            observer(self)?;
        }
        Ok(())
    }

    pub fn advance(&mut self, t_end: f64) -> Result<()> {
        self.advance_with(t_end, |_| Ok(()))
    }

    /// Close the run: endpoint snapshot and log entry, then hand over the record.
    pub fn finish(mut self) -> Result<Trajectory> {
        if self.log.last().map(|e| e.step) != Some(self.step) {
            self.log_conserved()?;
        }
        if self.snapshots.last().map(|s| s.step) != Some(self.step) {
            self.snapshots.push(Snapshot { step: self.step, t: self.time(), field: self.field.clone() });
        }
        let count = self.norms.first().map(|s| s.values.len()).unwrap_or(self.step as usize + 1);
        let sample_times = (0..count).map(|k| k as f64 * self.policy.dt).collect();
        Ok(Trajectory {
            off_theorem: self.equation.nonlinear && !self.equation.in_theorem_range(),
            equation: self.equation,
            grid: self.grid,
            dt: self.policy.dt,
            dealiased: self.dealias,
            snapshots: self.snapshots,
            sample_times,
            norms: self.norms,
            log: self.log,
        })
    }
}

fn steps_to(t_end: f64, dt: f64) -> Result<u64> {
    let ratio = t_end / dt;
    if !(ratio.is_finite() && ratio >= -1e-9) {
        return Err(Error::Config(format!("cannot reach t_end = {t_end} with dt = {dt}")));
    }
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-6 * ratio.max(1.0) {
        return Err(Error::Config(format!("t_end = {t_end} is not a multiple of dt = {dt}")));
    }
    Ok(steps as u64)
}

/// Integrate from `u0` to `t_end`, recording the requested space-time norms.
pub fn simulate(
    u0: &RadialField,
    equation: Equation,
    t_end: f64,
    policy: StepPolicy,
    pairs: &[NormPair],
) -> Result<Trajectory> {
    let mut sim = Simulator::new(u0, equation, policy, pairs)?;
    sim.advance(t_end)?;
    sim.finish()
}

/// `lambda^{2/(p-1)} u0(lambda x)` sampled on the grid `r_max / lambda`.
pub fn rescale(u0: &RadialField, lambda: f64, p: f64) -> Result<RadialField> {
    let grid = u0.grid().rescaled(lambda)?;
    let amp = lambda.powf(2.0 / (p - 1.0));
    RadialField::new(grid, u0.values().iter().map(|v| amp * v).collect())
}

/// Frequency below which all but `1e-3` of `int |û|^2 ρ^2 dρ` lies.
pub fn spectral_radius(u0: &RadialField) -> f64 {
    let spectrum = to_frequency(u0);
    let grid = u0.grid();
    let weights: Vec<f64> =
        spectrum.values().iter().enumerate().map(|(i, v)| v.norm_sqr() * grid.rho(i).powi(2)).collect();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if acc >= (1.0 - 1e-3) * total {
            return grid.rho(i);
        }
    }
    grid.rho_max()
}

/// Radiation at group velocity `2ρ` must stay inside the grid until `t_end`:
/// `r_max >= 2 ρ_eff t_end`.
pub fn check_domain(u0: &RadialField, t_end: f64) -> Result<()> {
    let needed = 2.0 * spectral_radius(u0) * t_end.abs();
    if u0.grid().r_max() < needed {
        return Err(Error::Config(format!(
            "r_max = {} cannot hold the run to t = {t_end}; scale it to at least {needed:.1}",
            u0.grid().r_max()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Rescaling {
    pub lambda: f64,
    /// `lambda = 2^{-exponent}`.
    pub exponent: u32,
    pub field: RadialField,
    /// `(lambda, ||u_lambda||_{L^q_{t,x}([0,1])})` for every candidate tried.
    pub search: Vec<(f64, f64)>,
}

pub const MAX_RESCALE_EXPONENT: u32 = 16;

/// Smallest spreading `lambda = 2^{-k}` for which the rescaled solution has
/// `||u||_{L^{(d+2)(p-1)/2}_{t,x}([0,1])} <= delta`.
///
/// `base_dt` is the step in the original time variable; each candidate is run
/// on `[0, 1]` of its own time with at least 64 steps.
pub fn rescale_initial_data(u0: &RadialField, delta: f64, equation: Equation, base_dt: f64) -> Result<Rescaling> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!("smallness delta = {delta} must lie in (0, 1)")));
    }
    let q = (DIM + 2.0) * (equation.p - 1.0) / 2.0;
    let pair = NormPair::new(q, q);
    let mut search = Vec::new();
    for k in 0..=MAX_RESCALE_EXPONENT {
        let lambda = 2f64.powi(-(k as i32));
        let field = rescale(u0, lambda, equation.p)?;
        let mut steps = ((lambda * lambda / base_dt).ceil() as u64).max(64);
        steps += steps % 2;
        let dt = 1.0 / steps as f64;
        let traj = simulate(&field, equation, 1.0, StepPolicy::new(dt), &[pair])?;
        let norm = diagnostics::spacetime_norm(&traj, &pair, (0.0, 1.0))?;
        search.push((lambda, norm));
        if norm <= delta {
            return Ok(Rescaling { lambda, exponent: k, field, search });
        }
    }
    Err(Error::RescaleFailure { delta, max_exponent: MAX_RESCALE_EXPONENT })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gaussian(grid: &RadialGrid, c: f64) -> RadialField {
        grid.sample(|r| c * (-r * r / 2.0).exp())
    }

    /// `(1 + 2it)^{-3/2} exp(-r^2 / (2 (1 + 2it)))` solves `i u_t + Δu = 0`.
    fn dispersing_gaussian(r: f64, t: f64) -> Complex64 {
        let a = Complex64::new(1.0, 2.0 * t);
        a.powf(-1.5) * (-(r * r) / (2.0 * a)).exp()
    }

    #[test]
    fn free_flow_matches_dispersing_gaussian() {
        let grid = RadialGrid::new(64.0, 4096).unwrap();
        let u0 = gaussian(&grid, 1.0);
        for t in [0.25, 1.0, 4.0] {
            let u = free_flow(&u0, t).unwrap();
            let worst = u
                .values()
                .iter()
                .enumerate()
                .map(|(i, v)| (v - dispersing_gaussian(grid.r(i), t)).norm())
                .fold(0.0, f64::max);
            assert!(worst < 1e-6, "t = {t}: {worst}");
            assert_relative_eq!(u.l2_norm(), u0.l2_norm(), max_relative = 1e-12);
        }
        assert!(free_flow(&u0, 0.0).unwrap().sub(&u0).l2_norm() < 1e-13);
    }

    #[test]
    fn domain_guard_scales_with_horizon() {
        let grid = RadialGrid::new(256.0, 4096).unwrap();
        let u0 = gaussian(&grid, 1.0);
        let rho = spectral_radius(&u0);
        assert!(rho > 2.0 && rho < 4.0, "{rho}");
        assert!(check_domain(&u0, 10.0).is_ok());
        assert!(check_domain(&u0, 100.0).is_err());
    }

    #[test]
    fn zero_step_is_identity() {
        let grid = RadialGrid::new(32.0, 1024).unwrap();
        let u0 = gaussian(&grid, 1.0);
        let u1 = nls_step(&u0, 0.0, 3.0).unwrap();
        assert!(u1.sub(&u0).l2_norm() < 1e-13);
    }

    #[test]
    fn zero_data_stays_zero() {
        let grid = RadialGrid::new(32.0, 512).unwrap();
        let traj =
            simulate(&RadialField::zeros(grid), Equation::defocusing(3.0), 1.0, StepPolicy::new(1e-2), &[]).unwrap();
        assert_eq!(traj.last().sup_norm(), 0.0);
    }

    #[test]
    fn phase_guard_and_bad_power() {
        let grid = RadialGrid::new(64.0, 4096).unwrap();
        let u0 = gaussian(&grid, 1.0);
        assert!(matches!(
            Simulator::new(&u0, Equation::defocusing(3.0), StepPolicy::new(1e-2), &[]),
            Err(Error::PhaseGuard { .. })
        ));
        assert!(Simulator::new(&u0, Equation::defocusing(1.0), StepPolicy::new(1e-3), &[]).is_err());
    }

    #[test]
    fn mass_is_conserved_step_by_step() {
        let grid = RadialGrid::new(32.0, 1024).unwrap();
        let u0 = gaussian(&grid, 1.5);
        let traj = simulate(&u0, Equation::defocusing(2.5), 1.0, StepPolicy::new(2e-3).with_log(10), &[]).unwrap();
        assert!(traj.mass_drift() < 1e-12, "{}", traj.mass_drift());
        assert!(!traj.off_theorem);
    }

    #[test]
    fn strang_order_by_self_convergence() {
        let grid = RadialGrid::new(32.0, 1024).unwrap();
        let u0 = gaussian(&grid, 1.0);
        let eq = Equation::defocusing(3.0);
        let run = |dt: f64| simulate(&u0, eq, 1.0, StepPolicy::new(dt), &[]).unwrap().last().clone();
        let reference = run(1.25e-4);
        let e1 = run(4e-3).sub(&reference).l2_norm();
        let e2 = run(2e-3).sub(&reference).l2_norm();
        let ratio = e1 / e2;
        assert!((3.4..=4.6).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn time_reversal_symmetry() {
        // S(t) conj(u0) = conj(S(-t) u0)
        let grid = RadialGrid::new(32.0, 1024).unwrap();
        let u0 = grid.sample(|r| Complex64::new(1.0, 0.3 * r) * (-r * r / 2.0).exp());
        let eq = Equation::defocusing(2.5);
        let fwd = simulate(&u0.conj(), eq, 0.5, StepPolicy::new(1e-3), &[]).unwrap();
        let bwd = simulate(&u0, eq, -0.5, StepPolicy::new(-1e-3), &[]).unwrap();
        let diff = fwd.last().sub(&bwd.last().conj()).l2_norm();
        assert!(diff < 1e-8 * u0.l2_norm(), "{diff}");
    }

    #[test]
    fn scaling_covariance_on_a_fixed_grid() {
        // u_lambda(t, r) = lambda^{2/(p-1)} u(lambda^2 t, lambda r), compared where lambda r is a node
        let grid = RadialGrid::new(64.0, 4096).unwrap();
        let p = 3.0;
        let lambda = 2.0;
        let u0 = gaussian(&grid, 1.0);
        let u0_scaled = grid.sample(|r| lambda * (-(lambda * r).powi(2) / 2.0).exp());
        let eq = Equation::defocusing(p);
        let t = 0.25;
        let slow = simulate(&u0, eq, lambda * lambda * t, StepPolicy::new(1e-3), &[]).unwrap();
        let fast = simulate(&u0_scaled, eq, t, StepPolicy::new(2.5e-4), &[]).unwrap();
        let (a, b) = (slow.last().values(), fast.last().values());
        let mut worst: f64 = 0.0;
        let peak = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for i in (1..grid.n() / 2).step_by(2) {
            // fast node r_i = (i+1) dr pairs with slow node 2 (i+1) dr = index 2i + 1
            let expected = lambda * a[2 * i + 1];
            worst = worst.max((b[i] - expected).norm());
        }
        assert!(worst < 5e-3 * peak, "{worst} vs {peak}");
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let h = 0.1;
        for n in [2usize, 3, 4, 7, 10] {
            let v: Vec<f64> = (0..=n).map(|k| (k as f64 * h).powi(3)).collect();
            let exact = (n as f64 * h).powi(4) / 4.0;
            assert_relative_eq!(simpson_uniform(&v, h), exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn running_integrals_are_nondecreasing() {
        let grid = RadialGrid::new(32.0, 512).unwrap();
        let pair = NormPair::new(8.0, 4.0);
        let traj =
            simulate(&gaussian(&grid, 1.0), Equation::defocusing(3.0), 1.0, StepPolicy::new(5e-3), &[pair]).unwrap();
        let running = traj.running_integral(&pair).unwrap();
        assert!(running.windows(2).all(|w| w[1].1 >= w[0].1 && w[1].0 > w[0].0));
        assert!(traj.running_integral(&NormPair::new(4.0, 4.0)).is_err());
    }

    #[test]
    fn unresolved_step_count_is_rejected() {
        let grid = RadialGrid::new(32.0, 1024).unwrap();
        assert!(simulate(&gaussian(&grid, 1.0), Equation::defocusing(3.0), 0.0105, StepPolicy::new(1e-3), &[]).is_err());
    }

    #[test]
    fn rescaling_search_halves_until_small() {
        let grid = RadialGrid::new(64.0, 2048).unwrap();
        let u0 = gaussian(&grid, 1.0);
        let eq = Equation::defocusing(3.0);
        let out = rescale_initial_data(&u0, 0.1, eq, 2e-3).unwrap();
        assert!(out.search.last().unwrap().1 <= 0.1);
        assert!(out.search.windows(2).all(|w| w[1].1 < w[0].1));
        assert_eq!(out.lambda, 2f64.powi(-(out.exponent as i32)));
        // data already small needs no rescaling
        let tiny = gaussian(&grid, 1e-3);
        assert_eq!(rescale_initial_data(&tiny, 0.1, eq, 2e-3).unwrap().lambda, 1.0);
    }
}
