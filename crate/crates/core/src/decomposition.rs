//! Splitting `u = v + w` with `w` a free wave.
//!
//! Two conventions are supported. In [`Mode::TailSplit`] the datum is cut at a
//! radius `R` chosen so the dyadic tail sums are below `ε`, and `w` is the free
//! flow of the outer piece `(1 - χ(x/R)) u0`. In [`Mode::ZeroV`] `w` is the
//! free flow of all of `u0` and `v(0) = 0`. In both cases `v` is obtained as
//! `u - w` from the full nonlinear run.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{pseudoconformal_energy, PseudoconformalRecord};
use crate::error::{Error, Result};
use crate::evolution::{free_flow, Equation, Simulator, StepPolicy};
use crate::grid::{derivative_from_spectrum, radial_integral_unchecked, to_frequency, RadialField};
use crate::littlewood_paley::{tail_radius, CutoffProfile, TailSums};

/// Relative tolerance of `||u - (v + w)||`.
pub const CONSISTENCY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Mode {
    TailSplit { epsilon: f64 },
    ZeroV,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataSplit {
    pub core: RadialField,
    pub tail: RadialField,
    pub radius: f64,
    pub epsilon: f64,
    pub sums: TailSums,
}

/// `u0 = χ(x/R) u0 + (1 - χ(x/R)) u0` with `R` from [`tail_radius`].
///
/// When the untruncated sums already meet `ε` the radius is zero, the tail is
/// zero and the core is `u0`.
pub fn split_data(u0: &RadialField, epsilon: f64, p: f64, chi: CutoffProfile) -> Result<DataSplit> {
    let cut = tail_radius(u0, epsilon, p, chi)?;
    let tail = u0.map(|r, v| chi.complement(r, cut.radius) * v);
    let core = u0.sub(&tail);
    Ok(DataSplit { core, tail, radius: cut.radius, epsilon, sums: cut.sums })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionState {
    pub t: f64,
    pub v: RadialField,
    pub w: RadialField,
    /// `||u - (v + w)||_{L^2} / ||u||_{L^2}`.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub mode: Mode,
    /// Present in tail-split mode.
    pub split: Option<DataSplit>,
    pub states: Vec<DecompositionState>,
}

impl Decomposition {
    pub fn radius(&self) -> Option<f64> {
        self.split.as_ref().map(|s| s.radius)
    }

    /// Pseudoconformal energy of `v` at every recorded state.
    pub fn pseudoconformal(&self, p: f64) -> Result<Vec<PseudoconformalRecord>> {
        self.states.iter().map(|s| pseudoconformal_energy(&s.v, s.t, p)).collect()
    }
}

/// Run the full equation and record `(v, w)` every `policy.snapshot_stride`
/// steps (and at both endpoints).
pub fn evolve_decomposed(
    u0: &RadialField,
    equation: Equation,
    mode: Mode,
    t_end: f64,
    policy: StepPolicy,
    chi: CutoffProfile,
) -> Result<Decomposition> {
    let split = match mode {
        Mode::TailSplit { epsilon } => Some(split_data(u0, epsilon, equation.p, chi)?),
        Mode::ZeroV => None,
    };
    let w0 = split.as_ref().map(|s| s.tail.clone()).unwrap_or_else(|| u0.clone());
    let mut sim = Simulator::new(u0, equation, policy, &[])?;
    let stride = policy.snapshot_stride as u64;
    let mut states = Vec::new();
    let mut capture = |s: &Simulator| -> Result<()> {
        let t = s.time();
        let u = s.field();
        let w = free_flow(&w0, t)?;
        let v = u.sub(&w);
        let norm = u.l2_norm();
        let gap = u.sub(&v.add(&w)).l2_norm();
        let residual = if norm > 0.0 { gap / norm } else { gap };
        if residual > CONSISTENCY_TOL {
            return Err(Error::Inconsistent { t, residual });
        }
        states.push(DecompositionState { t, v, w, residual });
        Ok(())
    };
    let target_steps = (t_end / policy.dt).round() as u64;
    sim.advance_with(t_end, |s| {
        let k = s.step_index();
        if k == 0 || k == target_steps || (stride > 0 && k % stride == 0) {
            capture(s)?;
        }
        Ok(())
    })?;
    Ok(Decomposition { mode, split, states })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WSmallness {
    /// `||w||_{L^2_t L^∞_x}`.
    pub l2_linf: f64,
    /// `sup_t t^{1/2} ||w(t)||_∞`.
    pub weighted_sup: f64,
    /// `int ||∇w(t)||_∞ dt`.
    pub gradient_integral: f64,
}

/// Smallness of `w = e^{itΔ} u0_tail` on the increasing time grid `times`
/// (trapezoid rule in `t`).
pub fn w_smallness_report(tail: &RadialField, times: &[f64]) -> Result<WSmallness> {
    if times.len() < 2 || times.windows(2).any(|w| !(w[1] > w[0])) || times[0] <= 0.0 {
        return Err(Error::Config("time grid must be positive and strictly increasing".into()));
    }
    let base = to_frequency(tail);
    let rows: Vec<(f64, f64)> = times
        .iter()
        .map(|&t| {
            let flowed = base.map(|rho, v| num_complex::Complex64::from_polar(1.0, -rho * rho * t) * v);
            let w = crate::grid::from_frequency(&flowed);
            w.check_boundary(crate::grid::DEFAULT_BOUNDARY_TOL)?;
            Ok((w.sup_norm(), derivative_from_spectrum(&flowed).sup_norm()))
        })
        .collect::<Result<_>>()?;
    let trapezoid = |f: &dyn Fn(usize) -> f64| -> f64 {
        times.windows(2).enumerate().map(|(k, w)| 0.5 * (w[1] - w[0]) * (f(k) + f(k + 1))).sum()
    };
    Ok(WSmallness {
        l2_linf: trapezoid(&|k| rows[k].0 * rows[k].0).sqrt(),
        weighted_sup: times.iter().zip(&rows).map(|(t, r)| t.sqrt() * r.0).fold(0.0, f64::max),
        gradient_integral: trapezoid(&|k| rows[k].1),
    })
}

/// `||x f||_{L^2}`, used to normalise decomposition diagnostics.
pub fn moment_norm(f: &RadialField) -> f64 {
    radial_integral_unchecked(&f.map(|r, v| r * v), 2.0, 0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::simulate;
    use crate::grid::{from_frequency, RadialGrid};
    use num_complex::Complex64;

    fn gaussian(grid: &RadialGrid, c: f64) -> RadialField {
        grid.sample(|r| c * (-r * r / 2.0).exp())
    }

    fn algebraic(grid: &RadialGrid, c: f64) -> RadialField {
        grid.sample(|r| c / (1.0 + r * r).powi(3))
    }

    #[test]
    fn huge_epsilon_gives_degenerate_split() {
        let grid = RadialGrid::new(64.0, 1024).unwrap();
        let u0 = gaussian(&grid, 1.0);
        let split = split_data(&u0, 1e6, 3.0, CutoffProfile).unwrap();
        assert_eq!(split.radius, 0.0);
        assert_eq!(split.tail.sup_norm(), 0.0);
        assert_eq!(split.core, u0);
    }

    #[test]
    fn gaussian_split_keeps_most_mass_in_core() {
        // the L^1 tail sum decays like R^{-5/3}, so eps = 1e-3 needs R in the thousands
        let grid = RadialGrid::new(65536.0, 131072).unwrap();
        let u0 = gaussian(&grid, 1.0);
        let split = split_data(&u0, 1e-3, 3.0, CutoffProfile).unwrap();
        assert!(split.radius > 0.0 && split.radius.is_finite());
        assert!(split.core.l2_norm() >= 0.99 * u0.l2_norm());
        assert!(split.sums.within(1e-3));
        let back = split.core.add(&split.tail);
        assert!(back.sub(&u0).sup_norm() <= 1e-15 * u0.sup_norm());
    }

    #[test]
    fn smaller_epsilon_pushes_radius_out() {
        let grid = RadialGrid::new(16384.0, 32768).unwrap();
        let u0 = algebraic(&grid, 1.0);
        let coarse = split_data(&u0, 1e-1, 2.5, CutoffProfile).unwrap();
        let fine = split_data(&u0, 1e-2, 2.5, CutoffProfile).unwrap();
        assert!(fine.radius >= coarse.radius && coarse.radius > 0.0);
        for i in 0..grid.n() {
            if grid.r(i) > 2.0 * coarse.radius {
                assert!(fine.tail.values()[i].norm() <= coarse.tail.values()[i].norm());
            }
        }
    }

    #[test]
    fn zero_v_mode_starts_at_zero_and_stays_consistent() {
        let grid = RadialGrid::new(32.0, 512).unwrap();
        let u0 = gaussian(&grid, 1.0);
        let policy = StepPolicy::new(1e-2).with_snapshots(10);
        let dec = evolve_decomposed(&u0, Equation::defocusing(3.0), Mode::ZeroV, 0.5, policy, CutoffProfile).unwrap();
        assert_eq!(dec.states[0].v.sup_norm(), 0.0);
        assert_eq!(dec.states[0].w, u0);
        assert_eq!(dec.states.len(), 6);
        assert!(dec.states.iter().all(|s| s.residual <= CONSISTENCY_TOL));
        assert!(dec.radius().is_none());
    }

    #[test]
    fn free_wave_component_is_exactly_linear() {
        let grid = RadialGrid::new(32.0, 512).unwrap();
        let u0 = gaussian(&grid, 1.0);
        let policy = StepPolicy::new(1e-2).with_snapshots(20);
        let dec = evolve_decomposed(&u0, Equation::defocusing(3.0), Mode::ZeroV, 0.4, policy, CutoffProfile).unwrap();
        let (a, b) = (&dec.states[1], &dec.states[2]);
        let pushed = free_flow(&a.w, b.t - a.t).unwrap();
        assert!(pushed.sub(&b.w).l2_norm() <= 1e-10 * b.w.l2_norm());
    }

    #[test]
    fn tail_split_with_empty_tail_makes_v_the_solution() {
        let grid = RadialGrid::new(32.0, 512).unwrap();
        let u0 = gaussian(&grid, 0.5);
        let policy = StepPolicy::new(1e-2).with_snapshots(10);
        let eq = Equation::defocusing(3.0);
        let dec = evolve_decomposed(&u0, eq, Mode::TailSplit { epsilon: 1e6 }, 0.3, policy, CutoffProfile).unwrap();
        let u = simulate(&u0, eq, 0.3, policy, &[]).unwrap();
        assert_eq!(dec.radius(), Some(0.0));
        let last = dec.states.last().unwrap();
        assert_eq!(last.w.sup_norm(), 0.0);
        assert_eq!(&last.v, u.last());
    }

    #[test]
    fn v_satisfies_duhamel_formula() {
        // v(t) = -i int_0^t e^{i(t-s)Δ} |u|^{p-1} u (s) ds in the zero-v convention
        let grid = RadialGrid::new(32.0, 512).unwrap();
        let u0 = gaussian(&grid, 1.0);
        let p = 3.0;
        let dt = 1e-3;
        let t = 0.1;
        let traj = simulate(&u0, Equation::defocusing(p), t, StepPolicy::new(dt).with_snapshots(1), &[]).unwrap();
        let mut acc = vec![Complex64::new(0.0, 0.0); grid.n()];
        let m = traj.snapshots.len() - 1;
        for (k, snap) in traj.snapshots.iter().enumerate() {
            let nonlinear = snap.field.map(|_, v| v.norm().powf(p - 1.0) * v);
            let spectrum = to_frequency(&nonlinear);
            let w = if k == 0 || k == m {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            for (a, (i, s)) in acc.iter_mut().zip(spectrum.values().iter().enumerate()) {
                let rho = grid.rho(i);
                *a += w * dt / 3.0 * Complex64::from_polar(1.0, -rho * rho * (t - snap.t)) * s;
            }
        }
        let duhamel = from_frequency(&crate::grid::Spectrum::new(grid, acc).unwrap()).scale(Complex64::new(0.0, -1.0));
        let v = traj.last().sub(&free_flow(&u0, t).unwrap());
        let err = v.sub(&duhamel).l2_norm() / v.l2_norm();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn w_smallness_of_zero_tail() {
        let grid = RadialGrid::new(32.0, 512).unwrap();
        let out = w_smallness_report(&RadialField::zeros(grid), &[0.1, 1.0, 10.0]).unwrap();
        assert_eq!(out, WSmallness { l2_linf: 0.0, weighted_sup: 0.0, gradient_integral: 0.0 });
        assert!(w_smallness_report(&RadialField::zeros(grid), &[1.0, 0.5]).is_err());
    }

    #[test]
    fn w_smallness_shrinks_with_epsilon() {
        let grid = RadialGrid::new(16384.0, 32768).unwrap();
        let u0 = algebraic(&grid, 1.0);
        let times: Vec<f64> = (0..=12).map(|k| 0.01 * 10f64.powf(k as f64 / 3.0)).collect();
        let mut previous: Option<WSmallness> = None;
        for eps in [1e-1, 5e-2, 2.5e-2] {
            let split = split_data(&u0, eps, 2.5, CutoffProfile).unwrap();
            let report = w_smallness_report(&split.tail, &times).unwrap();
            assert!(report.gradient_integral.is_finite());
            if let Some(prev) = previous {
                assert!(report.l2_linf <= prev.l2_linf);
                assert!(report.weighted_sup <= prev.weighted_sup);
                assert!(report.gradient_integral <= prev.gradient_integral);
            }
            previous = Some(report);
        }
    }
}
