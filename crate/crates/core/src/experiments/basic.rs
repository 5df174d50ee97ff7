use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    fit_dt, relative_change, two_resolutions, Assertion, ExperimentConfig, ExperimentResult, GridInfo, Leg, Series,
    Table,
};
use crate::decomposition::{evolve_decomposed, moment_norm, split_data, w_smallness_report, Mode};
use crate::diagnostics::{self, commutation_residual, vector_field};
use crate::error::Result;
use crate::evolution::{self, rescale_initial_data, simulate, Equation, StepPolicy};
use crate::grid::{RadialField, RadialGrid};
use crate::littlewood_paley::CutoffProfile;

/// `e^{itΔ}` applied to `λ e^{-λ^2 r^2/2}`.
pub(crate) fn dispersing_bump(r: f64, t: f64, lambda: f64) -> Complex64 {
    let a = Complex64::new(1.0, 2.0 * lambda * lambda * t);
    lambda * a.powf(-1.5) * (-(lambda * r).powi(2) / (2.0 * a)).exp()
}

fn info(grid: &RadialGrid, dt: f64) -> Option<GridInfo> {
    Some(GridInfo { r_max: grid.r_max(), n: grid.n(), dt })
}

pub(super) fn free_flow(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    two_resolutions(
        cfg,
        |cfg, level| {
            let grid = cfg.grid(level)?;
            let u0 = cfg.initial_data(&grid);
            let mut leg = Leg { grid: info(&grid, 0.0), ..Leg::default() };
            let times: Vec<f64> = [1.0 / 16.0, 0.125, 0.25, 0.5, 1.0].iter().map(|f| f * cfg.t_end).collect();
            let m0 = u0.l2_norm();
            let mut errors = Vec::new();
            let mut drifts = Vec::new();
            for &t in &times {
                let u = evolution::free_flow(&u0, t)?;
                let worst = u
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let r = grid.r(i);
                        let exact = cfg.c1 * dispersing_bump(r, t, 1.0) + cfg.c2 * dispersing_bump(r, t, cfg.lambda);
                        (v - exact).norm()
                    })
                    .fold(0.0, f64::max);
                errors.push(worst);
                drifts.push(relative_change(u.l2_norm().powi(2), m0 * m0));
            }
            let identity = evolution::free_flow(&u0, 0.0)?.sub(&u0).sup_norm();
            let max_error = errors.iter().copied().fold(0.0, f64::max);
            let max_drift = drifts.iter().copied().fold(0.0, f64::max);
            leg.scalar("max_pointwise_error", max_error);
            leg.assert(Assertion::at_most("max_pointwise_error", max_error, 1e-6));
            leg.assert(Assertion::at_most("mass_drift", max_drift, 1e-12));
            leg.assert(Assertion::at_most("identity_at_zero", identity, 0.0));
            leg.tables.push(Table {
                name: "free_flow".into(),
                axis: Series::new("t", "time", times),
                columns: vec![
                    Series::new("max_error", "amplitude", errors),
                    Series::new("mass_drift", "relative", drifts),
                ],
            });
            Ok(leg)
        },
        |_, _| Vec::new(),
    )
}

/// Sum of three centred Gaussians with random widths, phases and `r^2` corrections.
pub fn random_datum(grid: &RadialGrid, seed: u64, amplitude: f64) -> RadialField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<(Complex64, f64, f64)> = (0..3)
        .map(|_| {
            let c = Complex64::from_polar(
                amplitude * rng.random_range(0.2..1.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            );
            (c, rng.random_range(-0.3..0.3), rng.random_range(0.7..1.5))
        })
        .collect();
    grid.sample(move |r: f64| {
        terms
            .iter()
            .map(|&(c, beta, sigma)| c * (1.0 + beta * r * r) * (-(r / sigma).powi(2) / 2.0).exp())
            .sum::<Complex64>()
    })
}

fn momentum_residual(traj: &crate::evolution::Trajectory) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in &traj.snapshots {
        let m = diagnostics::mass(&s.field)?;
        let p = diagnostics::momentum(&s.field)?;
        let size = p.iter().map(|c| c.abs()).fold(0.0, f64::max);
        worst = worst.max(if m > 0.0 { size / m } else { size });
    }
    Ok(worst)
}

pub(super) fn conservation(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    two_resolutions(
        cfg,
        |cfg, level| {
            let grid = cfg.grid(level)?;
            let dt = fit_dt(cfg.dt, &grid);
            let eq = Equation::defocusing(cfg.p);
            let u0 = cfg.initial_data(&grid);
            let mut leg = Leg { grid: info(&grid, dt), ..Leg::default() };

            let coarse = simulate(&u0, eq, cfg.t_end, StepPolicy::new(dt).with_log(10).with_snapshots(500), &[])?;
            let fine = simulate(&u0, eq, cfg.t_end, StepPolicy::new(dt / 2.0).with_log(20), &[])?;
            let (e1, e2) = (coarse.energy_drift(), fine.energy_drift());
            let ratio = e1 / e2;
            leg.scalar("energy_drift", e1);
            leg.scalar("energy_drift_half_step", e2);
            leg.scalar("energy_order_ratio", ratio);
            let mass_drift = coarse.mass_drift().max(fine.mass_drift());
            leg.assert(Assertion::at_most("mass_drift", mass_drift, 1e-10));
            leg.assert(Assertion::new("energy_order_ratio", ratio, super::Comparison::Between { low: 3.4, high: 4.6 }));
            leg.assert(Assertion::at_most("energy_drift", e1, 1e-6));
            leg.assert(Assertion::at_most("momentum_residual", momentum_residual(&coarse)?, 1e-12));

            let random = random_datum(&grid, cfg.seed, cfg.c1);
            let traj = simulate(&random, eq, cfg.t_end, StepPolicy::new(dt).with_log(10).with_snapshots(500), &[])?;
            leg.assert(Assertion::at_most("random_mass_drift", traj.mass_drift(), 1e-10));
            leg.assert(Assertion::at_most("random_momentum_residual", momentum_residual(&traj)?, 1e-12));

            let base = |t: &crate::evolution::Trajectory| {
                let e0 = t.log[0].energy;
                t.log.iter().map(|e| (e.energy - e0) / e0).collect::<Vec<_>>()
            };
            leg.tables.push(Table {
                name: "energy".into(),
                axis: Series::new("t", "time", coarse.log.iter().map(|e| e.t).collect()),
                columns: vec![
                    Series::new("energy_deviation_dt", "relative", base(&coarse)),
                    Series::new("energy_deviation_half_dt", "relative", base(&fine)),
                ],
            });
            Ok(leg)
        },
        |_, _| Vec::new(),
    )
}

pub(super) fn commutation(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    two_resolutions(
        cfg,
        |cfg, level| {
            let grid = cfg.grid(level)?;
            let f = cfg.initial_data(&grid);
            let mut leg = Leg { grid: info(&grid, 0.0), ..Leg::default() };
            let times: Vec<f64> = [0.125, 0.25, 0.5, 1.0].iter().map(|s| s * cfg.t_end).collect();
            let base = moment_norm(&f);
            let mut residuals = Vec::new();
            let mut drifts = Vec::new();
            for &t in &times {
                residuals.push(commutation_residual(&f, t)?);
                let j = vector_field(&evolution::free_flow(&f, t)?, t)?.l2_norm();
                drifts.push(relative_change(j, base));
            }
            let worst = residuals.iter().copied().fold(0.0, f64::max);
            leg.scalar("max_residual", worst);
            leg.assert(Assertion::at_most("commutation_residual", worst, 1e-8));
            leg.assert(Assertion::at_most("vector_field_norm_drift", drifts.iter().copied().fold(0.0, f64::max), 1e-8));
            leg.tables.push(Table {
                name: "commutation".into(),
                axis: Series::new("t", "time", times),
                columns: vec![
                    Series::new("residual", "relative", residuals),
                    Series::new("vector_field_norm_drift", "relative", drifts),
                ],
            });
            Ok(leg)
        },
        |_, _| Vec::new(),
    )
}

pub(super) fn decomposition(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    two_resolutions(
        cfg,
        |cfg, level| {
            let grid = cfg.grid(level)?;
            let dt = fit_dt(cfg.dt, &grid);
            let eq = Equation::defocusing(cfg.p);
            let chi = CutoffProfile;
            let u0 = cfg.initial_data(&grid);
            let mut leg = Leg { grid: info(&grid, dt), ..Leg::default() };

            let steps = (cfg.t_end / dt).round() as usize;
            let policy = StepPolicy::new(dt).with_snapshots((steps / 10).max(1));
            let run = evolve_decomposed(&u0, eq, Mode::TailSplit { epsilon: cfg.epsilon }, cfg.t_end, policy, chi)?;
            let split = run.split.as_ref().expect("tail split");
            let core_fraction = split.core.l2_norm() / u0.l2_norm();
            let worst = run.states.iter().map(|s| s.residual).fold(0.0, f64::max);
            leg.scalar("tail_radius", split.radius);
            leg.scalar("core_fraction", core_fraction);
            leg.assert(Assertion::at_least("core_fraction", core_fraction, 0.99));
            leg.assert(Assertion::at_most("consistency_residual", worst, crate::decomposition::CONSISTENCY_TOL));

            let algebraic = grid.sample(|r: f64| cfg.c1 * (1.0 + r * r).powi(-3));
            let epsilons: Vec<f64> = (0..3).map(|k| cfg.epsilon / 2f64.powi(k)).collect();
            let times: Vec<f64> = (0..=16).map(|k| cfg.t_end * 2f64.powf(k as f64 / 4.0 - 4.0)).collect();
            let mut radii = Vec::new();
            let mut rows = Vec::new();
            for &eps in &epsilons {
                let s = split_data(&algebraic, eps, cfg.p, chi)?;
                radii.push(s.radius);
                rows.push(w_smallness_report(&s.tail, &times)?);
            }
            let growth = |f: &dyn Fn(usize) -> f64| {
                (1..rows.len()).map(|k| if f(k - 1) > 0.0 { f(k) / f(k - 1) } else { f(k) }).fold(0.0, f64::max)
            };
            leg.assert(Assertion::at_most("tail_l2_linf_growth", growth(&|k| rows[k].l2_linf), 1.0));
            leg.assert(Assertion::at_most("tail_weighted_sup_growth", growth(&|k| rows[k].weighted_sup), 1.0));
            leg.assert(Assertion::at_most("tail_gradient_growth", growth(&|k| rows[k].gradient_integral), 1.0));
            leg.assert(Assertion::at_least(
                "tail_radius_monotone",
                radii.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min),
                0.0,
            ));
            leg.tables.push(Table {
                name: "tail_smallness".into(),
                axis: Series::new("epsilon", "dimensionless", epsilons),
                columns: vec![
                    Series::new("radius", "length", radii),
                    Series::new("l2_linf", "norm", rows.iter().map(|r| r.l2_linf).collect()),
                    Series::new("weighted_sup", "norm", rows.iter().map(|r| r.weighted_sup).collect()),
                    Series::new("gradient_integral", "norm", rows.iter().map(|r| r.gradient_integral).collect()),
                ],
            });

            let small_grid = RadialGrid::new(64.0, 1024 << level)?;
            let scaled = rescale_initial_data(&small_grid.sample(cfg.profile()), cfg.delta, eq, 2e-3)?;
            let zero_policy = StepPolicy::new(1.0 / 512.0).with_snapshots(8);
            let zero = evolve_decomposed(&scaled.field, eq, Mode::ZeroV, 1.0, zero_policy, chi)?;
            let energies: Vec<f64> = zero.pseudoconformal(cfg.p)?.iter().map(|r| r.e_pc).collect();
            let last = *energies.last().expect("endpoint state");
            let top = energies.iter().copied().fold(0.0, f64::max);
            let kink = energies.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).abs()).fold(0.0, f64::max);
            leg.scalar("rescale_lambda", scaled.lambda);
            leg.scalar("zero_v_energy_at_one", last);
            leg.assert(Assertion::at_most("zero_v_energy_finite", if last.is_finite() { 0.0 } else { 1.0 }, 0.0));
            leg.assert(Assertion::at_most("zero_v_energy_kink", if top > 0.0 { kink / top } else { 0.0 }, 0.01));
            leg.tables.push(Table {
                name: "zero_v".into(),
                axis: Series::new("t", "time", zero.states.iter().map(|s| s.t).collect()),
                columns: vec![Series::new("e_pc", "energy", energies)],
            });
            Ok(leg)
        },
        |coarse, fine| {
            let (a, b) = (coarse.scalars["zero_v_energy_at_one"], fine.scalars["zero_v_energy_at_one"]);
            vec![Assertion::at_most("zero_v_energy_convergence", relative_change(a, b), 0.05)]
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_datum_is_reproducible() {
        let grid = RadialGrid::new(32.0, 256).unwrap();
        let a = random_datum(&grid, 3, 1.0);
        assert_eq!(a, random_datum(&grid, 3, 1.0));
        assert_ne!(a, random_datum(&grid, 4, 1.0));
        assert!(a.check_boundary(1e-12).is_ok());
    }

    #[test]
    fn bump_oracle_reduces_to_data() {
        for r in [0.0, 0.5, 2.0] {
            assert!((dispersing_bump(r, 0.0, 2.0) - 2.0 * (-2.0 * r * r).exp()).norm() < 1e-15);
        }
    }
}
