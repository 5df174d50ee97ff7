use super::{
    fit_dt, relative_change, spread, two_resolutions, Assertion, Comparison, ExperimentConfig, ExperimentResult,
    GridInfo, Leg, Series, Table,
};
use crate::diagnostics::{morawetz_rhs, spacetime_norm};
use crate::error::{Error, Result};
use crate::evolution::{check_domain, simulate, Equation, NormPair, StepPolicy, Trajectory};
use crate::grid::RadialGrid;
use crate::littlewood_paley::{besov_norm, critical_besov_regularity, critical_exponent, sobolev_norm, DIM};

/// Narrow-bump samples per unit width required by the two-bump sweep.
pub const MIN_POINTS_PER_WIDTH: f64 = 16.0;

fn powers_of_two(from: f64, to: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut x = from;
    while x <= to * (1.0 + 1e-12) {
        out.push(x);
        x *= 2.0;
    }
    out
}

fn size_over(traj: &Trajectory, pair: &NormPair, t_end: f64) -> Result<f64> {
    spacetime_norm(traj, pair, (0.0, t_end))
}

pub(super) fn scale_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    two_resolutions(
        cfg,
        |cfg, level| {
            let eq = Equation::defocusing(cfg.p);
            let pair = eq.scattering_pair()?;
            let s_b = critical_besov_regularity(cfg.p)?;
            let s_c = critical_exponent(cfg.p, DIM)?;
            let lambdas = powers_of_two(0.5, cfg.lambda);
            let amp = |l: f64| l.powf(2.0 / (cfg.p - 1.0));
            let profile = cfg.profile();

            let norm_grid = RadialGrid::new(1024.0, 131072 << level)?;
            let baseline = besov_norm(&cfg.initial_data(&norm_grid), s_b)?;
            let grid = cfg.grid(level)?;
            let slowest = lambdas[0];
            let dt0 = fit_dt(cfg.dt / (slowest * slowest), &grid) * slowest * slowest;
            let mut leg = Leg { grid: Some(GridInfo { r_max: grid.r_max(), n: grid.n(), dt: dt0 }), ..Leg::default() };

            let (mut besov, mut sobolev, mut sizes) = (Vec::new(), Vec::new(), Vec::new());
            for &l in &lambdas {
                let on_norm_grid = norm_grid.sample(|r| amp(l) * profile(l * r));
                besov.push(besov_norm(&on_norm_grid, s_b)?);
                sobolev.push(sobolev_norm(&on_norm_grid, s_c)?);
                let u0 = grid.sample(|r| amp(l) * profile(l * r));
                let (dt, t_end) = (dt0 / (l * l), cfg.t_end / (l * l));
                let traj = simulate(&u0, eq, t_end, StepPolicy::new(dt), &[pair])?;
                sizes.push(size_over(&traj, &pair, t_end)?);
            }
            let unit = lambdas.iter().position(|&l| l == 1.0).map(|k| besov[k]).unwrap_or(baseline);
            leg.scalar("besov", unit);
            leg.scalar("scattering_size", sizes[lambdas.iter().position(|&l| l == 1.0).unwrap_or(0)]);
            leg.assert(Assertion::at_most("besov_spread", spread(&besov), 0.005));
            leg.assert(Assertion::at_most("sobolev_spread", spread(&sobolev), 0.005));
            leg.assert(Assertion::at_most("scattering_size_spread", spread(&sizes), 0.02));
            leg.assert(Assertion::at_most("unit_row_exact", (unit - baseline).abs(), 0.0));
            leg.tables.push(Table {
                name: "scale_sweep".into(),
                axis: Series::new("lambda", "dimensionless", lambdas),
                columns: vec![
                    Series::new("besov", "norm", besov),
                    Series::new("sobolev", "norm", sobolev),
                    Series::new("scattering_size", "norm", sizes),
                ],
            });
            Ok(leg)
        },
        |_, _| Vec::new(),
    )
}

struct BumpRun {
    size: f64,
    morawetz: f64,
}

fn bump_run(cfg: &ExperimentConfig, lambda: f64, c2: f64, level: u32) -> Result<(BumpRun, GridInfo)> {
    let per_width = cfg.n as f64 / cfg.r_max * 2f64.powi(level as i32);
    if per_width < MIN_POINTS_PER_WIDTH {
        return Err(Error::Config(format!(
            "narrow bump resolved by {per_width} points per width, need {MIN_POINTS_PER_WIDTH}"
        )));
    }
    let grid = RadialGrid::new(cfg.r_max, ((cfg.n as f64 * lambda).round() as usize) << level)?;
    let data = ExperimentConfig { lambda, c2, ..cfg.clone() };
    let u0 = data.initial_data(&grid);
    check_domain(&u0, cfg.t_end)?;
    let dt = fit_dt(cfg.dt, &grid);
    let eq = Equation::defocusing(cfg.p);
    let pair = eq.scattering_pair()?;
    let traj = simulate(&u0, eq, cfg.t_end, StepPolicy::new(dt), &[pair])?;
    Ok((
        BumpRun { size: size_over(&traj, &pair, cfg.t_end)?, morawetz: morawetz_rhs(&u0)? },
        GridInfo { r_max: grid.r_max(), n: grid.n(), dt },
    ))
}

pub(super) fn two_bump(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    two_resolutions(
        cfg,
        |cfg, level| {
            let lambdas = powers_of_two(1.0, cfg.lambda);
            let mut leg = Leg::default();
            let mut runs = Vec::new();
            for &l in &lambdas {
                let (run, info) = bump_run(cfg, l, cfg.c2, level)?;
                leg.grid = Some(info);
                runs.push(run);
            }
            let sizes: Vec<f64> = runs.iter().map(|r| r.size).collect();
            let rhs: Vec<f64> = runs.iter().map(|r| r.morawetz).collect();
            leg.assert(Assertion::at_most("scattering_size_spread", spread(&sizes), 0.25));
            for (k, &l) in lambdas.iter().enumerate().skip(1) {
                leg.assert(Assertion::at_least(&format!("morawetz_growth_{l}"), rhs[k] / rhs[0], l));
            }
            if level == 0 {
                let single: Vec<f64> =
                    lambdas.iter().map(|&l| bump_run(cfg, l, 0.0, 0).map(|r| r.0.size)).collect::<Result<_>>()?;
                leg.assert(Assertion::at_most("single_bump_spread", spread(&single), 0.02));
            }
            for (k, &l) in lambdas.iter().enumerate() {
                leg.scalar(&format!("size_lambda_{l}"), sizes[k]);
            }
            leg.tables.push(Table {
                name: "two_bump".into(),
                axis: Series::new("lambda", "dimensionless", lambdas),
                columns: vec![Series::new("scattering_size", "norm", sizes), Series::new("morawetz_rhs", "norm", rhs)],
            });
            Ok(leg)
        },
        |_, _| Vec::new(),
    )
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

pub(super) fn polynomial_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let pair =
        *cfg.norm_pairs.first().ok_or_else(|| Error::Config("polynomial_sweep needs at least one norm pair".into()))?;
    two_resolutions(
        cfg,
        |cfg, level| {
            let grid = cfg.grid(level)?;
            let dt = fit_dt(cfg.dt, &grid);
            let mut leg = Leg { grid: Some(GridInfo { r_max: grid.r_max(), n: grid.n(), dt }), ..Leg::default() };
            let eq = Equation::defocusing(cfg.p);
            let s_b = critical_besov_regularity(cfg.p)?;
            let unit = ExperimentConfig { c1: 1.0, c2: 0.0, ..cfg.clone() };
            let besov_unit = besov_norm(&unit.initial_data(&RadialGrid::new(512.0, 16384 << level)?), s_b)?;
            let amplitudes: Vec<f64> = (0..4).map(|k| cfg.c1 * 2f64.powi(k)).collect();
            let policy = StepPolicy::new(dt);

            let (mut sizes, mut last_decade, mut failures) = (Vec::new(), Vec::new(), 0.0);
            for &c in &amplitudes {
                let u0 = grid.sample(|r: f64| c * (-r * r / 2.0).exp());
                check_domain(&u0, cfg.t_end)?;
                match simulate(&u0, eq, cfg.t_end, policy, &[pair]) {
                    Ok(traj) => {
                        let total = size_over(&traj, &pair, cfg.t_end)?;
                        let late = spacetime_norm(&traj, &pair, (cfg.t_end / 10.0, cfg.t_end))?;
                        sizes.push(total);
                        last_decade.push((late / total).powf(pair.q_t));
                    }
                    Err(Error::Instability { .. }) => {
                        failures += 1.0;
                        sizes.push(f64::NAN);
                        last_decade.push(f64::NAN);
                    }
                    Err(e) => return Err(e),
                }
            }
            let smallest = grid.sample(|r: f64| amplitudes[0] * (-r * r / 2.0).exp());
            let free = simulate(&smallest, Equation::linear(cfg.p), cfg.t_end, policy, &[pair])?;
            let free_size = size_over(&free, &pair, cfg.t_end)?;
            let besov: Vec<f64> = amplitudes.iter().map(|c| c * besov_unit).collect();
            let slope = log_slope(&besov, &sizes);

            leg.assert(Assertion::at_most("no_blowup", failures, 0.0));
            leg.assert(Assertion::at_most("small_data_vs_free", relative_change(sizes[0], free_size), 0.20));
            leg.assert(Assertion::new(
                "slope_positive",
                slope,
                Comparison::Between { low: f64::MIN_POSITIVE, high: f64::MAX },
            ));
            leg.scalar("slope", slope);
            for (c, s) in amplitudes.iter().zip(&sizes) {
                leg.scalar(&format!("size_c_{c}"), *s);
            }
            leg.tables.push(Table {
                name: "polynomial_sweep".into(),
                axis: Series::new("c", "amplitude", amplitudes),
                columns: vec![
                    Series::new("besov", "norm", besov),
                    Series::new("scattering_size", "norm", sizes),
                    Series::new("last_decade_fraction", "fraction", last_decade),
                ],
            });
            Ok(leg)
        },
        |coarse, fine| {
            let worst = fine
                .scalars
                .iter()
                .filter(|(k, _)| k.starts_with("size_c_"))
                .map(|(k, f)| coarse.scalars.get(k).map(|c| relative_change(*c, *f)).unwrap_or(f64::INFINITY))
                .fold(0.0, f64::max);
            vec![Assertion::at_most("size_convergence", worst, 0.05)]
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.7)).collect();
        assert!((log_slope(&x, &y) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn sweep_lambdas() {
        assert_eq!(powers_of_two(0.5, 4.0), vec![0.5, 1.0, 2.0, 4.0]);
        assert_eq!(powers_of_two(1.0, 8.0), vec![1.0, 2.0, 4.0, 8.0]);
    }

    #[test]
    fn under_resolved_bump_is_rejected() {
        let cfg = ExperimentConfig { n: 1024, ..ExperimentConfig::defaults(super::super::Scenario::TwoBump) };
        assert!(matches!(bump_run(&cfg, 2.0, 0.5, 0), Err(Error::Config(_))));
    }
}
