use super::{
    fit_dt, relative_change, two_resolutions, Assertion, Comparison, ExperimentConfig, ExperimentResult, GridInfo, Leg,
    Series, Table,
};
use crate::diagnostics::{
    dispersive_ratio_with, local_dyadic_bound, monotonicity_defect, pseudoconformal_rate, pseudoconformal_run,
    PseudoconformalRecord,
};
use crate::error::{Error, Result};
use crate::evolution::{
    check_domain, free_flow, rescale, rescale_initial_data, simulate, Equation, NormPair, StepPolicy,
};
use crate::grid::{RadialField, RadialGrid};
use crate::littlewood_paley::{besov_norm, critical_besov_regularity, critical_exponent, sobolev_norm, DIM};

/// Spacing of pseudoconformal records.
const RECORD_SPACING: f64 = 5e-3;

/// `int_{t_0}^{T} t^{-4} ℰ(t)^2 dt` by the trapezoid rule, for every record time `T`.
pub fn cauchy_proxy(records: &[PseudoconformalRecord]) -> Vec<(f64, f64)> {
    let f = |r: &PseudoconformalRecord| r.e_pc * r.e_pc / r.t.powi(4);
    let mut acc = 0.0;
    let mut out = vec![(records[0].t, 0.0)];
    for w in records.windows(2) {
        acc += 0.5 * (w[1].t - w[0].t) * (f(&w[0]) + f(&w[1]));
        out.push((w[1].t, acc));
    }
    out
}

fn proxy_at(proxy: &[(f64, f64)], t: f64) -> f64 {
    proxy.iter().min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs())).map(|x| x.1).unwrap_or(0.0)
}

pub(super) fn monotonicity(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    two_resolutions(
        cfg,
        |cfg, level| {
            let grid = cfg.grid(level)?;
            let dt = fit_dt(cfg.dt, &grid);
            let stride = ((RECORD_SPACING / dt).round() as usize).max(1);
            let eq = Equation::defocusing(cfg.p);
            let u0 = cfg.initial_data(&grid);
            let t_start = (cfg.t_end / 8.0).max(dt);
            let records = pseudoconformal_run(&u0, eq, t_start, cfg.t_end, StepPolicy::new(dt), stride)?;
            let defect = monotonicity_defect(&records)?;

            let literal_scale = 4.0 / (cfg.p + 1.0) / pseudoconformal_rate(cfg.p);
            let literal: Vec<PseudoconformalRecord> =
                records.iter().map(|r| PseudoconformalRecord { rhs: r.rhs * literal_scale, ..*r }).collect();
            let literal_defect = monotonicity_defect(&literal)?.max_relative;

            let e0 = records[0].e_pc;
            let rise = records.windows(2).map(|w| (w[1].e_pc - w[0].e_pc) / e0).fold(f64::NEG_INFINITY, f64::max);
            let proxy = cauchy_proxy(&records);
            let (i2, i4, i8) =
                (proxy_at(&proxy, cfg.t_end / 4.0), proxy_at(&proxy, cfg.t_end / 2.0), proxy_at(&proxy, cfg.t_end));

            let mut leg = Leg { grid: Some(GridInfo { r_max: grid.r_max(), n: grid.n(), dt }), ..Leg::default() };
            leg.scalar("identity_defect", defect.max_relative);
            leg.scalar("literal_rate_defect", literal_defect);
            leg.scalar("e_pc_start", e0);
            leg.scalar("e_pc_end", records.last().map(|r| r.e_pc).unwrap_or(e0));
            leg.scalar("cauchy_proxy", i8);
            leg.assert(Assertion::at_most("identity_defect", defect.max_relative, 0.01));
            leg.assert(Assertion::at_most("max_relative_increase", rise, 1e-10));
            leg.assert(Assertion::at_most("cauchy_first_doubling", (i4 - i2) / i2, 0.10));
            leg.assert(Assertion::at_most("cauchy_second_doubling", (i8 - i4) / i4, 0.05));

            let interior = &records[1..records.len() - 1];
            let column = |f: fn(&PseudoconformalRecord) -> f64| interior.iter().map(f).collect::<Vec<_>>();
            leg.tables.push(Table {
                name: "pseudoconformal".into(),
                axis: Series::new("t", "time", defect.t.clone()),
                columns: vec![
                    Series::new("E_pc", "energy", column(|r| r.e_pc)),
                    Series::new("part_vector", "energy", column(|r| r.part_vector)),
                    Series::new("part_potential", "energy", column(|r| r.part_potential)),
                    Series::new("rhs", "energy/time", defect.rhs.clone()),
                    Series::new("defect", "energy/time", defect.defect.clone()),
                ],
            });
            Ok(leg)
        },
        |_, _| Vec::new(),
    )
}

pub(super) fn dispersive_decay(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    two_resolutions(
        cfg,
        |cfg, level| {
            let grid = cfg.grid(level)?;
            let u0 = cfg.initial_data(&grid);
            check_domain(&u0, cfg.t_end)?;
            let besov_grid = RadialGrid::new(cfg.r_max, (4 * cfg.n) << level)?;
            let besov = besov_norm(&cfg.initial_data(&besov_grid), critical_besov_regularity(cfg.p)?)?;
            let count = 21;
            let times: Vec<f64> = (0..count).map(|k| cfg.t_end.powf(k as f64 / (count - 1) as f64)).collect();
            let ratios = dispersive_ratio_with(&u0, cfg.p, &times, besov)?;
            let [sup, gradient, fractional] = ratios.constants();

            let mut leg = Leg { grid: Some(GridInfo { r_max: grid.r_max(), n: grid.n(), dt: 0.0 }), ..Leg::default() };
            leg.scalar("besov", besov);
            for (name, c) in
                [("sup_constant", sup), ("gradient_constant", gradient), ("fractional_constant", fractional)]
            {
                leg.scalar(name, c);
                leg.assert(Assertion::new(name, c, Comparison::Between { low: 0.0, high: f64::MAX }));
            }
            leg.tables.push(Table {
                name: "dispersive_ratios".into(),
                axis: Series::new("t", "time", times),
                columns: vec![
                    Series::new("sup", "dimensionless", ratios.sup),
                    Series::new("gradient", "dimensionless", ratios.gradient),
                    Series::new("fractional", "dimensionless", ratios.fractional),
                ],
            });
            Ok(leg)
        },
        |coarse, fine| {
            ["sup_constant", "gradient_constant", "fractional_constant"]
                .iter()
                .map(|name| {
                    let change = relative_change(coarse.scalars[*name], fine.scalars[*name]);
                    Assertion::at_most(&format!("{name}_stability"), change, 0.10)
                })
                .collect()
        },
    )
}

pub(super) fn local_bound(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    two_resolutions(
        cfg,
        |cfg, level| {
            let eq = Equation::defocusing(cfg.p);
            let grid = cfg.grid(level)?;
            let u0 = cfg.initial_data(&grid);
            let scaled = rescale_initial_data(&u0, cfg.delta, eq, cfg.dt)?;
            let besov_base = cfg.initial_data(&RadialGrid::new(512.0, 16384 << level)?);
            let besov = besov_norm(&rescale(&besov_base, scaled.lambda, cfg.p)?, critical_besov_regularity(cfg.p)?)?;

            let pair = NormPair::of_gradient(2.0, 2.0 * DIM / (DIM - 2.0));
            let dt = fit_dt(1.0 / 2048.0, scaled.field.grid());
            let octaves: Vec<i32> = (1..=6).map(|k| -k).collect();
            let ratios_for = |equation: Equation| -> Result<Vec<f64>> {
                let traj = simulate(&scaled.field, equation, 1.0, StepPolicy::new(dt), &[pair])?;
                Ok(local_dyadic_bound(&traj, &octaves, besov)?.iter().map(|o| o.ratio).collect())
            };
            let nonlinear = ratios_for(eq)?;
            let linear = ratios_for(Equation::linear(cfg.p))?;
            let uniformity = |r: &[f64]| {
                let max = r.iter().copied().fold(0.0, f64::max);
                let min = r.iter().copied().fold(f64::INFINITY, f64::min);
                max / min
            };
            let search_rise = scaled.search.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);

            let mut leg =
                Leg { grid: Some(GridInfo { r_max: scaled.field.grid().r_max(), n: grid.n(), dt }), ..Leg::default() };
            leg.scalar("lambda", scaled.lambda);
            leg.scalar("besov", besov);
            leg.scalar("max_ratio", nonlinear.iter().copied().fold(0.0, f64::max));
            leg.assert(Assertion::at_most("octave_uniformity", uniformity(&nonlinear), 10.0));
            leg.assert(Assertion::at_most("linear_octave_uniformity", uniformity(&linear), 10.0));
            leg.assert(Assertion::at_most(
                "rescaled_smallness",
                scaled.search.last().map(|s| s.1).unwrap_or(f64::INFINITY),
                cfg.delta,
            ));
            if scaled.search.len() > 1 {
                leg.assert(Assertion::at_most("search_monotone", search_rise, 0.0));
            }
            leg.tables.push(Table {
                name: "octaves".into(),
                axis: Series::new("j", "log2 time", octaves.iter().map(|&j| j as f64).collect()),
                columns: vec![
                    Series::new("ratio", "dimensionless", nonlinear),
                    Series::new("linear_ratio", "dimensionless", linear),
                ],
            });
            leg.tables.push(Table {
                name: "rescale_search".into(),
                axis: Series::new("lambda", "dimensionless", scaled.search.iter().map(|s| s.0).collect()),
                columns: vec![Series::new("norm", "norm", scaled.search.iter().map(|s| s.1).collect())],
            });
            Ok(leg)
        },
        |_, _| Vec::new(),
    )
}

pub(super) fn scattering_extraction(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    two_resolutions(
        cfg,
        |cfg, level| {
            let grid = cfg.grid(level)?;
            let dt = fit_dt(cfg.dt, &grid);
            let u0 = cfg.initial_data(&grid);
            check_domain(&u0, cfg.t_end)?;
            let s_c = critical_exponent(cfg.p, DIM)?;
            let times: Vec<f64> = [0.125, 0.25, 0.5, 1.0].iter().map(|f| f * cfg.t_end).collect();
            let stride = (times[0] / dt).round() as usize;
            if stride == 0 || ((times[0] / dt) - stride as f64).abs() > 1e-6 {
                return Err(Error::Stride(format!("t_end / 8 = {} is not a multiple of dt = {dt}", times[0])));
            }
            let policy = StepPolicy::new(dt).with_snapshots(stride);
            let profiles = |equation: Equation| -> Result<Vec<(RadialField, RadialField)>> {
                let traj = simulate(&u0, equation, cfg.t_end, policy, &[])?;
                times
                    .iter()
                    .map(|&t| {
                        let snap = traj
                            .snapshots
                            .iter()
                            .find(|s| (s.t - t).abs() < 0.5 * dt)
                            .ok_or_else(|| Error::Stride(format!("no snapshot at t = {t}")))?;
                        Ok((snap.field.clone(), free_flow(&snap.field, -t)?))
                    })
                    .collect()
            };
            let (raw, states): (Vec<_>, Vec<_>) = profiles(Equation::defocusing(cfg.p))?.into_iter().unzip();
            let diffs: Vec<f64> =
                states.windows(2).map(|w| sobolev_norm(&w[1].sub(&w[0]), s_c)).collect::<Result<_>>()?;
            let worst_ratio = diffs.windows(2).map(|w| w[1] / w[0]).fold(f64::NEG_INFINITY, f64::max);

            let linear = profiles(Equation::linear(cfg.p))?;
            let drift = linear.iter().map(|(_, s)| s.sub(&u0).l2_norm() / u0.l2_norm()).fold(0.0, f64::max);

            let last = states.last().expect("four profiles");
            let u_end = raw.last().expect("four snapshots");
            let unitarity = relative_change(sobolev_norm(last, s_c)?, sobolev_norm(u_end, s_c)?);

            let mut leg = Leg { grid: Some(GridInfo { r_max: grid.r_max(), n: grid.n(), dt }), ..Leg::default() };
            leg.scalar("scattering_state_norm", sobolev_norm(last, s_c)?);
            leg.assert(Assertion::new("cauchy_decreasing", worst_ratio, Comparison::Below { limit: 1.0 }));
            leg.assert(Assertion::at_most("linear_constancy", drift, 1e-10));
            leg.assert(Assertion::at_most("unitarity", unitarity, 0.05));
            leg.tables.push(Table {
                name: "cauchy".into(),
                axis: Series::new("t", "time", times[1..].to_vec()),
                columns: vec![Series::new("difference", "norm", diffs)],
            });
            Ok(leg)
        },
        |_, _| Vec::new(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cauchy_proxy_integrates_power() {
        let records: Vec<PseudoconformalRecord> = (0..=1000)
            .map(|k| {
                let t = 1.0 + k as f64 * 1e-3;
                PseudoconformalRecord { t, e_pc: t * t, part_vector: 0.0, part_potential: 0.0, rhs: 0.0 }
            })
            .collect();
        let proxy = cauchy_proxy(&records);
        assert!((proxy_at(&proxy, 2.0) - 1.0).abs() < 1e-6);
    }
}
