use std::f64::consts::PI;

use nls_core::decomposition::split_data;
use nls_core::diagnostics::{mass, momentum, morawetz_rhs, spacetime_norm};
use nls_core::evolution::{free_flow, simulate, Equation, NormPair, StepPolicy};
use nls_core::grid::{apply_multiplier, from_frequency, radial_integral, to_frequency};
use nls_core::littlewood_paley::{besov_norm, besov_report, tail_radius, CutoffProfile, DyadicPartition};
use nls_core::{RadialField, RadialGrid};
use num_complex::Complex64;
use proptest::prelude::*;

#[derive(Clone, Debug)]
struct Bump {
    amp: f64,
    width: f64,
    centre: f64,
    phase: f64,
    chirp: f64,
}

fn bump() -> impl Strategy<Value = Bump> {
    (0.1..2.0f64, 0.6..3.0f64, 0.0..6.0f64, 0.0..(2.0 * PI), -0.5..0.5f64)
        .prop_map(|(amp, width, centre, phase, chirp)| Bump { amp, width, centre, phase, chirp })
}

fn bumps() -> impl Strategy<Value = Vec<Bump>> {
    prop::collection::vec(bump(), 1..4)
}

fn field(grid: &RadialGrid, bumps: &[Bump]) -> RadialField {
    grid.sample(|r| {
        bumps
            .iter()
            .map(|b| {
                let x = (r - b.centre) / b.width;
                Complex64::from_polar(b.amp * (-x * x / 2.0).exp(), b.phase + b.chirp * r * r)
            })
            .sum::<Complex64>()
    })
}

fn max_diff(a: &RadialField, b: &RadialField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval(bs in bumps()) {
        let u = field(&RadialGrid::new(64.0, 1024).unwrap(), &bs);
        let space = radial_integral(&u, 2.0, 0.0).unwrap();
        let freq = to_frequency(&u).weighted_energy(0.0);
        prop_assert!(rel(space, freq) <= 1e-10, "{space} vs {freq}");
    }

    #[test]
    fn transform_round_trip(bs in bumps()) {
        let u = field(&RadialGrid::new(64.0, 1024).unwrap(), &bs);
        let back = from_frequency(&to_frequency(&u));
        prop_assert!(max_diff(&u, &back) <= 1e-12 * u.sup_norm());
    }

    #[test]
    fn radial_integral_is_homogeneous(bs in bumps(), q in 1.0..8.0f64, c in 0.05..20.0f64, alpha in 0.0..2.0f64) {
        let u = field(&RadialGrid::new(64.0, 1024).unwrap(), &bs);
        let base = radial_integral(&u, q, alpha).unwrap();
        let scaled = radial_integral(&u.scale(Complex64::from_polar(c, 0.7)), q, alpha).unwrap();
        prop_assert!(rel(scaled, c.powf(q) * base) <= 1e-12);
    }

    #[test]
    fn radial_integral_is_monotone(bs in bumps(), q in 1.0..8.0f64, shrink in 0.0..1.0f64) {
        let u = field(&RadialGrid::new(64.0, 1024).unwrap(), &bs);
        let smaller = u.map(|r, v| v * (shrink + (1.0 - shrink) * (-r).exp()));
        prop_assert!(radial_integral(&smaller, q, 0.0).unwrap() <= radial_integral(&u, q, 0.0).unwrap());
    }

    #[test]
    fn multipliers_compose(bs in bumps(), a in 0.1..3.0f64, b in 0.1..3.0f64) {
        let u = field(&RadialGrid::new(64.0, 1024).unwrap(), &bs);
        let m1 = |rho: f64| Complex64::from_polar(1.0 / (1.0 + a * rho * rho), b * rho);
        let m2 = |rho: f64| (-(rho / (4.0 * b)).powi(2)).exp();
        let twice = apply_multiplier(&apply_multiplier(&u, m1), m2);
        let once = apply_multiplier(&u, |rho| m1(rho) * m2(rho));
        prop_assert!(max_diff(&twice, &once) <= 1e-12 * once.sup_norm().max(u.sup_norm()));
    }

    #[test]
    fn besov_norm_is_absolutely_homogeneous(bs in bumps(), c in 0.05..20.0f64, theta in 0.0..(2.0 * PI), s in 0.0..2.0f64) {
        let u = field(&RadialGrid::new(64.0, 1024).unwrap(), &bs);
        let base = besov_report(&u, s);
        let scaled = besov_report(&u.scale(Complex64::from_polar(c, theta)), s);
        prop_assert!(rel(scaled.total, c * base.total) <= 1e-12);
        prop_assert!((scaled.edge_fraction - base.edge_fraction).abs() <= 1e-12);
        if let Ok(norm) = besov_norm(&u, s) {
            prop_assert!(rel(besov_norm(&u.scale(c), s).unwrap(), c * norm) <= 1e-12);
        }
    }

    #[test]
    fn partition_sums_to_one(log_rho in 0.0..1.0f64) {
        let grid = RadialGrid::new(64.0, 4096).unwrap();
        let part = DyadicPartition::for_grid(&grid);
        let (lo, hi) = (f64::from(part.j_min + 1), f64::from(part.j_max - 1));
        let rho = 2f64.powf(lo + log_rho * (hi - lo));
        let total: f64 = part.shells().map(|j| part.phi(j, rho)).sum();
        prop_assert!((total - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn morawetz_rhs_ignores_conjugation(bs in bumps()) {
        let u = field(&RadialGrid::new(64.0, 1024).unwrap(), &bs);
        prop_assert!(rel(morawetz_rhs(&u).unwrap(), morawetz_rhs(&u.conj()).unwrap()) <= 1e-12);
    }

    #[test]
    fn free_flow_is_a_group(bs in bumps(), t1 in -0.5..0.5f64, t2 in -0.5..0.5f64) {
        let u = field(&RadialGrid::new(64.0, 1024).unwrap(), &bs);
        let stepped = free_flow(&free_flow(&u, t1).unwrap(), t2).unwrap();
        let direct = free_flow(&u, t1 + t2).unwrap();
        prop_assert!(max_diff(&stepped, &direct) <= 1e-10 * u.sup_norm());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mass_conserved_and_momentum_vanishes(bs in bumps(), p in 2.4..3.0f64) {
        let u0 = field(&RadialGrid::new(32.0, 512).unwrap(), &bs);
        let policy = StepPolicy::new(2e-3).with_snapshots(25);
        let traj = simulate(&u0, Equation::defocusing(p), 0.2, policy, &[]).unwrap();
        prop_assert!(traj.mass_drift() <= 1e-10);
        for snap in &traj.snapshots {
            let m = momentum(&snap.field).unwrap();
            prop_assert!(m.iter().all(|c| c.abs() <= 1e-12 * mass(&u0).unwrap().max(1.0)));
        }
    }

    #[test]
    fn conjugation_reverses_time(bs in bumps(), p in 2.4..3.0f64) {
        let u0 = field(&RadialGrid::new(32.0, 512).unwrap(), &bs);
        let eq = Equation::defocusing(p);
        let backward = simulate(&u0, eq, -0.1, StepPolicy::new(-2e-3), &[]).unwrap();
        let mirrored = simulate(&u0.conj(), eq, 0.1, StepPolicy::new(2e-3), &[]).unwrap();
        let expected = backward.last().conj();
        prop_assert!(max_diff(mirrored.last(), &expected) <= 1e-8 * u0.sup_norm());
    }

    #[test]
    fn spacetime_norm_is_monotone_and_subadditive(bs in bumps(), split in 0.2..0.8f64) {
        let u0 = field(&RadialGrid::new(32.0, 512).unwrap(), &bs);
        let pair = NormPair::new(8.0, 4.0);
        let traj = simulate(&u0, Equation::defocusing(3.0), 0.4, StepPolicy::new(2e-3), &[pair]).unwrap();
        let mid = (split * 0.4 / 4e-3).round() * 4e-3;
        let left = spacetime_norm(&traj, &pair, (0.0, mid)).unwrap();
        let right = spacetime_norm(&traj, &pair, (mid, 0.4)).unwrap();
        let whole = spacetime_norm(&traj, &pair, (0.0, 0.4)).unwrap();
        prop_assert!(left <= whole * (1.0 + 1e-12) && right <= whole * (1.0 + 1e-12));
        let q = pair.q_t;
        prop_assert!(whole.powf(q) <= (left.powf(q) + right.powf(q)) * (1.0 + 1e-6));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn tail_radius_grows_as_epsilon_shrinks(amp in 0.2..2.0f64, e1 in -3.0..-1.0f64, shrink in 0.1..0.9f64) {
        let grid = RadialGrid::new(512.0, 8192).unwrap();
        let u = grid.sample(|r| amp / (1.0 + r * r).powi(3));
        let eps = 10f64.powf(e1);
        let (Ok(loose), Ok(tight)) =
            (tail_radius(&u, eps, 3.0, CutoffProfile), tail_radius(&u, shrink * eps, 3.0, CutoffProfile))
        else {
            return Err(TestCaseError::reject("epsilon below what the grid resolves"));
        };
        prop_assert!(tight.radius >= loose.radius);

        let (a, b) = (
            split_data(&u, eps, 3.0, CutoffProfile).unwrap(),
            split_data(&u, shrink * eps, 3.0, CutoffProfile).unwrap(),
        );
        for (i, r) in grid.radii().into_iter().enumerate() {
            if r >= 2.0 * b.radius {
                prop_assert!(b.tail.values()[i].norm() <= a.tail.values()[i].norm());
            }
        }
    }
}
