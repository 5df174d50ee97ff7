//! Littlewood-Paley pieces, homogeneous Besov and Sobolev norms, and the
//! core/tail cutoff radius.
//!
//! The dyadic multipliers are `phi_j(rho) = eta(rho / 2^j) - eta(rho / 2^{j-1})`
//! with the smooth step `eta(s) = g(2 - s) / (g(2 - s) + g(s - 1))`,
//! `g(t) = exp(-1/t)` for `t > 0`. `eta` equals one on `s <= 1` and vanishes on
//! `s >= 2`, so `phi_j` lives on `[2^{j-1}, 2^{j+1}]` and the pieces telescope.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{from_frequency, radial_integral_unchecked, to_frequency, RadialField, RadialGrid};

/// Spatial dimension handled by the radial transform.
pub const DIM: f64 = 3.0;

/// Largest share of the Besov sum the four edge shells may carry.
pub const TRUNCATION_TOL: f64 = 0.01;

/// `s_c = d/2 - 2/(p-1)`.
pub fn critical_exponent(p: f64, d: f64) -> Result<f64> {
    if !(p > 1.0) || !(d >= 3.0) {
        return Err(Error::Config(format!("critical exponent needs p > 1 and d >= 3 (got p = {p}, d = {d})")));
    }
    Ok(d / 2.0 - 2.0 / (p - 1.0))
}

/// Besov regularity `d/2 + s_c` at which `B^s_{1,1}` is scale invariant.
pub fn critical_besov_regularity(p: f64) -> Result<f64> {
    Ok(DIM / 2.0 + critical_exponent(p, DIM)?)
}

fn g(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth nonincreasing step: one on `s <= 1`, zero on `s >= 2`.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let a = g(2.0 - s);
        a / (a + g(s - 1.0))
    }
}

/// Radial bump `chi(x) = eta(|x|)`: one on `|x| <= 1`, supported in `|x| <= 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile;

impl CutoffProfile {
    pub fn value(&self, x: f64) -> f64 {
        smooth_step(x.abs())
    }

    /// `1 - chi(r / R)`, with the `R = 0` convention that the cutoff is identically one.
    pub fn complement(&self, r: f64, radius: f64) -> f64 {
        if radius == 0.0 {
            0.0
        } else {
            1.0 - self.value(r / radius)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicPartition {
    pub j_min: i32,
    pub j_max: i32,
}

impl DyadicPartition {
    pub fn new(j_min: i32, j_max: i32) -> Result<Self> {
        if j_min > j_max {
            return Err(Error::Config(format!("empty dyadic range [{j_min}, {j_max}]")));
        }
        Ok(Self { j_min, j_max })
    }

    /// `j_min = ceil(log2(2 pi / r_max))`, `j_max = floor(log2(rho_max / 2))`.
    pub fn for_grid(grid: &RadialGrid) -> Self {
        let j_min = (2.0 * std::f64::consts::PI / grid.r_max()).log2().ceil() as i32;
        let j_max = (grid.rho_max() / 2.0).log2().floor() as i32;
        Self { j_min, j_max }
    }

    pub fn contains(&self, j: i32) -> bool {
        (self.j_min..=self.j_max).contains(&j)
    }

    pub fn shells(&self) -> impl Iterator<Item = i32> + Clone {
        self.j_min..=self.j_max
    }

    pub fn phi(&self, j: i32, rho: f64) -> f64 {
        let scale = 2f64.powi(j);
        smooth_step(rho / scale) - smooth_step(2.0 * rho / scale)
    }

    fn check(&self, j: i32) -> Result<()> {
        if self.contains(j) {
            Ok(())
        } else {
            Err(Error::Range { j, j_min: self.j_min, j_max: self.j_max })
        }
    }
}

/// `P_j u` with the partition adapted to `u`'s grid.
pub fn project(u: &RadialField, j: i32) -> Result<RadialField> {
    let partition = DyadicPartition::for_grid(u.grid());
    partition.check(j)?;
    let spectrum = to_frequency(u).map(|rho, v| partition.phi(j, rho) * v);
    Ok(from_frequency(&spectrum))
}

/// All pieces `P_j u`, `j_min <= j <= j_max`, sharing one forward transform.
pub fn dyadic_pieces(u: &RadialField) -> Vec<(i32, RadialField)> {
    let partition = DyadicPartition::for_grid(u.grid());
    let spectrum = to_frequency(u);
    partition
        .shells()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|j| {
            let piece = spectrum.map(|rho, v| partition.phi(j, rho) * v);
            (j, from_frequency(&piece))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovReport {
    pub regularity: f64,
    pub total: f64,
    /// `(j, 2^{js} ||P_j u||_{L^1})` per shell.
    pub shells: Vec<(i32, f64)>,
    /// Share of `total` carried by the two lowest and two highest shells.
    pub edge_fraction: f64,
}

/// `sum_j 2^{js} ||P_j u||_{L^1}` over the grid's dyadic range, with per-shell terms.
pub fn besov_report(u: &RadialField, s: f64) -> BesovReport {
    let partition = DyadicPartition::for_grid(u.grid());
    let shells: Vec<(i32, f64)> = dyadic_pieces(u)
        .into_iter()
        .map(|(j, piece)| (j, 2f64.powf(j as f64 * s) * radial_integral_unchecked(&piece, 1.0, 0.0)))
        .collect();
    let total: f64 = shells.iter().map(|(_, c)| c).sum();
    let edge: f64 =
        shells.iter().filter(|(j, _)| *j <= partition.j_min + 1 || *j >= partition.j_max - 1).map(|(_, c)| c).sum();
    let edge_fraction = if total == 0.0 { 0.0 } else { edge / total };
    BesovReport { regularity: s, total, shells, edge_fraction }
}

/// `B^s_{1,1}` norm; fails when the edge shells carry more than [`TRUNCATION_TOL`].
pub fn besov_norm(u: &RadialField, s: f64) -> Result<f64> {
    let report = besov_report(u, s);
    if report.edge_fraction > TRUNCATION_TOL {
        return Err(Error::Truncation { fraction: report.edge_fraction, tol: TRUNCATION_TOL });
    }
    Ok(report.total)
}

/// Homogeneous `H^s` norm via Parseval, `0 <= s <= 2`.
pub fn sobolev_norm(u: &RadialField, s: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&s) {
        return Err(Error::Config(format!("Sobolev regularity {s} outside [0, 2]")));
    }
    Ok(to_frequency(u).weighted_energy(s).sqrt())
}

/// The two tail sums controlling the cutoff:
/// `sum_j 2^{j s_c} ||(1 - chi(x/R)) P_j u||_{L^2}` and
/// `sum_j 2^{j (d/2 + s_c)} ||(1 - chi(x/R)) P_j u||_{L^1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailSums {
    pub l2: f64,
    pub l1: f64,
}

impl TailSums {
    pub fn within(&self, eps: f64) -> bool {
        self.l2 <= eps && self.l1 <= eps
    }
}

/// Precomputed dyadic pieces of a datum, reused across candidate radii.
pub struct TailEvaluator {
    grid: RadialGrid,
    s_c: f64,
    pieces: Vec<(i32, RadialField)>,
    chi: CutoffProfile,
}

impl TailEvaluator {
    pub fn new(u0: &RadialField, p: f64, chi: CutoffProfile) -> Result<Self> {
        Ok(Self { grid: *u0.grid(), s_c: critical_exponent(p, DIM)?, pieces: dyadic_pieces(u0), chi })
    }

    /// Sums with `chi(x / 0) := 0` off the origin, i.e. the full weighted sums.
    pub fn sums_without_cutoff(&self) -> TailSums {
        self.sums_with(|_| 1.0)
    }

    pub fn sums_at(&self, radius: f64) -> TailSums {
        if radius == 0.0 {
            return self.sums_without_cutoff();
        }
        self.sums_with(|r| 1.0 - self.chi.value(r / radius))
    }

    fn sums_with(&self, weight: impl Fn(f64) -> f64 + Sync) -> TailSums {
        let s_hi = DIM / 2.0 + self.s_c;
        let terms: Vec<(f64, f64)> = self
            .pieces
            .par_iter()
            .map(|(j, piece)| {
                let cut = piece.map(|r, v| weight(r) * v);
                let jf = *j as f64;
                (
                    2f64.powf(jf * self.s_c) * radial_integral_unchecked(&cut, 2.0, 0.0).sqrt(),
                    2f64.powf(jf * s_hi) * radial_integral_unchecked(&cut, 1.0, 0.0),
                )
            })
            .collect();
        TailSums { l2: terms.iter().map(|t| t.0).sum(), l1: terms.iter().map(|t| t.1).sum() }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCut {
    pub radius: f64,
    pub sums: TailSums,
}

/// Smallest grid-aligned `R <= r_max / 4` whose tail sums are both `<= eps`.
///
/// `R = 0` is returned when the full sums are already below `eps`.
pub fn tail_radius(u0: &RadialField, eps: f64, p: f64, chi: CutoffProfile) -> Result<TailCut> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("tail smallness eps = {eps} must be positive")));
    }
    u0.check_boundary(crate::grid::DEFAULT_BOUNDARY_TOL)?;
    let eval = TailEvaluator::new(u0, p, chi)?;
    tail_radius_with(&eval, eps)
}

pub fn tail_radius_with(eval: &TailEvaluator, eps: f64) -> Result<TailCut> {
    let grid = eval.grid();
    let radius_of = |k: usize| k as f64 * grid.dr();
    let at_zero = eval.sums_at(0.0);
    if at_zero.within(eps) {
        return Ok(TailCut { radius: 0.0, sums: at_zero });
    }
    let k_max = grid.n() / 4;
    let top = eval.sums_at(radius_of(k_max));
    if !top.within(eps) {
        return Err(Error::DomainTooSmall { eps, r_limit: radius_of(k_max) });
    }
    // both sums are nonincreasing in R, so bisect on the grid index
    let (mut lo, mut hi, mut best) = (0usize, k_max, top);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        let sums = eval.sums_at(radius_of(mid));
        if sums.within(eps) {
            hi = mid;
            best = sums;
        } else {
            lo = mid;
        }
    }
    Ok(TailCut { radius: radius_of(hi), sums: best })
}
