//! Named, reproducible scenarios. Each runs at the configured resolution and
//! at twice as many radial points, and reports both.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{NormPair, StepPolicy};
use crate::grid::{RadialField, RadialGrid};

mod basic;
mod longtime;
mod scaling;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    FreeFlow,
    Conservation,
    Commutation,
    ScaleSweep,
    Monotonicity,
    DispersiveDecay,
    LocalBound,
    TwoBump,
    ScatteringExtraction,
    PolynomialSweep,
    Decomposition,
}

impl Scenario {
    pub const ALL: [Scenario; 11] = [
        Scenario::FreeFlow,
        Scenario::Conservation,
        Scenario::Commutation,
        Scenario::ScaleSweep,
        Scenario::Monotonicity,
        Scenario::DispersiveDecay,
        Scenario::LocalBound,
        Scenario::TwoBump,
        Scenario::ScatteringExtraction,
        Scenario::PolynomialSweep,
        Scenario::Decomposition,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::FreeFlow => "free_flow",
            Scenario::Conservation => "conservation",
            Scenario::Commutation => "commutation",
            Scenario::ScaleSweep => "scale_sweep",
            Scenario::Monotonicity => "monotonicity",
            Scenario::DispersiveDecay => "dispersive_decay",
            Scenario::LocalBound => "local_bound",
            Scenario::TwoBump => "two_bump",
            Scenario::ScatteringExtraction => "scattering_extraction",
            Scenario::PolynomialSweep => "polynomial_sweep",
            Scenario::Decomposition => "decomposition",
        }
    }

    pub fn names() -> Vec<&'static str> {
        Self::ALL.iter().map(|s| s.name()).collect()
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|sc| sc.name() == s).ok_or_else(|| {
            Error::Config(format!("unknown scenario '{s}'; valid scenarios: {}", Self::names().join(", ")))
        })
    }
}

/// Parameters of one experiment. Fields a scenario does not use are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub p: f64,
    pub r_max: f64,
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Amplitude of the unit Gaussian `c1 e^{-|x|^2/2}`.
    pub c1: f64,
    /// Amplitude of the narrow bump `c2 λ e^{-λ^2 |x|^2/2}`.
    pub c2: f64,
    /// Width parameter of the narrow bump, or the largest λ of a sweep.
    pub lambda: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub norm_pairs: Vec<NormPair>,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        let base = Self {
            scenario,
            p: 3.0,
            r_max: 64.0,
            n: 4096,
            dt: 1e-3,
            t_end: 4.0,
            c1: 1.0,
            c2: 0.0,
            lambda: 1.0,
            epsilon: 1e-2,
            delta: 0.1,
            norm_pairs: Vec::new(),
            seed: 7,
        };
        match scenario {
            Scenario::FreeFlow | Scenario::Conservation | Scenario::Commutation => base,
            Scenario::ScaleSweep => Self { r_max: 128.0, t_end: 2.5, lambda: 4.0, ..base },
            Scenario::Monotonicity => Self { p: 2.5, r_max: 128.0, dt: 5e-4, t_end: 8.0, ..base },
            Scenario::DispersiveDecay => Self { r_max: 1024.0, n: 8192, t_end: 100.0, ..base },
            Scenario::LocalBound => Self { n: 1024, dt: 2e-3, t_end: 1.0, ..base },
            Scenario::TwoBump => Self { r_max: 256.0, dt: 2.5e-4, t_end: 2.0, c1: 0.5, c2: 0.5, lambda: 8.0, ..base },
            Scenario::ScatteringExtraction => Self { r_max: 1024.0, dt: 0.01, t_end: 80.0, c1: 0.05, ..base },
            Scenario::PolynomialSweep => Self {
                p: 2.5,
                r_max: 1024.0,
                n: 8192,
                dt: 0.01,
                t_end: 50.0,
                c1: 0.5,
                norm_pairs: vec![NormPair::new(4.2, 3.5)],
                ..base
            },
            Scenario::Decomposition => Self { r_max: 32768.0, n: 65536, dt: 0.01, t_end: 1.0, ..base },
        }
    }

    /// Every invalid field as `(key, message)`.
    pub fn field_errors(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut check = |ok: bool, key: &'static str, msg: String| {
            if !ok {
                out.push((key, msg));
            }
        };
        check(self.p > 1.0 && self.p.is_finite(), "p", format!("p = {} must exceed 1", self.p));
        check(self.r_max > 0.0 && self.r_max.is_finite(), "r_max", format!("r_max = {} must be positive", self.r_max));
        check(self.n >= 2, "n", format!("n = {} must be at least 2", self.n));
        check(self.dt > 0.0 && self.dt.is_finite(), "dt", format!("dt = {} must be positive", self.dt));
        check(self.t_end > 0.0 && self.t_end.is_finite(), "t_end", format!("t_end = {} must be positive", self.t_end));
        check(self.c1.is_finite(), "c1", format!("c1 = {} must be finite", self.c1));
        check(self.c2.is_finite(), "c2", format!("c2 = {} must be finite", self.c2));
        check(
            self.lambda > 0.0 && self.lambda.is_finite(),
            "lambda",
            format!("lambda = {} must be positive", self.lambda),
        );
        check(
            self.epsilon > 0.0 && self.epsilon.is_finite(),
            "epsilon",
            format!("epsilon = {} must be positive", self.epsilon),
        );
        check(self.delta > 0.0 && self.delta < 1.0, "delta", format!("delta = {} must lie in (0, 1)", self.delta));
        for pair in &self.norm_pairs {
            check(
                pair.q_t >= 1.0 && pair.r_x >= 1.0,
                "norm_pairs",
                format!("norm pair ({}, {}) needs exponents >= 1", pair.q_t, pair.r_x),
            );
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((_, msg)) = self.field_errors().into_iter().next() {
            return Err(Error::Config(msg));
        }
        RadialGrid::new(self.r_max, self.n)?;
        Ok(())
    }

    /// The configured grid with `n` multiplied by `2^level`.
    pub fn grid(&self, level: u32) -> Result<RadialGrid> {
        RadialGrid::new(self.r_max, self.n << level)
    }

    /// `c1 e^{-r^2/2} + c2 λ e^{-λ^2 r^2/2}` on `grid`.
    pub fn initial_data(&self, grid: &RadialGrid) -> RadialField {
        let profile = self.profile();
        grid.sample(profile)
    }

    pub fn profile(&self) -> impl Fn(f64) -> f64 + Copy + Send + Sync {
        let (c1, c2, lambda) = (self.c1, self.c2, self.lambda);
        move |r: f64| c1 * (-r * r / 2.0).exp() + c2 * lambda * (-(lambda * r).powi(2) / 2.0).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub unit: String,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(name: &str, unit: &str, values: Vec<f64>) -> Self {
        Self { name: name.into(), unit: unit.into(), values }
    }
}

/// Columns sharing one axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub axis: Series,
    pub columns: Vec<Series>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Comparison {
    AtMost { limit: f64 },
    AtLeast { limit: f64 },
    Below { limit: f64 },
    Between { low: f64, high: f64 },
}

impl Comparison {
    pub fn holds(&self, x: f64) -> bool {
        match *self {
            Comparison::AtMost { limit } => x <= limit,
            Comparison::AtLeast { limit } => x >= limit,
            Comparison::Below { limit } => x < limit,
            Comparison::Between { low, high } => x >= low && x <= high,
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Comparison::AtMost { limit } => write!(f, "<= {limit:e}"),
            Comparison::AtLeast { limit } => write!(f, ">= {limit:e}"),
            Comparison::Below { limit } => write!(f, "< {limit:e}"),
            Comparison::Between { low, high } => write!(f, "in [{low:e}, {high:e}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub measured: f64,
    pub comparison: Comparison,
    pub passed: bool,
    /// Radial points of the leg that produced the value; `None` for cross-resolution checks.
    pub n: Option<usize>,
}

impl Assertion {
    pub fn new(name: &str, measured: f64, comparison: Comparison) -> Self {
        Self { name: name.into(), passed: comparison.holds(measured), measured, comparison, n: None }
    }

    pub fn at_most(name: &str, measured: f64, limit: f64) -> Self {
        Self::new(name, measured, Comparison::AtMost { limit })
    }

    pub fn at_least(name: &str, measured: f64, limit: f64) -> Self {
        Self::new(name, measured, Comparison::AtLeast { limit })
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        match self.n {
            Some(n) => write!(f, "{status} {} [n={n}]: {:.6e} {}", self.name, self.measured, self.comparison),
            None => write!(f, "{status} {}: {:.6e} {}", self.name, self.measured, self.comparison),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub r_max: f64,
    pub n: usize,
    pub dt: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Filled in by whoever owns the configuration text.
    pub config_hash: Option<String>,
    pub code_version: String,
    pub grids: Vec<GridInfo>,
    /// `|fine - coarse| / |fine|` for every scalar both legs report.
    pub convergence: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub scenario: Scenario,
    pub config: ExperimentConfig,
    /// Scalars of the finer leg.
    pub scalars: BTreeMap<String, f64>,
    pub tables: Vec<Table>,
    pub assertions: Vec<Assertion>,
    pub provenance: Provenance,
}

impl ExperimentResult {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    /// Every assertion with this name (one per leg, or a single cross check).
    pub fn assertions_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Assertion> + 'a {
        self.assertions.iter().filter(move |a| a.name == name)
    }

    /// Worst-case view of an assertion across legs: all legs must pass.
    pub fn check(&self, name: &str) -> Option<(bool, f64)> {
        let mut found = None;
        for a in self.assertions_named(name) {
            let (ok, worst) = found.unwrap_or((true, a.measured));
            let worse = match a.comparison {
                Comparison::AtLeast { .. } => a.measured.min(worst),
                Comparison::Between { low, high } => {
                    let mid = 0.5 * (low + high);
                    if (a.measured - mid).abs() > (worst - mid).abs() {
                        a.measured
                    } else {
                        worst
                    }
                }
                _ => a.measured.max(worst),
            };
            found = Some((ok && a.passed, worse));
        }
        found
    }
}

/// Everything one resolution produced.
#[derive(Clone, Debug, Default)]
pub(crate) struct Leg {
    pub grid: Option<GridInfo>,
    pub scalars: BTreeMap<String, f64>,
    pub tables: Vec<Table>,
    pub assertions: Vec<Assertion>,
}

impl Leg {
    pub fn scalar(&mut self, name: &str, value: f64) {
        self.scalars.insert(name.into(), value);
    }

    pub fn assert(&mut self, a: Assertion) {
        self.assertions.push(a);
    }
}

/// Run `leg` at `n` and `2n` and merge. `cross` adds checks comparing the two.
pub(crate) fn two_resolutions(
    cfg: &ExperimentConfig,
    leg: impl Fn(&ExperimentConfig, u32) -> Result<Leg> + Sync,
    cross: impl FnOnce(&Leg, &Leg) -> Vec<Assertion>,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    let (coarse, fine) = rayon::join(|| leg(cfg, 0), || leg(cfg, 1));
    let (coarse, fine) = (coarse?, fine?);
    let mut assertions = Vec::new();
    for (l, level) in [(&coarse, 0), (&fine, 1)] {
        for a in &l.assertions {
            assertions.push(Assertion { n: Some(cfg.n << level), ..a.clone() });
        }
    }
    assertions.extend(cross(&coarse, &fine));
    let convergence = fine
        .scalars
        .iter()
        .filter_map(|(k, f)| {
            let c = coarse.scalars.get(k)?;
            let scale = f.abs().max(f64::MIN_POSITIVE);
            Some((k.clone(), (f - c).abs() / scale))
        })
        .collect();
    let mut tables = fine.tables.clone();
    for t in &coarse.tables {
        tables.push(Table { name: format!("{}_coarse", t.name), ..t.clone() });
    }
    Ok(ExperimentResult {
        scenario: cfg.scenario,
        config: cfg.clone(),
        scalars: fine.scalars.clone(),
        tables,
        assertions,
        provenance: Provenance {
            config_hash: None,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            grids: [coarse.grid, fine.grid].into_iter().flatten().collect(),
            convergence,
        },
    })
}

/// Largest `dt / 2^k` meeting the phase guard on `grid`.
pub fn fit_dt(dt: f64, grid: &RadialGrid) -> f64 {
    let mut dt = dt;
    while StepPolicy::new(dt).check_phase_guard(grid).is_err() {
        dt /= 2.0;
    }
    dt
}

/// `max / min - 1` of positive values, infinite when the minimum is not positive.
pub fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min - 1.0
    } else {
        f64::INFINITY
    }
}

pub(crate) fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    match cfg.scenario {
        Scenario::FreeFlow => basic::free_flow(cfg),
        Scenario::Conservation => basic::conservation(cfg),
        Scenario::Commutation => basic::commutation(cfg),
        Scenario::Decomposition => basic::decomposition(cfg),
        Scenario::ScaleSweep => scaling::scale_sweep(cfg),
        Scenario::TwoBump => scaling::two_bump(cfg),
        Scenario::PolynomialSweep => scaling::polynomial_sweep(cfg),
        Scenario::Monotonicity => longtime::monotonicity(cfg),
        Scenario::DispersiveDecay => longtime::dispersive_decay(cfg),
        Scenario::LocalBound => longtime::local_bound(cfg),
        Scenario::ScatteringExtraction => longtime::scattering_extraction(cfg),
    }
}
