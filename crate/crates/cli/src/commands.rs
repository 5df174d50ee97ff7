use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use nls_core::diagnostics::{norm_report, spacetime_norm};
use nls_core::evolution::checkpoint::Checkpoint;
use nls_core::evolution::{Equation, NormPair, Simulator, StepPolicy, Trajectory};
use nls_core::experiments::{self, Assertion, ExperimentConfig, GridInfo, Scenario, Series, Table};
use serde::{Deserialize, Serialize};

use crate::config::{default_config, parse_config, sha256_hex, LoadedConfig};
use crate::emit::{json_bytes, Emitter, Format};
use crate::error::CliError;

/// Record of one invocation, written last as `manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub scenario: Option<String>,
    pub r_max: f64,
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub grids: Vec<GridInfo>,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub passed: bool,
    pub assertions_total: usize,
    pub assertions_failed: usize,
    pub artifacts: Vec<String>,
}

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug)]
pub struct Outcome {
    pub passed: bool,
    pub dir: Option<PathBuf>,
    pub artifacts: Vec<String>,
}

/// Output of `simulate` and `checkpoint resume`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub config: Option<ExperimentConfig>,
    pub config_hash: String,
    pub scalars: BTreeMap<String, f64>,
    pub tables: Vec<Table>,
}

struct Clock {
    start: Instant,
    unix: u64,
}

impl Clock {
    fn start() -> Self {
        let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self { start: Instant::now(), unix }
    }
}

fn load(config: Option<&Path>, fallback: Scenario) -> Result<LoadedConfig, CliError> {
    match config {
        Some(path) => parse_config(path),
        None => Ok(default_config(fallback)),
    }
}

fn pair_label(pair: &NormPair) -> String {
    let prefix = if pair.gradient { "grad_" } else { "" };
    format!("{prefix}q{}_r{}", pair.q_t, pair.r_x)
}

fn trajectory_tables(traj: &Trajectory) -> Result<(Vec<Table>, BTreeMap<String, f64>), CliError> {
    let mut scalars = BTreeMap::new();
    scalars.insert("mass_drift".to_string(), traj.mass_drift());
    scalars.insert("energy_drift".to_string(), traj.energy_drift());
    let t_end = traj.sample_times.last().copied().unwrap_or(0.0);
    let mut tables = vec![Table {
        name: "conservation".into(),
        axis: Series::new("t", "time", traj.log.iter().map(|e| e.t).collect()),
        columns: vec![
            Series::new("mass", "mass", traj.log.iter().map(|e| e.mass).collect()),
            Series::new("energy", "energy", traj.log.iter().map(|e| e.energy).collect()),
        ],
    }];
    if !traj.norms.is_empty() {
        let mut columns = Vec::new();
        for s in &traj.norms {
            columns.push(Series::new(&pair_label(&s.pair), "norm", s.values.clone()));
            scalars.insert(format!("size_{}", pair_label(&s.pair)), spacetime_norm(traj, &s.pair, (0.0, t_end))?);
        }
        tables.push(Table { name: "norms".into(), axis: Series::new("t", "time", traj.sample_times.clone()), columns });
    }
    Ok((tables, scalars))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    mut out: Emitter,
    command: &str,
    hash: String,
    cfg: Option<&ExperimentConfig>,
    grids: Vec<GridInfo>,
    assertions: &[Assertion],
    clock: Clock,
) -> Result<Outcome, CliError> {
    let failed = assertions.iter().filter(|a| !a.passed).count();
    let first = grids.first().cloned();
    let mut manifest = RunManifest {
        command: command.to_string(),
        config_hash: hash,
        scenario: cfg.map(|c| c.scenario.name().to_string()),
        r_max: cfg.map(|c| c.r_max).or(first.as_ref().map(|g| g.r_max)).unwrap_or(0.0),
        n: cfg.map(|c| c.n).or(first.as_ref().map(|g| g.n)).unwrap_or(0),
        dt: cfg.map(|c| c.dt).or(first.as_ref().map(|g| g.dt)).unwrap_or(0.0),
        t_end: cfg.map(|c| c.t_end).unwrap_or(0.0),
        grids,
        started_unix: clock.unix,
        wall_clock_seconds: clock.start.elapsed().as_secs_f64(),
        passed: failed == 0,
        assertions_total: assertions.len(),
        assertions_failed: failed,
        artifacts: Vec::new(),
    };
    manifest.artifacts = out.artifacts.clone();
    manifest.artifacts.push(MANIFEST.to_string());
    out.write(MANIFEST, &json_bytes(&manifest))?;
    Ok(Outcome { passed: failed == 0, dir: Some(out.dir().to_path_buf()), artifacts: out.artifacts })
}

pub fn experiment(name: &str, config: Option<&Path>, dir: &Path, format: Format) -> Result<Outcome, CliError> {
    let clock = Clock::start();
    let scenario: Scenario = name.parse()?;
    let loaded = load(config, scenario)?;
    if loaded.config.scenario != scenario {
        return Err(CliError::Parse {
            line: 0,
            message: format!("config describes scenario '{}', not '{name}'", loaded.config.scenario),
        });
    }
    let mut result = experiments::run(&loaded.config)?;
    result.provenance.config_hash = Some(loaded.hash.clone());
    let mut out = Emitter::new(dir)?;
    out.emit(format, name, &result, &result.tables, &result.scalars, &result.assertions)?;
    for a in &result.assertions {
        eprintln!("{a}");
    }
    let grids = result.provenance.grids.clone();
    finish(out, &format!("experiment {name}"), loaded.hash, Some(&loaded.config), grids, &result.assertions, clock)
}

pub fn simulate(config: &Path, dir: &Path, format: Format, log_stride: usize) -> Result<Outcome, CliError> {
    let clock = Clock::start();
    let loaded = parse_config(config)?;
    let cfg = &loaded.config;
    let grid = cfg.grid(0)?;
    let u0 = cfg.initial_data(&grid);
    let policy = StepPolicy::new(cfg.dt).with_log(log_stride);
    let mut sim = Simulator::new(&u0, Equation::defocusing(cfg.p), policy, &cfg.norm_pairs)?;
    sim.advance(cfg.t_end)?;
    let traj = sim.finish()?;
    let (tables, scalars) = trajectory_tables(&traj)?;
    let report = TrajectoryReport { config: Some(cfg.clone()), config_hash: loaded.hash.clone(), scalars, tables };
    let mut out = Emitter::new(dir)?;
    out.emit(format, "simulation", &report, &report.tables, &report.scalars, &[])?;
    let grids = vec![GridInfo { r_max: grid.r_max(), n: grid.n(), dt: cfg.dt }];
    finish(out, "simulate", loaded.hash, Some(cfg), grids, &[], clock)
}

pub fn norms(config: Option<&Path>, scenario: Scenario, dir: Option<&Path>) -> Result<(String, Outcome), CliError> {
    let clock = Clock::start();
    let loaded = load(config, scenario)?;
    let cfg = &loaded.config;
    let grid = cfg.grid(0)?;
    let report = norm_report(&cfg.initial_data(&grid), cfg.p)?;
    let text = String::from_utf8(json_bytes(&report)).expect("json is UTF-8");
    let outcome = match dir {
        Some(dir) => {
            let mut out = Emitter::new(dir)?;
            out.write("norms.json", text.as_bytes())?;
            let grids = vec![GridInfo { r_max: grid.r_max(), n: grid.n(), dt: 0.0 }];
            finish(out, "norms", loaded.hash, Some(cfg), grids, &[], clock)?
        }
        None => Outcome { passed: true, dir: None, artifacts: Vec::new() },
    };
    Ok((text, outcome))
}

pub fn checkpoint_save(config: &Path, at: f64, path: &Path, log_stride: usize) -> Result<Checkpoint, CliError> {
    let loaded = parse_config(config)?;
    let cfg = &loaded.config;
    let u0 = cfg.initial_data(&cfg.grid(0)?);
    let policy = StepPolicy::new(cfg.dt).with_log(log_stride);
    let mut sim = Simulator::new(&u0, Equation::defocusing(cfg.p), policy, &cfg.norm_pairs)?;
    sim.advance(at)?;
    let ckpt = sim.checkpoint();
    ckpt.save(path).map_err(|e| match e {
        nls_core::Error::Io(source) => CliError::Io { path: path.to_path_buf(), source },
        other => other.into(),
    })?;
    Ok(ckpt)
}

pub fn checkpoint_resume(
    path: &Path,
    t_end: f64,
    dir: &Path,
    format: Format,
    save: Option<&Path>,
) -> Result<Outcome, CliError> {
    let clock = Clock::start();
    let bytes = std::fs::read(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
    let hash = sha256_hex(&bytes);
    let ckpt = Checkpoint::from_bytes(&bytes)?;
    let grid = *ckpt.field.grid();
    let dt = ckpt.policy.dt;
    let mut sim = Simulator::resume(ckpt)?;
    sim.advance(t_end)?;
    let mut out = Emitter::new(dir)?;
    if let Some(save) = save {
        sim.checkpoint().save(save)?;
    }
    let traj = sim.finish()?;
    let (tables, scalars) = trajectory_tables(&traj)?;
    let report = TrajectoryReport { config: None, config_hash: hash.clone(), scalars, tables };
    out.emit(format, "simulation", &report, &report.tables, &report.scalars, &[])?;
    let grids = vec![GridInfo { r_max: grid.r_max(), n: grid.n(), dt }];
    finish(out, "checkpoint resume", hash, None, grids, &[], clock)
}
