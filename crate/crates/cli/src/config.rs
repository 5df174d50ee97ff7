//! TOML experiment configuration.
//!
//! Only `scenario` is required; every other key falls back to the scenario's
//! defaults. Unknown keys, type mismatches and out-of-range values are
//! reported with the line they occur on.

use std::ops::Range;
use std::path::Path;

use nls_core::evolution::NormPair;
use nls_core::experiments::{ExperimentConfig, Scenario};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::error::CliError;

pub const KEYS: [&str; 13] =
    ["scenario", "p", "r_max", "n", "dt", "t_end", "c1", "c2", "lambda", "epsilon", "delta", "norm_pairs", "seed"];

#[derive(Deserialize)]
#[serde(untagged)]
enum PairSpec {
    Short([f64; 2]),
    Full {
        q_t: f64,
        r_x: f64,
        #[serde(default)]
        gradient: bool,
    },
}

impl From<PairSpec> for NormPair {
    fn from(spec: PairSpec) -> Self {
        match spec {
            PairSpec::Short([q, r]) => NormPair::new(q, r),
            PairSpec::Full { q_t, r_x, gradient } => NormPair { q_t, r_x, gradient },
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Spanned<String>,
    p: Option<Spanned<f64>>,
    r_max: Option<Spanned<f64>>,
    n: Option<Spanned<usize>>,
    dt: Option<Spanned<f64>>,
    t_end: Option<Spanned<f64>>,
    c1: Option<Spanned<f64>>,
    c2: Option<Spanned<f64>>,
    lambda: Option<Spanned<f64>>,
    epsilon: Option<Spanned<f64>>,
    delta: Option<Spanned<f64>>,
    norm_pairs: Option<Spanned<Vec<PairSpec>>>,
    seed: Option<Spanned<u64>>,
}

/// A parsed configuration together with the text it came from.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub hash: String,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
        CliError::Parse { line, message: e.message().to_string() }
    })?;
    let at = |span: Range<usize>| line_of(text, span.start);

    let scenario_line = at(raw.scenario.span());
    let scenario: Scenario = raw
        .scenario
        .get_ref()
        .parse()
        .map_err(|e: nls_core::Error| CliError::Parse { line: scenario_line, message: e.to_string() })?;
    let mut cfg = ExperimentConfig::defaults(scenario);
    let mut lines: Vec<(&'static str, usize)> = vec![("scenario", scenario_line)];

    macro_rules! take {
        ($($key:ident),*) => {$(
            if let Some(v) = raw.$key {
                lines.push((stringify!($key), at(v.span())));
                cfg.$key = v.into_inner();
            }
        )*};
    }
    take!(p, r_max, n, dt, t_end, c1, c2, lambda, epsilon, delta, seed);
    if let Some(v) = raw.norm_pairs {
        lines.push(("norm_pairs", at(v.span())));
        cfg.norm_pairs = v.into_inner().into_iter().map(NormPair::from).collect();
    }

    if let Some((key, message)) = cfg.field_errors().into_iter().next() {
        let line = lines.iter().find(|(k, _)| *k == key).map(|(_, l)| *l).unwrap_or(0);
        return Err(CliError::Range { key: key.to_string(), line, message });
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
    let text =
        String::from_utf8(bytes).map_err(|_| CliError::Parse { line: 0, message: "config is not UTF-8".into() })?;
    Ok(LoadedConfig { config: parse_config_str(&text)?, hash: sha256_hex(text.as_bytes()) })
}

#[derive(Serialize)]
struct CanonicalConfig<'a> {
    scenario: &'a str,
    p: f64,
    r_max: f64,
    n: usize,
    dt: f64,
    t_end: f64,
    c1: f64,
    c2: f64,
    lambda: f64,
    epsilon: f64,
    delta: f64,
    norm_pairs: Vec<[f64; 2]>,
    seed: u64,
}

/// TOML text that parses back to `cfg`. Gradient pairs are not representable
/// in the short form and are written as tables instead.
pub fn to_toml(cfg: &ExperimentConfig) -> String {
    let plain = cfg.norm_pairs.iter().all(|p| !p.gradient);
    let canonical = CanonicalConfig {
        scenario: cfg.scenario.name(),
        p: cfg.p,
        r_max: cfg.r_max,
        n: cfg.n,
        dt: cfg.dt,
        t_end: cfg.t_end,
        c1: cfg.c1,
        c2: cfg.c2,
        lambda: cfg.lambda,
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        norm_pairs: if plain { cfg.norm_pairs.iter().map(|p| [p.q_t, p.r_x]).collect() } else { Vec::new() },
        seed: cfg.seed,
    };
    let mut text = toml::to_string(&canonical).expect("config serializes");
    if !plain {
        let tables: Vec<String> = cfg
            .norm_pairs
            .iter()
            .map(|p| format!("{{ q_t = {:?}, r_x = {:?}, gradient = {} }}", p.q_t, p.r_x, p.gradient))
            .collect();
        text = text.replace("norm_pairs = []", &format!("norm_pairs = [{}]", tables.join(", ")));
    }
    text
}

/// Defaults for a scenario, hashed through their canonical TOML text.
pub fn default_config(scenario: Scenario) -> LoadedConfig {
    let config = ExperimentConfig::defaults(scenario);
    let hash = sha256_hex(to_toml(&config).as_bytes());
    LoadedConfig { config, hash }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        for s in Scenario::ALL {
            let cfg = ExperimentConfig::defaults(s);
            assert_eq!(parse_config_str(&to_toml(&cfg)).unwrap(), cfg);
        }
        let mut cfg = ExperimentConfig::defaults(Scenario::LocalBound);
        cfg.norm_pairs = vec![NormPair::of_gradient(2.0, 6.0), NormPair::new(8.0, 4.0)];
        assert_eq!(parse_config_str(&to_toml(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn every_key_is_accepted() {
        let text = KEYS
            .iter()
            .map(|k| match *k {
                "scenario" => "scenario = \"conservation\"".to_string(),
                "n" => "n = 1024".into(),
                "seed" => "seed = 3".into(),
                "norm_pairs" => "norm_pairs = [[8.0, 4.0]]".into(),
                "delta" => "delta = 0.2".into(),
                other => format!("{other} = 2.0"),
            })
            .collect::<Vec<_>>()
            .join("\n");
        let cfg = parse_config_str(&text).unwrap();
        assert_eq!(cfg.n, 1024);
        assert_eq!(cfg.lambda, 2.0);
    }

    #[test]
    fn lines_are_counted_from_one() {
        assert_eq!(line_of("a\nb\nc", 0), 1);
        assert_eq!(line_of("a\nb\nc", 4), 3);
    }
}
