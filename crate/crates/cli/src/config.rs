//! Flat `key = value` scenario configuration with fail-closed parsing:
//! unknown keys, duplicates, and constraint violations are all errors that
//! name the offending key and line.

use std::collections::HashMap;
use std::path::PathBuf;

use phcf_core::model::{ModelParams, OvfKind};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("duplicate key `{key}` on lines {first} and {second}")]
    DuplicateKey { key: String, first: usize, second: usize },
    #[error("line {line}: key `{key}`: {reason}")]
    Invalid { line: usize, key: String, reason: String },
}

/// Fully resolved scenario. Defaults are the reference experiment:
/// 50 vehicles on a 1 km ring, 5 m vehicles, 1 s time gap, gamma 1/s,
/// beta 0.5/s, sigma 5, dt 0.01 s, 5e4 steps, 100 replications, and the
/// stiffness sweep {0, 0.05, 0.1, 0.2, 0.5, 1}.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub n_vehicles: usize,
    pub ring_length_m: f64,
    pub vehicle_length_m: f64,
    pub time_gap_s: f64,
    pub gamma_per_s: f64,
    pub beta_per_s: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub desired_speed_mps: f64,
    pub ovf: OvfKind,
    pub dt_s: f64,
    pub n_steps: usize,
    /// Steps excluded from stationary statistics; defaults to 40% of
    /// `n_steps` when unset.
    pub burn_in_steps: Option<usize>,
    pub record_every: usize,
    pub seed: u64,
    pub n_replications: usize,
    pub alpha_sweep: Vec<f64>,
    pub gamma_sweep: Option<Vec<f64>>,
    pub beta_sweep: Option<Vec<f64>>,
    pub time_gap_sweep: Option<Vec<f64>>,
    pub output_dir: PathBuf,
    pub emit_trajectory: bool,
    /// Maximum autocorrelation lag [s].
    pub max_lag_s: f64,
    /// When set, trajectory CSV emission is restricted to the final
    /// `window_s` seconds of the run.
    pub window_s: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_vehicles: 50,
            ring_length_m: 1000.0,
            vehicle_length_m: 5.0,
            time_gap_s: 1.0,
            gamma_per_s: 1.0,
            beta_per_s: 0.5,
            alpha: 0.0,
            sigma: 5.0,
            desired_speed_mps: 30.0,
            ovf: OvfKind::Affine,
            dt_s: 0.01,
            n_steps: 50_000,
            burn_in_steps: None,
            record_every: 1,
            seed: 0,
            n_replications: 100,
            alpha_sweep: vec![0.0, 0.05, 0.1, 0.2, 0.5, 1.0],
            gamma_sweep: None,
            beta_sweep: None,
            time_gap_sweep: None,
            output_dir: PathBuf::from("out"),
            emit_trajectory: false,
            max_lag_s: 60.0,
            window_s: None,
        }
    }
}

impl ScenarioConfig {
    /// Model parameters at the given potential stiffness.
    pub fn model_params(&self, alpha: f64) -> ModelParams {
        ModelParams {
            n_vehicles: self.n_vehicles,
            ring_length: self.ring_length_m,
            gamma: self.gamma_per_s,
            beta: self.beta_per_s,
            alpha,
            sigma: self.sigma,
            vehicle_length: self.vehicle_length_m,
            time_gap: self.time_gap_s,
            desired_speed: self.desired_speed_mps,
            ovf_kind: self.ovf,
        }
    }

    /// Burn-in resolved to its 40%-of-steps default.
    pub fn effective_burn_in(&self) -> usize {
        self.burn_in_steps.unwrap_or(self.n_steps * 2 / 5)
    }
}

const KNOWN_KEYS: &[&str] = &[
    "n_vehicles",
    "ring_length_m",
    "vehicle_length_m",
    "time_gap_s",
    "gamma_per_s",
    "beta_per_s",
    "alpha",
    "sigma",
    "desired_speed_mps",
    "ovf",
    "dt_s",
    "n_steps",
    "burn_in_steps",
    "record_every",
    "seed",
    "n_replications",
    "alpha_sweep",
    "gamma_sweep",
    "beta_sweep",
    "time_gap_sweep",
    "output_dir",
    "emit_trajectory",
    "max_lag_s",
    "window_s",
];

struct Entry {
    line: usize,
    value: String,
}

fn invalid(line: usize, key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { line, key: key.to_string(), reason: reason.into() }
}

fn parse_scalar<T: std::str::FromStr>(entry: &Entry, key: &str, kind: &str) -> Result<T, ConfigError> {
    entry
        .value
        .parse()
        .map_err(|_| invalid(entry.line, key, format!("expected {kind}, got `{}`", entry.value)))
}

fn parse_list(entry: &Entry, key: &str) -> Result<Vec<f64>, ConfigError> {
    entry
        .value
        .split(',')
        .map(|tok| {
            tok.trim().parse().map_err(|_| {
                invalid(entry.line, key, format!("expected comma-separated numbers, got `{tok}`"))
            })
        })
        .collect()
}

/// Parse the flat `key = value` format. `#` starts a comment; blank lines
/// are ignored; every key is optional and falls back to the defaults above.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut entries: HashMap<String, Entry> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Malformed { line, text: content.to_string() });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { line, key });
        }
        if let Some(prev) = entries.get(&key) {
            return Err(ConfigError::DuplicateKey { key, first: prev.line, second: line });
        }
        entries.insert(key, Entry { line, value });
    }

    let mut cfg = ScenarioConfig::default();

    if let Some(e) = entries.get("n_vehicles") {
        cfg.n_vehicles = parse_scalar(e, "n_vehicles", "an integer")?;
        if cfg.n_vehicles <= 2 {
            return Err(invalid(e.line, "n_vehicles", "must be > 2"));
        }
    }
    if let Some(e) = entries.get("ring_length_m") {
        cfg.ring_length_m = parse_scalar(e, "ring_length_m", "a number")?;
        if !(cfg.ring_length_m > 0.0) {
            return Err(invalid(e.line, "ring_length_m", "must be > 0"));
        }
    }
    if let Some(e) = entries.get("vehicle_length_m") {
        cfg.vehicle_length_m = parse_scalar(e, "vehicle_length_m", "a number")?;
        if !(cfg.vehicle_length_m >= 0.0) {
            return Err(invalid(e.line, "vehicle_length_m", "must be >= 0"));
        }
    }
    if let Some(e) = entries.get("time_gap_s") {
        cfg.time_gap_s = parse_scalar(e, "time_gap_s", "a number")?;
        if !(cfg.time_gap_s > 0.0) {
            return Err(invalid(e.line, "time_gap_s", "must be > 0"));
        }
    }
    if let Some(e) = entries.get("gamma_per_s") {
        cfg.gamma_per_s = parse_scalar(e, "gamma_per_s", "a number")?;
        if !(cfg.gamma_per_s > 0.0) {
            return Err(invalid(e.line, "gamma_per_s", "gamma must be > 0"));
        }
    }
    if let Some(e) = entries.get("beta_per_s") {
        cfg.beta_per_s = parse_scalar(e, "beta_per_s", "a number")?;
        if !(cfg.beta_per_s >= 0.0) {
            return Err(invalid(e.line, "beta_per_s", "must be >= 0"));
        }
    }
    if let Some(e) = entries.get("alpha") {
        cfg.alpha = parse_scalar(e, "alpha", "a number")?;
        if !(cfg.alpha >= 0.0) {
            return Err(invalid(e.line, "alpha", "must be >= 0"));
        }
    }
    if let Some(e) = entries.get("sigma") {
        cfg.sigma = parse_scalar(e, "sigma", "a number")?;
        if !(cfg.sigma >= 0.0) {
            return Err(invalid(e.line, "sigma", "must be >= 0"));
        }
    }
    if let Some(e) = entries.get("desired_speed_mps") {
        cfg.desired_speed_mps = parse_scalar(e, "desired_speed_mps", "a number")?;
        if !(cfg.desired_speed_mps >= 0.0) {
            return Err(invalid(e.line, "desired_speed_mps", "must be >= 0"));
        }
    }
    if let Some(e) = entries.get("ovf") {
        cfg.ovf = match e.value.as_str() {
            "affine" => OvfKind::Affine,
            "piecewise" => OvfKind::PiecewiseLinear,
            other => {
                return Err(invalid(e.line, "ovf", format!("expected `affine` or `piecewise`, got `{other}`")));
            }
        };
    }
    if let Some(e) = entries.get("dt_s") {
        cfg.dt_s = parse_scalar(e, "dt_s", "a number")?;
        if !(cfg.dt_s > 0.0) {
            return Err(invalid(e.line, "dt_s", "must be > 0"));
        }
    }
    if let Some(e) = entries.get("n_steps") {
        cfg.n_steps = parse_scalar(e, "n_steps", "an integer")?;
        if cfg.n_steps == 0 {
            return Err(invalid(e.line, "n_steps", "must be >= 1"));
        }
    }
    if let Some(e) = entries.get("burn_in_steps") {
        let v: usize = parse_scalar(e, "burn_in_steps", "an integer")?;
        if v >= cfg.n_steps {
            return Err(invalid(e.line, "burn_in_steps", format!("must be < n_steps ({})", cfg.n_steps)));
        }
        cfg.burn_in_steps = Some(v);
    }
    if let Some(e) = entries.get("record_every") {
        cfg.record_every = parse_scalar(e, "record_every", "an integer")?;
        if cfg.record_every == 0 {
            return Err(invalid(e.line, "record_every", "must be >= 1"));
        }
    }
    if let Some(e) = entries.get("seed") {
        cfg.seed = parse_scalar(e, "seed", "an unsigned integer")?;
    }
    if let Some(e) = entries.get("n_replications") {
        cfg.n_replications = parse_scalar(e, "n_replications", "an integer")?;
        if cfg.n_replications == 0 {
            return Err(invalid(e.line, "n_replications", "must be >= 1"));
        }
    }
    if let Some(e) = entries.get("alpha_sweep") {
        let values = parse_list(e, "alpha_sweep")?;
        if values.is_empty() || values.iter().any(|v| !(*v >= 0.0)) {
            return Err(invalid(e.line, "alpha_sweep", "values must be >= 0"));
        }
        cfg.alpha_sweep = values;
    }
    for (key, slot) in [
        ("gamma_sweep", &mut cfg.gamma_sweep),
        ("beta_sweep", &mut cfg.beta_sweep),
        ("time_gap_sweep", &mut cfg.time_gap_sweep),
    ] {
        if let Some(e) = entries.get(key) {
            let values = parse_list(e, key)?;
            let lower_ok = match key {
                "beta_sweep" => values.iter().all(|v| *v >= 0.0),
                _ => values.iter().all(|v| *v > 0.0),
            };
            if values.is_empty() || !lower_ok {
                return Err(invalid(e.line, key, "values out of range"));
            }
            *slot = Some(values);
        }
    }
    if let Some(e) = entries.get("output_dir") {
        if e.value.is_empty() {
            return Err(invalid(e.line, "output_dir", "must not be empty"));
        }
        cfg.output_dir = PathBuf::from(&e.value);
    }
    if let Some(e) = entries.get("emit_trajectory") {
        cfg.emit_trajectory = match e.value.as_str() {
            "true" => true,
            "false" => false,
            other => return Err(invalid(e.line, "emit_trajectory", format!("expected `true` or `false`, got `{other}`"))),
        };
    }
    if let Some(e) = entries.get("max_lag_s") {
        cfg.max_lag_s = parse_scalar(e, "max_lag_s", "a number")?;
        if !(cfg.max_lag_s > 0.0) {
            return Err(invalid(e.line, "max_lag_s", "must be > 0"));
        }
    }
    if let Some(e) = entries.get("window_s") {
        let v: f64 = parse_scalar(e, "window_s", "a number")?;
        if !(v > 0.0) {
            return Err(invalid(e.line, "window_s", "must be > 0"));
        }
        cfg.window_s = Some(v);
    }

    Ok(cfg)
}
