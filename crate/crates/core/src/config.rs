//! Flat TOML experiment configuration with `key=value` overrides.
//!
//! Every key is optional; omitted keys take the defaults of
//! [`ExperimentConfig::default`]. Unknown keys are rejected by name.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analytics::{QuadratureSpec, Scenario};
use crate::channel::{dbm_to_watts, db_to_linear, free_space_gain, thermal_noise_dbm, ChannelParams};
use crate::control::LtiSystem;
use crate::geometry::{default_window_radius, PppConfig};
use crate::{Error, Protocol, Result, SystemKind};

/// What an experiment run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Empirical controllability sweep.
    Simulate,
    /// Closed-form values only.
    Analytic,
    /// Thompson-sampling runs.
    Ts,
    /// Empirical versus closed-form comparison.
    Compare,
    /// Averaged regret curves.
    Regret,
}

/// Whether the network is redrawn for every block or held per realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryMode {
    PerBlock,
    Fixed,
}

/// A scalar or a list in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(xs) => xs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub mode: Mode,
    /// Blocks per realization (TS horizon for `ts` and `regret`).
    #[serde(rename = "K")]
    pub num_blocks: usize,
    pub num_realizations: usize,
    pub geometry: GeometryMode,
    /// Truncate analytic radial integrals at the simulation window (otherwise
    /// integrate over the whole plane, which needs `alpha > 2`).
    pub analytic_window: bool,

    pub lambda: f64,
    /// Extra intensities for analytic and regret studies; empty means `[lambda]`.
    pub lambda_sweep: Vec<f64>,
    pub r0: f64,
    /// Simulation window; defaults to `max(10 r0, 5 / sqrt(lambda))`.
    pub window_radius: Option<f64>,

    pub tx_power_dbm: f64,
    /// Overrides the thermal noise computed from bandwidth and noise figure.
    pub noise_power_dbm: Option<f64>,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub carrier_hz: f64,
    /// Overrides the free-space constant computed from the carrier.
    pub rho: Option<f64>,
    pub alpha: f64,
    pub gamma_db: f64,

    pub protocol: OneOrMany<Protocol>,
    pub system: OneOrMany<SystemKind>,
    pub q: f64,
    /// Access probabilities to sweep; empty means `[q]`.
    pub q_sweep: Vec<f64>,
    pub arms: Vec<f64>,

    #[serde(rename = "T")]
    pub block_len: usize,
    pub v: usize,
    /// Extra horizons for analytic studies; empty means `[v]`.
    pub v_sweep: Vec<usize>,
    pub beta: OneOrMany<f64>,
    /// Row-major state matrix.
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub x_des: Vec<f64>,
    pub x0: Vec<f64>,
    pub noise_std: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            mode: Mode::Simulate,
            num_blocks: 1,
            num_realizations: 1000,
            geometry: GeometryMode::PerBlock,
            analytic_window: true,
            lambda: 1e-4,
            lambda_sweep: vec![],
            r0: 10.0,
            window_radius: None,
            tx_power_dbm: 24.0,
            noise_power_dbm: None,
            bandwidth_hz: 200e6,
            noise_figure_db: 0.0,
            carrier_hz: 3.2e9,
            rho: None,
            alpha: 2.0,
            gamma_db: 0.0,
            protocol: OneOrMany::One(Protocol::Block),
            system: OneOrMany::One(SystemKind::Restless),
            q: 0.5,
            q_sweep: vec![],
            arms: (1..=10).map(|i| i as f64 / 10.0).collect(),
            block_len: 20,
            v: 4,
            v_sweep: vec![],
            beta: OneOrMany::One(0.9),
            a: vec![vec![1.2, 0.3], vec![0.0, 0.8]],
            b: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            x_des: vec![1.0, 1.0],
            x0: vec![0.0, 0.0],
            noise_std: 0.0,
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "seed", "mode", "K", "num_realizations", "geometry", "analytic_window", "lambda", "lambda_sweep", "r0",
    "window_radius", "tx_power_dbm", "noise_power_dbm", "bandwidth_hz", "noise_figure_db", "carrier_hz", "rho",
    "alpha", "gamma_db", "protocol", "system", "q", "q_sweep", "arms", "T", "v", "v_sweep", "beta", "A", "B",
    "x_des", "x0", "noise_std",
];

/// Bundled presets by name.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig2", include_str!("../presets/fig2.conf")),
    ("fig3", include_str!("../presets/fig3.conf")),
    ("fig4", include_str!("../presets/fig4.conf")),
    ("fig5", include_str!("../presets/fig5.conf")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    let stem = name.strip_suffix(".conf").unwrap_or(name);
    PRESETS.iter().find(|(n, _)| *n == stem).map(|(_, text)| *text)
}

/// Parses `key=value`; the value is read as a TOML value and falls back to a
/// plain string.
fn parse_override(spec: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::ConfigParse(format!("override `{spec}` is not of the form key=value")))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("value = {raw}")) {
        Ok(mut t) => t.remove("value").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    Ok((key, value))
}

/// Parses config text, applies overrides and validates.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    for spec in overrides {
        let (key, value) = parse_override(spec)?;
        table.insert(key, value);
    }
    if let Some(key) = table.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        return Err(Error::config(key.clone(), "unknown key"));
    }
    for (key, value) in &table {
        // Deserialize each key alone so type errors name it.
        let mut single = toml::Table::new();
        single.insert(key.clone(), value.clone());
        toml::Value::Table(single)
            .try_into::<ExperimentConfig>()
            .map_err(|e| Error::config(key.clone(), e.to_string().trim().to_string()))?;
    }
    let config: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| Error::ConfigParse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Loads a config file (or a bundled preset name such as `fig2`) and applies
/// `key=value` overrides.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) => match path.to_str().and_then(preset) {
            Some(text) if !path.exists() => text.to_string(),
            _ => return Err(Error::io(path, e)),
        },
    };
    parse_config(&text, overrides)
}

fn check(ok: bool, key: &str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(key, reason))
    }
}

fn matrix(rows: &[Vec<f64>], key: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    check(n > 0 && m > 0, key, "matrix must be non-empty")?;
    check(rows.iter().all(|r| r.len() == m), key, "rows must have equal length")?;
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        check(self.num_blocks >= 1, "K", "must be >= 1")?;
        check(self.num_realizations >= 1, "num_realizations", "must be >= 1")?;
        for &l in self.lambdas().iter() {
            check(l >= 0.0 && l.is_finite(), "lambda", "must be finite and >= 0")?;
        }
        check(self.r0 > 0.0 && self.r0.is_finite(), "r0", "must be positive")?;
        if let Some(r) = self.window_radius {
            check(r > self.r0 && r.is_finite(), "window_radius", "must exceed r0")?;
        }
        check(self.alpha >= 2.0 && self.alpha.is_finite(), "alpha", "path-loss exponent must be >= 2")?;
        check(self.analytic_window || self.alpha > 2.0, "analytic_window", "whole-plane integrals need alpha > 2")?;
        check(self.bandwidth_hz > 0.0, "bandwidth_hz", "must be positive")?;
        check(self.carrier_hz > 0.0, "carrier_hz", "must be positive")?;
        if let Some(rho) = self.rho {
            check(rho > 0.0, "rho", "must be positive")?;
        }
        check(self.gamma_db.is_finite(), "gamma_db", "must be finite")?;
        check(self.tx_power_dbm.is_finite(), "tx_power_dbm", "must be finite")?;
        check((0.0..=1.0).contains(&self.q), "q", "access probability must lie in [0, 1]")?;
        check(self.q_sweep.iter().all(|q| (0.0..=1.0).contains(q)), "q_sweep", "values must lie in [0, 1]")?;
        crate::aloha::check_arms(&self.arms).map_err(|e| Error::config("arms", e.to_string()))?;
        check(!self.arms.is_empty(), "arms", "need at least one arm")?;
        check(!self.protocol.to_vec().is_empty(), "protocol", "need at least one protocol")?;
        check(!self.system.to_vec().is_empty(), "system", "need at least one system")?;
        check(self.block_len >= 1, "T", "must be >= 1")?;
        for &v in self.horizons().iter() {
            check(v >= 1 && v <= self.block_len, "v", "need 1 <= v <= T")?;
        }
        check(self.betas().iter().all(|&b| b > 0.0 && b < 1.0), "beta", "values must lie in (0, 1)")?;
        check(self.noise_std >= 0.0 && self.noise_std.is_finite(), "noise_std", "must be >= 0")?;
        self.channel().map_err(|e| Error::config("channel", e.to_string()))?;
        let a = matrix(&self.a, "A")?;
        check(a.is_square(), "A", "must be square")?;
        let b = matrix(&self.b, "B")?;
        check(b.nrows() == a.nrows(), "B", "must have as many rows as A")?;
        check(self.x_des.len() == a.nrows(), "x_des", "length must match A")?;
        check(self.x0.len() == a.nrows(), "x0", "length must match A")?;
        for v in self.horizons() {
            self.system_with_horizon(v).map_err(|e| match e {
                Error::InvalidParameter { name: "v", reason } => Error::config("v", reason),
                Error::InvalidParameter { name: "B", reason } => Error::config("B", reason),
                other => Error::config("A", other.to_string()),
            })?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn channel(&self) -> Result<ChannelParams> {
        let noise_dbm = self
            .noise_power_dbm
            .unwrap_or_else(|| thermal_noise_dbm(self.bandwidth_hz, self.noise_figure_db));
        let rho = self.rho.unwrap_or_else(|| free_space_gain(self.carrier_hz));
        ChannelParams::new(dbm_to_watts(self.tx_power_dbm), rho, self.alpha, dbm_to_watts(noise_dbm), db_to_linear(self.gamma_db))
    }

    pub fn lambdas(&self) -> Vec<f64> {
        if self.lambda_sweep.is_empty() {
            vec![self.lambda]
        } else {
            self.lambda_sweep.clone()
        }
    }

    pub fn q_values(&self) -> Vec<f64> {
        if self.q_sweep.is_empty() {
            vec![self.q]
        } else {
            self.q_sweep.clone()
        }
    }

    pub fn horizons(&self) -> Vec<usize> {
        if self.v_sweep.is_empty() {
            vec![self.v]
        } else {
            self.v_sweep.clone()
        }
    }

    pub fn betas(&self) -> Vec<f64> {
        self.beta.to_vec()
    }

    pub fn protocols(&self) -> Vec<Protocol> {
        self.protocol.to_vec()
    }

    pub fn systems(&self) -> Vec<SystemKind> {
        self.system.to_vec()
    }

    pub fn window_for(&self, lambda: f64) -> f64 {
        self.window_radius.unwrap_or_else(|| default_window_radius(lambda, self.r0))
    }

    pub fn ppp(&self, lambda: f64) -> Result<PppConfig> {
        PppConfig::new(lambda, self.window_for(lambda), self.r0)
    }

    pub fn scenario(&self, lambda: f64) -> Result<Scenario> {
        Scenario::new(lambda, self.r0, self.channel()?)
    }

    pub fn quadrature(&self, lambda: f64) -> QuadratureSpec {
        let mut spec = QuadratureSpec::windowed(self.window_for(lambda));
        spec.infinite_plane = !self.analytic_window;
        spec
    }

    pub fn lti_system(&self) -> Result<LtiSystem> {
        self.system_with_horizon(self.v)
    }

    pub fn system_with_horizon(&self, v: usize) -> Result<LtiSystem> {
        LtiSystem::new(
            matrix(&self.a, "A")?,
            matrix(&self.b, "B")?,
            DVector::from_vec(self.x_des.clone()),
            Some(v),
            self.noise_std,
        )
    }

    pub fn initial_state(&self) -> DVector<f64> {
        DVector::from_vec(self.x0.clone())
    }
}
