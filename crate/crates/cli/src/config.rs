//! Flat `key = value` run configuration with `#` comments.

use std::fmt;
use std::path::Path;

use traversal_core::experiments::{default_sigmas, default_widths, Scenario, DETECTOR_A1, DETECTOR_A2};

/// A recognised key, its unit and what it sets.
pub struct Key {
    pub name: &'static str,
    pub unit: &'static str,
    pub help: &'static str,
}

pub const KEYS: &[Key] = &[
    Key {
        name: "x0",
        unit: "length",
        help: "initial packet centre",
    },
    Key {
        name: "p0",
        unit: "momentum",
        help: "initial mean momentum",
    },
    Key {
        name: "var_x",
        unit: "length^2",
        help: "initial position variance",
    },
    Key {
        name: "barrier_left",
        unit: "length",
        help: "left edge of the barrier",
    },
    Key {
        name: "barrier_height",
        unit: "energy",
        help: "barrier height V0",
    },
    Key {
        name: "d",
        unit: "length",
        help: "barrier width(s), comma-separated",
    },
    Key {
        name: "a",
        unit: "length",
        help: "centre of the passage detector",
    },
    Key {
        name: "s",
        unit: "energy^1/2",
        help: "passage detector strength(s), comma-separated",
    },
    Key {
        name: "sigma",
        unit: "length",
        help: "passage detector width(s), comma-separated",
    },
    Key {
        name: "s1",
        unit: "energy^1/2",
        help: "strength of the first figure2 detector",
    },
    Key {
        name: "sigma1",
        unit: "length",
        help: "width of the first figure2 detector",
    },
    Key {
        name: "s2",
        unit: "energy^1/2",
        help: "strength of the second figure2 detector",
    },
    Key {
        name: "sigma2",
        unit: "length",
        help: "width of the second figure2 detector",
    },
    Key {
        name: "x_min",
        unit: "length",
        help: "left wall",
    },
    Key {
        name: "x_max",
        unit: "length",
        help: "right wall",
    },
    Key {
        name: "n_points",
        unit: "count",
        help: "lattice points including both walls",
    },
    Key {
        name: "dt",
        unit: "time",
        help: "Crank-Nicolson time step",
    },
    Key {
        name: "samples",
        unit: "count",
        help: "click times sampled per detector (M)",
    },
    Key {
        name: "t_detect",
        unit: "time",
        help: "length of the passage-detector run",
    },
    Key {
        name: "t_end",
        unit: "time",
        help: "common end of all outgoing-flux records",
    },
    Key {
        name: "tau_spacing",
        unit: "count",
        help: "traversal-time grid spacing in units of dt",
    },
    Key {
        name: "zero_transmission",
        unit: "probability",
        help: "smallest branch transmittance given an arrival density",
    },
    Key {
        name: "backflow_limit",
        unit: "fraction",
        help: "largest clipped negative-flux fraction per branch",
    },
];

/// Text for `--help`: every key with its unit.
pub fn keys_help() -> String {
    let mut out = String::from("Configuration keys (atomic units, hbar = m = 1):\n");
    for k in KEYS {
        out.push_str(&format!("  {:<18} [{}] {}\n", k.name, k.unit, k.help));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    UnknownKey(String),
    BadValue { key: String, value: String, reason: String },
    Syntax { line: usize, text: String },
    Read { path: String, reason: String },
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::UnknownKey(k) => write!(f, "unknown configuration key `{k}`"),
            ConfigError::BadValue { key, value, reason } => write!(f, "bad value `{value}` for `{key}`: {reason}"),
            ConfigError::Syntax { line, text } => write!(f, "line {line}: expected key = value, got `{text}`"),
            ConfigError::Read { path, reason } => write!(f, "cannot read config {path}: {reason}"),
            ConfigError::Invalid(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Scenario plus the sweep lists; `None` means "use the command's default".
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub d: Option<Vec<f64>>,
    pub s: Option<Vec<f64>>,
    pub sigma: Option<Vec<f64>>,
    pub detector_1: (f64, f64),
    pub detector_2: (f64, f64),
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            d: None,
            s: None,
            sigma: None,
            detector_1: DETECTOR_A1,
            detector_2: DETECTOR_A2,
        }
    }
}

fn bad(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    }
}

fn number(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = value
        .parse()
        .map_err(|e: std::num::ParseFloatError| bad(key, value, e.to_string()))?;
    if !v.is_finite() {
        return Err(bad(key, value, "not finite"));
    }
    Ok(v)
}

fn count(key: &str, value: &str) -> Result<usize, ConfigError> {
    value
        .parse()
        .map_err(|e: std::num::ParseIntError| bad(key, value, e.to_string()))
}

fn list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    let items: Vec<f64> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| number(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(bad(key, value, "empty list"));
    }
    Ok(items)
}

impl RunConfig {
    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let sc = &mut self.scenario;
        match key {
            "x0" => sc.prep.x0 = number(key, value)?,
            "p0" => sc.prep.p0 = number(key, value)?,
            "var_x" => sc.prep.var_x = number(key, value)?,
            "barrier_left" => sc.barrier_left = number(key, value)?,
            "barrier_height" => sc.barrier_height = number(key, value)?,
            "d" => self.d = Some(list(key, value)?),
            "a" => sc.detector_a = number(key, value)?,
            "s" => self.s = Some(list(key, value)?),
            "sigma" => self.sigma = Some(list(key, value)?),
            "s1" => self.detector_1.0 = number(key, value)?,
            "sigma1" => self.detector_1.1 = number(key, value)?,
            "s2" => self.detector_2.0 = number(key, value)?,
            "sigma2" => self.detector_2.1 = number(key, value)?,
            "x_min" => sc.x_min = number(key, value)?,
            "x_max" => sc.x_max = number(key, value)?,
            "n_points" => sc.n_points = count(key, value)?,
            "dt" => sc.dt = number(key, value)?,
            "samples" => sc.samples = count(key, value)?,
            "t_detect" => sc.t_detect = number(key, value)?,
            "t_end" => sc.t_end = number(key, value)?,
            "tau_spacing" => sc.tau_spacing = count(key, value)?,
            "zero_transmission" => sc.tolerances.zero_transmission = number(key, value)?,
            "backflow_limit" => sc.tolerances.backflow_limit = number(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Apply every assignment in `text`, in order.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: n + 1,
                text: raw.trim().into(),
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Apply a `KEY=VALUE` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: 0,
            text: assignment.into(),
        })?;
        self.set(k.trim(), v.trim())
    }

    /// Defaults, then the file (if any), then the overrides; last wins.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Read {
                path: p.display().to_string(),
                reason: e.to_string(),
            })?;
            cfg.apply_text(&text)?;
        }
        for o in overrides {
            cfg.apply_override(o)?;
        }
        Ok(cfg)
    }

    pub fn figure1_lists(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.s.clone().unwrap_or_else(|| vec![1.0, 10.0]),
            self.sigma.clone().unwrap_or_else(default_sigmas),
        )
    }

    pub fn figure2_widths(&self) -> Vec<f64> {
        self.d.clone().unwrap_or_else(default_widths)
    }

    /// `(d, s, sigma)` for a single run; each must be a single value.
    pub fn single(&self) -> Result<(f64, f64, f64), ConfigError> {
        let one = |name: &str, v: &Option<Vec<f64>>, default: f64| match v {
            None => Ok(default),
            Some(xs) if xs.len() == 1 => Ok(xs[0]),
            Some(xs) => Err(ConfigError::Invalid(format!(
                "single needs exactly one value of `{name}`, got {}",
                xs.len()
            ))),
        };
        Ok((
            one("d", &self.d, self.scenario.barrier_width)?,
            one("s", &self.s, DETECTOR_A1.0)?,
            one("sigma", &self.sigma, DETECTOR_A1.1)?,
        ))
    }
}
