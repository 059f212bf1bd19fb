//! Project configuration: a flat `key = value` file plus overrides.
//!
//! ```text
//! # comments start with '#'
//! input = data/survey.csv
//! features = Wh_encl, meteoverbs
//! n_paths = 30, 45
//! tau = 1000
//! ```
//!
//! Keys not present keep their defaults. Overrides given on the command line
//! (`--set key=value`) are applied after the file, in order.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use isogloss_core::dataio::{GeoPoint, ValuePolicy};
use isogloss_core::field::default_levels;
use thiserror::Error;

/// Environment variable naming the output root when `out` is not set.
pub const OUT_ENV: &str = "ISOGLOSS_OUT";
const DEFAULT_OUT: &str = "isogloss-out";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {reason}")]
    Value { key: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectConfig {
    pub input: Option<PathBuf>,
    /// Empty selects every feature in the dataset.
    pub features: Vec<String>,
    pub policy: ValuePolicy,
    /// Projection origin; the locality centroid when absent.
    pub origin: Option<GeoPoint>,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub levels: Vec<f64>,
    pub n_paths: Vec<usize>,
    pub seed: u64,
    pub tau: f64,
    pub lambda: f64,
    pub theta: f64,
    pub clamp: bool,
    pub out: PathBuf,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            input: None,
            features: Vec::new(),
            policy: ValuePolicy::Binary,
            origin: None,
            grid_nx: 200,
            grid_ny: 200,
            levels: default_levels(),
            n_paths: vec![30, 45],
            seed: 1,
            tau: 1000.0,
            lambda: 50.0,
            theta: 1100.0,
            clamp: true,
            out: std::env::var_os(OUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        }
    }
}

fn list<T>(
    key: &str,
    value: &str,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            parse(s).ok_or_else(|| ConfigError::Value {
                key: key.to_string(),
                reason: format!("cannot parse {s:?}"),
            })
        })
        .collect()
}

fn one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::Value {
        key: key.to_string(),
        reason: format!("cannot parse {:?}", value.trim()),
    })
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::default();
        cfg.merge_str(&text)?;
        Ok(cfg)
    }

    /// Applies every `key = value` line of `text`.
    pub fn merge_str(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: 0 })?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "input" => self.input = (!value.is_empty()).then(|| PathBuf::from(value)),
            "features" => self.features = list(key, value, |s| Some(s.to_string()))?,
            "value_policy" => {
                self.policy = match value {
                    "binary" => ValuePolicy::Binary,
                    "fraction" => ValuePolicy::Fraction,
                    _ => {
                        return Err(ConfigError::Value {
                            key: key.into(),
                            reason: "expected binary or fraction".into(),
                        })
                    }
                }
            }
            "origin" => {
                self.origin = if value.is_empty() {
                    None
                } else {
                    let v = list(key, value, |s| s.parse::<f64>().ok())?;
                    let [lon, lat] = v[..] else {
                        return Err(ConfigError::Value {
                            key: key.into(),
                            reason: "expected `lon, lat`".into(),
                        });
                    };
                    Some(GeoPoint::new(lon, lat).map_err(|e| ConfigError::Value {
                        key: key.into(),
                        reason: e.to_string(),
                    })?)
                }
            }
            "grid" => {
                let n = one(key, value)?;
                self.grid_nx = n;
                self.grid_ny = n;
            }
            "grid_nx" => self.grid_nx = one(key, value)?,
            "grid_ny" => self.grid_ny = one(key, value)?,
            "levels" => self.levels = list(key, value, |s| s.parse().ok())?,
            "n_paths" => self.n_paths = list(key, value, |s| s.parse().ok())?,
            "seed" => self.seed = one(key, value)?,
            "tau" => self.tau = one(key, value)?,
            "lambda" => self.lambda = one(key, value)?,
            "theta" => self.theta = one(key, value)?,
            "clamp" => self.clamp = one(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.levels.is_empty() {
            return bad("no contour levels".into());
        }
        if self.levels.windows(2).any(|w| !(w[0] > w[1])) {
            return bad("levels must be strictly decreasing".into());
        }
        if let Some(l) = self.levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return bad(format!("level {l} is outside [0, 1]"));
        }
        if self.n_paths.is_empty() || self.n_paths.contains(&0) {
            return bad("every path count must be at least 1".into());
        }
        if self.grid_nx < 2 || self.grid_ny < 2 {
            return bad(format!(
                "grid {}x{} is too small",
                self.grid_nx, self.grid_ny
            ));
        }
        for (name, v) in [("tau", self.tau), ("theta", self.theta)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !self.lambda.is_finite() {
            return bad("lambda must be finite".into());
        }
        Ok(())
    }

    /// Canonical `key = value` rendering; reloading it yields the same config.
    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv(
            "input",
            self.input
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        kv("features", self.features.join(", "));
        kv(
            "value_policy",
            match self.policy {
                ValuePolicy::Binary => "binary".into(),
                ValuePolicy::Fraction => "fraction".into(),
            },
        );
        kv(
            "origin",
            self.origin
                .map(|o| format!("{}, {}", o.lon, o.lat))
                .unwrap_or_default(),
        );
        kv("grid_nx", self.grid_nx.to_string());
        kv("grid_ny", self.grid_ny.to_string());
        kv(
            "levels",
            join(self.levels.iter().map(|l| l.to_string()).collect()),
        );
        kv(
            "n_paths",
            join(self.n_paths.iter().map(|n| n.to_string()).collect()),
        );
        kv("seed", self.seed.to_string());
        kv("tau", self.tau.to_string());
        kv("lambda", self.lambda.to_string());
        kv("theta", self.theta.to_string());
        kv("clamp", self.clamp.to_string());
        kv("out", self.out.display().to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ProjectConfig::default();
        assert_eq!(c.levels.len(), 11);
        assert_eq!(c.levels[0], 1.0);
        assert_eq!(*c.levels.last().unwrap(), 0.0);
        assert_eq!(c.n_paths, vec![30, 45]);
        assert_eq!((c.tau, c.lambda, c.theta), (1000.0, 50.0, 1100.0));
        c.validate().unwrap();
    }

    #[test]
    fn file_then_overrides() {
        let mut c = ProjectConfig::default();
        c.merge_str("# header\ninput = a.csv\nfeatures = x, y  # two\n\nn_paths = 12\nseed=7\n")
            .unwrap();
        c.set_pair("seed=9").unwrap();
        assert_eq!(c.input.as_deref(), Some(Path::new("a.csv")));
        assert_eq!(c.features, vec!["x", "y"]);
        assert_eq!(c.n_paths, vec![12]);
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn errors() {
        let mut c = ProjectConfig::default();
        assert!(matches!(
            c.merge_str("just words"),
            Err(ConfigError::Syntax { line: 1 })
        ));
        assert!(matches!(
            c.set("colour", "red"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            c.set("seed", "-1"),
            Err(ConfigError::Value { .. })
        ));
        assert!(matches!(
            c.set("origin", "1, 2, 3"),
            Err(ConfigError::Value { .. })
        ));
        assert!(matches!(
            c.set("origin", "200, 2"),
            Err(ConfigError::Value { .. })
        ));
    }

    #[test]
    fn validation() {
        let mut c = ProjectConfig::default();
        c.set("levels", "0.9, 0.9, 0.1").unwrap();
        assert!(c.validate().is_err());
        c.set("levels", "0.1, 0.5").unwrap();
        assert!(c.validate().is_err());
        c.set("levels", "1.5, 0.5").unwrap();
        assert!(c.validate().is_err());
        c.set("levels", "0.9, 0.5").unwrap();
        c.set("n_paths", "30, 0").unwrap();
        assert!(c.validate().is_err());
        c.set("n_paths", "30").unwrap();
        c.set("tau", "0").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut c = ProjectConfig::default();
        c.merge_str("input = in.csv\nfeatures = a, b\norigin = 11.5, 46.25\nvalue_policy = fraction\nout = o")
            .unwrap();
        let mut d = ProjectConfig::default();
        d.merge_str(&c.to_text()).unwrap();
        assert_eq!(c, d);
    }
}
