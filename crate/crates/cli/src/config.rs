//! Flat `key=value` run configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use imopt::{FeasibleSet, SetupKind};

/// Solvers that `run` can dispatch.
pub const SOLVERS: [&str; 12] = [
    "gm",
    "gm_restart",
    "fgm",
    "fgm_universal",
    "fgm_restart",
    "fw",
    "mirror_prox",
    "mp_universal",
    "mp_restart",
    "saddle",
    "sinkhorn",
    "prox_sinkhorn",
];

/// Problem generators that `run` can instantiate.
pub const MODELS: [&str; 11] = [
    "quadratic",
    "box_quadratic",
    "lasso",
    "simplex_quadratic",
    "holder_l1",
    "holder_quadratic",
    "affine_vi",
    "holder_vi",
    "pennies",
    "game",
    "ot",
];

/// A configuration error, naming the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config field `{field}`: {message}")]
pub struct ConfigError {
    /// Key (or `line N` for syntax errors).
    pub field: String,
    /// What is wrong.
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// A parsed run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Solver name, one of [`SOLVERS`].
    pub solver: String,
    /// Problem generator, one of [`MODELS`].
    pub model: String,
    /// Set descriptor overriding the generator's set.
    pub set: Option<FeasibleSet>,
    /// Prox setup.
    pub setup: SetupKind,
    /// Generator seed.
    pub seed: u64,
    /// Dimension of generated problems.
    pub n: usize,
    /// Target accuracy.
    pub eps: f64,
    /// Initial `L`; defaults to the problem's constant.
    pub l0: Option<f64>,
    /// Injected model error δ.
    pub delta: f64,
    /// Injected prox error δ̃.
    pub delta_tilde: f64,
    /// Iteration cap; each solver has its own default.
    pub max_iter: Option<usize>,
    /// Condition number of generated quadratics.
    pub cond: f64,
    /// Hölder exponent for `holder_vi`.
    pub nu: f64,
    /// Proximal Sinkhorn starting γ; defaults to `max C`.
    pub gamma: Option<f64>,
    /// OT instance file, resolved against the config's directory.
    pub instance: Option<PathBuf>,
    /// Compare against the exact OT oracle.
    pub oracle: bool,
    /// Trace CSV path, resolved against the config's directory.
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            solver: String::new(),
            model: String::new(),
            set: None,
            setup: SetupKind::Euclidean,
            seed: 0,
            n: 10,
            eps: 1e-3,
            l0: None,
            delta: 0.0,
            delta_tilde: 0.0,
            max_iter: None,
            cond: 100.0,
            nu: 0.0,
            gamma: None,
            instance: None,
            oracle: false,
            output: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::new(key, format!("cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::new(key, format!("expected on/off, got `{value}`"))),
    }
}

impl RunConfig {
    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    /// Relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut set_text = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::new(format!("line {}", i + 1), "expected key=value"))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "solver" => cfg.solver = value.to_string(),
                "model" => cfg.model = value.to_string(),
                "set" => set_text = Some(value.to_string()),
                "setup" => {
                    cfg.setup = match value {
                        "euclidean" => SetupKind::Euclidean,
                        "entropy" => SetupKind::Entropy,
                        _ => return Err(ConfigError::new(key, format!("unknown setup `{value}`"))),
                    }
                }
                "seed" => cfg.seed = parse_num(key, value)?,
                "n" => cfg.n = parse_num(key, value)?,
                "eps" => cfg.eps = parse_num(key, value)?,
                "l0" => cfg.l0 = Some(parse_num(key, value)?),
                "delta" => cfg.delta = parse_num(key, value)?,
                "delta_tilde" => cfg.delta_tilde = parse_num(key, value)?,
                "max_iter" => cfg.max_iter = Some(parse_num(key, value)?),
                "cond" => cfg.cond = parse_num(key, value)?,
                "nu" => cfg.nu = parse_num(key, value)?,
                "gamma" => cfg.gamma = Some(parse_num(key, value)?),
                "instance" => cfg.instance = Some(base.join(value)),
                "oracle" => cfg.oracle = parse_bool(key, value)?,
                "output" => cfg.output = Some(base.join(value)),
                _ => return Err(ConfigError::new(key, "unknown key")),
            }
        }
        if cfg.model.is_empty() && cfg.instance.is_some() {
            cfg.model = "ot".into();
        }
        if let Some(text) = set_text {
            cfg.set = Some(
                FeasibleSet::parse_with_dim(&text, Some(cfg.n))
                    .map_err(|e| ConfigError::new("set", e.to_string()))?,
            );
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and parses a config file.
    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("path", format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.solver.is_empty() {
            return Err(ConfigError::new("solver", "missing"));
        }
        if !SOLVERS.contains(&self.solver.as_str()) {
            return Err(ConfigError::new(
                "solver",
                format!("unknown solver `{}` (known: {})", self.solver, SOLVERS.join(", ")),
            ));
        }
        if self.model.is_empty() {
            return Err(ConfigError::new("model", "missing"));
        }
        if !MODELS.contains(&self.model.as_str()) {
            return Err(ConfigError::new(
                "model",
                format!("unknown model `{}` (known: {})", self.model, MODELS.join(", ")),
            ));
        }
        let ot_solver = matches!(self.solver.as_str(), "sinkhorn" | "prox_sinkhorn");
        if ot_solver != (self.model == "ot") {
            return Err(ConfigError::new(
                "model",
                format!("model `{}` does not fit solver `{}`", self.model, self.solver),
            ));
        }
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::new(key, "must be positive"))
            }
        };
        positive("eps", self.eps)?;
        positive("cond", self.cond)?;
        if let Some(l0) = self.l0 {
            positive("l0", l0)?;
        }
        if let Some(g) = self.gamma {
            positive("gamma", g)?;
        }
        if !(self.delta >= 0.0) {
            return Err(ConfigError::new("delta", "must be nonnegative"));
        }
        if !(self.delta_tilde >= 0.0) {
            return Err(ConfigError::new("delta_tilde", "must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.nu) {
            return Err(ConfigError::new("nu", "must lie in [0, 1]"));
        }
        if self.n == 0 {
            return Err(ConfigError::new("n", "must be at least 1"));
        }
        if self.max_iter == Some(0) {
            return Err(ConfigError::new("max_iter", "must be at least 1"));
        }
        Ok(())
    }
}
