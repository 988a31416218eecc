use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use qss_core::heat::SolverConfig;
use qss_core::nonlinearity::NonlinearitySpec;
use qss_core::Nonlinearity;

use crate::NonlinearityArgs;

pub const FORMAT_VERSION: u32 = 1;

/// Invalid user input; reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Everything that determines a run; hashed into every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub format_version: u32,
    pub command: &'static str,
    pub nonlinearity: Option<NonlinearitySpec>,
    pub n_dim: Option<usize>,
    pub solver: Option<SolverConfig>,
    pub params: Value,
}

impl RunConfig {
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("run config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// Contents of `--config`: optional `n_dim` plus solver keys.
#[derive(Debug, Default)]
pub struct FileConfig {
    pub n_dim: Option<usize>,
    pub solver: Map<String, Value>,
}

pub fn load(path: Option<&Path>) -> anyhow::Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Err(config_error(format!("config file {} is empty", path.display())));
    }
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| config_error(format!("config file {} is not valid JSON: {e}", path.display())))?;
    let Value::Object(mut map) = value else {
        return Err(config_error("config must be a JSON object"));
    };
    let n_dim = match map.remove("n_dim") {
        None => None,
        Some(v) => Some(
            v.as_u64()
                .filter(|n| *n >= 1)
                .ok_or_else(|| config_error(format!("n_dim must be a positive integer, got {v}")))?
                as usize,
        ),
    };
    Ok(FileConfig { n_dim, solver: map })
}

impl FileConfig {
    /// `--n` wins over the file, then `default`.
    pub fn dimension(&self, flag: Option<usize>, default: usize) -> anyhow::Result<usize> {
        let n = flag.or(self.n_dim).unwrap_or(default);
        if n == 0 {
            return Err(config_error("dimension must be positive"));
        }
        Ok(n)
    }

    /// File keys laid over `base`; unknown keys are rejected.
    pub fn solver_over(&self, base: &SolverConfig) -> anyhow::Result<SolverConfig> {
        let mut merged = match serde_json::to_value(base)? {
            Value::Object(m) => m,
            _ => unreachable!("solver config is an object"),
        };
        for (k, v) in &self.solver {
            merged.insert(k.clone(), v.clone());
        }
        let cfg: SolverConfig = serde_json::from_value(Value::Object(merged))
            .map_err(|e| config_error(format!("invalid solver config: {e}")))?;
        cfg.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(cfg)
    }

    /// Commands without a PDE run accept no solver keys.
    pub fn reject_solver_keys(&self, command: &str) -> anyhow::Result<()> {
        if let Some(k) = self.solver.keys().next() {
            return Err(config_error(format!("{command} takes no solver settings, found {k:?}")));
        }
        Ok(())
    }
}

pub fn nonlinearity_spec(args: &NonlinearityArgs) -> anyhow::Result<NonlinearitySpec> {
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| config_error(format!("--{name} is required for --f {}", args.kind)))
    };
    let unused = |v: Option<f64>, name: &str| match v {
        Some(_) => Err(config_error(format!("--{name} does not apply to --f {}", args.kind))),
        None => Ok(()),
    };
    let spec = match args.kind.as_str() {
        "power" => {
            unused(args.r, "r")?;
            NonlinearitySpec::Power { p: need(args.p, "p")? }
        }
        "log_power" => NonlinearitySpec::LogPower { p: need(args.p, "p")?, r: need(args.r, "r")? },
        other => {
            unused(args.p, "p")?;
            unused(args.r, "r")?;
            match other {
                "exp_model" => NonlinearitySpec::ExpModel,
                "exp_inverse" => NonlinearitySpec::ExpInverse,
                name => NonlinearitySpec::Custom { name: name.to_string() },
            }
        }
    };
    Ok(spec)
}

pub fn build_nonlinearity(spec: &NonlinearitySpec) -> anyhow::Result<Nonlinearity> {
    spec.build().map_err(|e| config_error(e.to_string()))
}
