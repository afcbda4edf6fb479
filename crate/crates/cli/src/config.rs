//! Model file schema.

use std::path::{Path, PathBuf};

use robustmv_core::{AmbiguitySpec, MarketParams, SimConfig, ThetaProcessSchedule};
use serde::Deserialize;
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: Format,
    /// Written to stdout when absent.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n_paths: Option<usize>,
    pub n_steps: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub antithetic: bool,
    pub record_every: Option<usize>,
    /// Scenario the market follows; the worst case when absent.
    pub schedule: Option<ThetaProcessSchedule>,
}

impl SimulateSection {
    pub fn sim_config(&self, paths: Option<usize>, steps: Option<usize>, seed: Option<u64>) -> SimConfig {
        let base = SimConfig::default();
        SimConfig {
            n_paths: paths.or(self.n_paths).unwrap_or(base.n_paths),
            n_steps: steps.or(self.n_steps).unwrap_or(base.n_steps),
            seed: seed.or(self.seed).unwrap_or(base.seed),
            antithetic: self.antithetic,
            record_every: self.record_every.unwrap_or(16),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub market: MarketParams,
    pub ambiguity: AmbiguitySpec,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Partial configs merged over this one, one run each.
    #[serde(default)]
    pub sweep: Vec<Value>,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.market.validate()?;
        self.ambiguity.validate(&self.market)?;
        if let Some(sched) = self.simulate.as_ref().and_then(|s| s.schedule.as_ref()) {
            sched.validate(&self.ambiguity, &self.market)?;
        }
        Ok(())
    }
}

/// Recursive object merge; anything else in `patch` replaces `base`.
fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}

pub struct LoadedConfig {
    pub config: ModelConfig,
    raw: Value,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let raw: Value = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("malformed config: {e}")))?;
        let config = parse(&raw)?;
        Ok(LoadedConfig { config, raw })
    }

    /// One config per sweep entry, each validated.
    pub fn sweep(&self) -> Result<Vec<ModelConfig>, CliError> {
        self.config
            .sweep
            .iter()
            .enumerate()
            .map(|(k, patch)| {
                let mut v = self.raw.clone();
                if let Value::Object(m) = &mut v {
                    m.remove("sweep");
                }
                merge(&mut v, patch);
                parse(&v).map_err(|e| CliError::Input(format!("sweep entry {k}: {e}")))
            })
            .collect()
    }
}

fn parse(raw: &Value) -> Result<ModelConfig, CliError> {
    let config: ModelConfig =
        serde_json::from_value(raw.clone()).map_err(|e| CliError::Input(format!("invalid config: {e}")))?;
    config.validate()?;
    Ok(config)
}
