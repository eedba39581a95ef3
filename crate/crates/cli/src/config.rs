use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use robrec::{GeneratorSpec, LossSpec, NoiseSpec, SolverOpts};

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

/// Input of `robrec generate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub generator: GeneratorSpec,
    /// Without noise the outputs are exactly `A0 X`.
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default = "one")]
    pub m: usize,
    #[serde(default = "yes")]
    pub normalize: bool,
}

impl GenerateConfig {
    pub fn validate(&self) -> robrec::Result<()> {
        self.generator.validate()?;
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        if self.m == 0 {
            return Err(robrec::Error::InvalidArgument("m must be at least 1".into()));
        }
        Ok(())
    }
}

/// Input of `robrec estimate`; every field is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    #[serde(default)]
    pub loss: LossSpec,
    #[serde(default)]
    pub solver: SolverOpts,
    #[serde(default)]
    pub normalize: bool,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> robrec::Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| robrec::Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}
