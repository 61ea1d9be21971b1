//! Run configuration read from TOML, and the manifest written next to outputs.

use entwit_core::{
    AnnealSchedule, FitConfig, SamplerConfig, SpinModel, SpinModelSpec, WitnessMode,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "ENTWIT_THREADS";

/// Every tunable of a run. Unknown keys are rejected at load time.
///
/// ```toml
/// seed = 7
/// out_dir = "runs/n8"
///
/// [sampler]
/// chains = 4
///
/// [anneal]
/// restarts = 16
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds the sampler and the annealer unless their own seeds are set.
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// Worker threads; `ENTWIT_THREADS` and then the core count otherwise.
    pub threads: Option<usize>,
    pub witness_mode: WitnessMode,
    pub fit: FitConfig,
    pub sampler: SamplerConfig,
    pub anneal: AnnealSchedule,
    pub model: ModelConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            out_dir: None,
            threads: None,
            witness_mode: WitnessMode::default(),
            fit: FitConfig::default(),
            sampler: SamplerConfig::default(),
            anneal: AnnealSchedule::default(),
            model: ModelConfig::default(),
        }
    }
}

/// Spin model used by `gen-data` and by `compare` for quantum Fisher information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub model: SpinModel,
    pub n_sites: usize,
    pub temperature: f64,
    pub g: f64,
    pub r_max: usize,
    pub uncertainty_floor: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let s = SpinModelSpec::heisenberg(8, 1.0, 4);
        ModelConfig {
            model: s.model,
            n_sites: s.n_sites,
            temperature: s.temperature,
            g: s.g,
            r_max: s.r_max,
            uncertainty_floor: s.uncertainty_floor,
        }
    }
}

impl ModelConfig {
    pub fn spec(&self) -> SpinModelSpec {
        SpinModelSpec {
            model: self.model,
            n_sites: self.n_sites,
            temperature: self.temperature,
            g: self.g,
            r_max: self.r_max,
            uncertainty_floor: self.uncertainty_floor,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    /// Pushes the global seed into the sampler and annealer.
    pub fn apply_seed(&mut self) {
        if let Some(seed) = self.seed {
            self.sampler.seed = seed;
            self.anneal.seed = seed;
        }
    }

    pub fn thread_count(&self) -> Result<Option<usize>, ConfigError> {
        if let Some(t) = self.threads {
            return Ok(Some(t));
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| ConfigError(format!("{THREADS_ENV}={v} is not a thread count"))),
            Err(_) => Ok(None),
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Everything needed to rerun a command bit-identically.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub threads: usize,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            argv: std::env::args().collect(),
            threads: rayon::current_num_threads(),
            config: config.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let text = toml::to_string(&c).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sede = 3").is_err());
        assert!(toml::from_str::<RunConfig>("[sampler]\nchain = 3").is_err());
    }

    #[test]
    fn seed_reaches_sampler_and_annealer() {
        let mut c: RunConfig = toml::from_str("seed = 11\n[fit]\nepsilon = 0.02").unwrap();
        c.apply_seed();
        assert_eq!(c.sampler.seed, 11);
        assert_eq!(c.anneal.seed, 11);
        assert_eq!(c.fit.epsilon, 0.02);
    }
}
