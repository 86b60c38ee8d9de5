use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use roadrl_core::episode::EpisodeConfig;
use roadrl_core::experts::{DatasetNoise, ExpertConfig};
use roadrl_core::map_env::{load_scenario_file, Scenario};
use roadrl_core::trainer::{IlConfig, TrainConfig, TrainMode};
use roadrl_core::vehicle::{ActuationConfig, PlantConfig, ResponseArch, ResponseHyper};

/// Everything a command needs. Relative paths resolve against the working
/// directory. The top-level seed is copied into every component seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Scenario files (single scenario or bundle) used for data and training.
    pub scenarios: Vec<PathBuf>,
    pub actuation: ActuationConfig,
    pub episode: EpisodeConfig,
    pub expert: ExpertConfig,
    pub dataset: DatasetSection,
    pub il: IlConfig,
    pub pipeline: PipelineSection,
    pub train: TrainConfig,
    pub response: ResponseSection,
    pub eval: EvalSection,
    pub baseline: BaselineSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            scenarios: Vec::new(),
            actuation: ActuationConfig::default(),
            episode: EpisodeConfig::default(),
            expert: ExpertConfig::default(),
            dataset: DatasetSection::default(),
            il: IlConfig::default(),
            pipeline: PipelineSection::default(),
            train: TrainConfig::default(),
            response: ResponseSection::default(),
            eval: EvalSection::default(),
            baseline: BaselineSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub episodes: usize,
    /// Noise added to the executed expert command; targets stay clean.
    pub noise: DatasetNoise,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            episodes: 100,
            noise: DatasetNoise {
                acc_std: 0.3,
                steer_std: 0.02,
            },
        }
    }
}

/// What `train` starts from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub mode: TrainMode,
    /// il_then_rl: start from this policy checkpoint.
    pub pretrained: Option<PathBuf>,
    /// il_then_rl: pretrain on this dataset directory first.
    pub il_dataset: Option<PathBuf>,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            mode: TrainMode::PureRl,
            pretrained: None,
            il_dataset: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResponseSection {
    pub plant: PlantConfig,
    pub arch: ResponseArch,
    pub hyper: ResponseHyper,
    /// Ticks of random commands driven through the plant.
    pub log_rows: Option<usize>,
    /// Low-pass alpha plotted next to the fitted model.
    pub compare_alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub episodes: usize,
    /// Scenario files to evaluate on; empty means the training scenarios.
    pub scenarios: Option<Vec<PathBuf>>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            episodes: 50,
            scenarios: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub episodes: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self { episodes: 2000 }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    /// Apply flag overrides and propagate the seed.
    pub fn finish(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out {
            self.out = o;
        }
        self.il.seed = self.seed;
        self.train.seed = self.seed;
        self.response.hyper.seed = self.seed;
        self
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.episode.validate()?;
        self.expert.validate()?;
        self.il.validate()?;
        self.train.validate()?;
        self.response.plant.validate()?;
        self.response.arch.validate()?;
        let n = &self.dataset.noise;
        if !(n.acc_std >= 0.0 && n.steer_std >= 0.0) {
            bail!("invalid configuration: dataset noise must be non-negative");
        }
        if let Some(a) = self.response.compare_alpha {
            if !(a > 0.0 && a <= 1.0) {
                bail!("invalid configuration: compare_alpha {a} not in (0, 1]");
            }
        }
        if let ActuationConfig::LowPass { alpha } = self.actuation {
            if !(alpha > 0.0 && alpha <= 1.0) {
                bail!("invalid configuration: low-pass alpha {alpha} not in (0, 1]");
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load_scenarios(paths: &[PathBuf]) -> anyhow::Result<Vec<Scenario>> {
        let mut out = Vec::new();
        for p in paths {
            out.extend(load_scenario_file(p)?);
        }
        Ok(out)
    }

    pub fn training_scenarios(&self) -> anyhow::Result<Vec<Scenario>> {
        if self.scenarios.is_empty() {
            bail!("no scenario files configured");
        }
        Self::load_scenarios(&self.scenarios)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_echo_roundtrips() {
        let c = RunConfig::default();
        let back: RunConfig = toml::from_str(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn seed_propagates() {
        let c = RunConfig::default().finish(Some(9), None);
        assert_eq!((c.il.seed, c.train.seed, c.response.hyper.seed), (9, 9, 9));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[train]\ngama = 0.9").is_err());
    }
}
