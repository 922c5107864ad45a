use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use graphost::experiments::{delta_grid, CsbmScenario, EvalMetric, NOISE_LEVELS};
use graphost::transform::{Regime, TransformConfig};
use serde::{Deserialize, Serialize};

/// Settings for `theory-validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoryConfig {
    pub intra_prob: f64,
    pub inter_prob: f64,
    pub transformed_intra_prob: f64,
    pub transformed_inter_prob: f64,
    /// Nodes per class in the theorem trials.
    pub class_size: usize,
    /// Nodes per class in the lemma check.
    pub lemma_class_size: usize,
    pub mean_distance: f64,
    /// Inferred from `intra_prob` and `inter_prob` when absent.
    pub regime: Option<Regime>,
    pub trials: usize,
    pub samples_per_trial: usize,
    pub simulation_samples: usize,
    pub max_classes: usize,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            intra_prob: 0.02,
            inter_prob: 0.01,
            transformed_intra_prob: 0.03,
            transformed_inter_prob: 0.005,
            class_size: 500,
            lemma_class_size: 2000,
            mean_distance: 2.0,
            regime: None,
            trials: 20,
            samples_per_trial: 1,
            simulation_samples: 100_000,
            max_classes: 10,
        }
    }
}

impl TheoryConfig {
    pub fn regime(&self) -> Result<Regime> {
        if let Some(r) = self.regime {
            return Ok(r);
        }
        if self.intra_prob > self.inter_prob {
            Ok(Regime::Homophilic)
        } else if self.intra_prob < self.inter_prob {
            Ok(Regime::Heterophilic)
        } else {
            bail!("intra_prob equals inter_prob, so no regime applies; set `regime` explicitly")
        }
    }
}

/// Effective configuration: defaults, then the config file, then flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub scenario: CsbmScenario,
    pub transform: TransformConfig,
    pub metric: EvalMetric,
    pub noise_levels: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub theory: TheoryConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0],
            out: PathBuf::from("graphost-out"),
            scenario: CsbmScenario::default(),
            transform: TransformConfig::default(),
            metric: EvalMetric::default(),
            noise_levels: NOISE_LEVELS.to_vec(),
            delta_grid: delta_grid(),
            theory: TheoryConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("invalid config file {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("the seed list is empty");
        }
        self.transform.validate()?;
        self.scenario.params.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"seeds": [3, 4], "transform": {"delta": 0.5}}"#).unwrap();
        assert_eq!(cfg.seeds, vec![3, 4]);
        assert_eq!(cfg.transform.delta, 0.5);
        assert!(cfg.transform.enable_filtering);
        assert_eq!(cfg.theory, TheoryConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sead": [1]}"#).is_err());
    }

    #[test]
    fn regime_inference() {
        let mut t = TheoryConfig::default();
        assert_eq!(t.regime().unwrap(), Regime::Homophilic);
        t.intra_prob = 0.01;
        t.inter_prob = 0.02;
        assert_eq!(t.regime().unwrap(), Regime::Heterophilic);
        t.inter_prob = 0.01;
        assert!(t.regime().is_err());
    }
}
