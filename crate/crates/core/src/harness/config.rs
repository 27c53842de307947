use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clients::{AttackConfig, AttackMode, TrainConfig};
use crate::task::{TaskSize, TARGET_CLASS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid value for {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
}

/// Full description of one simulated training session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_clients: usize,
    pub rounds: u32,
    pub session_reward: f64,
    pub pmr: f64,
    pub pdr: f64,
    pub alpha: f64,
    pub non_iid_rate: f64,
    pub attack_mode: AttackMode,
    pub poly_degree: usize,
    /// Offset factors are drawn from `[-f_s_range, f_s_range]`.
    pub f_s_range: f64,
    pub seed: u64,
    /// Rounds in which malicious clients attack; `None` means every round.
    pub poisoned_rounds: Option<Vec<u32>>,
    pub dropout_prob: f64,
    /// When false every submission is aggregated (no filtering).
    pub defense: bool,
    pub scale_gamma: f64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub samples_per_client: usize,
    pub pretrain_epochs: usize,
    /// Directory for on-disk oracles; in-memory when unset.
    pub storage_dir: Option<PathBuf>,
    pub task: TaskSize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let attack = AttackConfig::default();
        let train = TrainConfig::default();
        ScenarioConfig {
            n_clients: 20,
            rounds: 5,
            session_reward: 100.0,
            pmr: attack.pmr,
            pdr: attack.pdr,
            alpha: attack.alpha,
            non_iid_rate: 0.7,
            attack_mode: attack.mode,
            poly_degree: 2048,
            f_s_range: 0.1,
            seed: 1,
            poisoned_rounds: None,
            dropout_prob: 0.0,
            defense: true,
            scale_gamma: attack.scale_gamma,
            epochs: train.epochs,
            lr: train.lr,
            batch_size: train.batch_size,
            samples_per_client: 100,
            pretrain_epochs: 5,
            storage_dir: None,
            task: TaskSize::default(),
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn attack(&self) -> AttackConfig {
        AttackConfig {
            mode: self.attack_mode,
            pmr: self.pmr,
            pdr: self.pdr,
            alpha: self.alpha,
            target_class: TARGET_CLASS,
            scale_gamma: self.scale_gamma,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            batch_size: self.batch_size,
        }
    }

    /// Number of malicious clients, `floor(pmr · n)`; zero for benign runs.
    pub fn malicious_count(&self) -> usize {
        if self.attack_mode == AttackMode::Benign {
            0
        } else {
            (self.pmr * self.n_clients as f64 + 1e-9).floor() as usize
        }
    }

    pub fn is_poisoned_round(&self, round: u32) -> bool {
        self.attack_mode != AttackMode::Benign
            && self.poisoned_rounds.as_ref().is_none_or(|r| r.contains(&round))
    }

    pub fn poisoned_round_set(&self) -> BTreeSet<u32> {
        (1..=self.rounds).filter(|&r| self.is_poisoned_round(r)).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_clients == 0 {
            return Err(invalid("n_clients", "must be at least 1"));
        }
        if self.rounds == 0 {
            return Err(invalid("rounds", "must be at least 1"));
        }
        if !(self.session_reward.is_finite() && self.session_reward > 0.0) {
            return Err(invalid("session_reward", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.non_iid_rate) {
            return Err(invalid("non_iid_rate", "outside [0, 1]"));
        }
        if !self.poly_degree.is_power_of_two() || self.poly_degree < ckks::MIN_POLY_DEGREE {
            return Err(invalid("poly_degree", "power of two >= 1024 required"));
        }
        if !(0.02..=100.0).contains(&self.f_s_range) {
            return Err(invalid("f_s_range", "outside [0.02, 100]"));
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(invalid("dropout_prob", "outside [0, 1)"));
        }
        if let Some(rounds) = &self.poisoned_rounds {
            if let Some(r) = rounds.iter().find(|&&r| r == 0 || r > self.rounds) {
                return Err(invalid("poisoned_rounds", format!("round {r} outside 1..={}", self.rounds)));
            }
        }
        if self.batch_size == 0 || !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(invalid("lr/batch_size", "must be positive"));
        }
        if self.samples_per_client == 0 {
            return Err(invalid("samples_per_client", "must be positive"));
        }
        if self.task.test == 0 {
            return Err(invalid("task.test", "empty test set"));
        }
        self.attack()
            .validate()
            .map_err(|e| invalid("attack", e.to_string()))?;
        Ok(())
    }
}
