//! Experiment configuration, read from TOML.
//!
//! Every section and key is optional; unknown keys are rejected.
//!
//! ```toml
//! [data]        # synthetic store
//! n_speakers = 50
//! [protocol]    # speaker split and trial quotas
//! holdout_speakers = 10
//! [model]
//! strategy = "s1"
//! [training]
//! atmm = true
//! [atmm]
//! rounds = 5
//! [optimizer]
//! learning_rate = 1e-3
//! [eval.adcf]
//! pi_tar = 0.9405
//! [eval.bootstrap]
//! replicates = 1000
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::SynthConfig;
use crate::error::{Error, Result};
use crate::metrics::{ADcfConfig, BootstrapConfig};
use crate::model::ModelConfig;
use crate::training::{AtmmConfig, ConventionalConfig, OptimizerConfig};
use crate::trials::{PairingConfig, DEFAULT_ENROLL_SIZE};

/// Speaker split and per-utterance trial quotas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// The last this-many speakers (in store order) form the evaluation split.
    pub holdout_speakers: usize,
    pub enroll_size: usize,
    /// Targets, non-targets and spoofs per test utterance of the CM dataset.
    pub cm_quota: [usize; 3],
    /// Targets and non-targets per test utterance of the ASV dataset.
    pub asv_quota: [usize; 2],
    pub eval_quota: [usize; 3],
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            holdout_speakers: 10,
            enroll_size: DEFAULT_ENROLL_SIZE,
            cm_quota: [20, 20, 20],
            asv_quota: [20, 20],
            eval_quota: [5, 5, 5],
            seed: 0,
        }
    }
}

impl ProtocolConfig {
    fn pairing(&self, q: [usize; 3], stream: u64) -> PairingConfig {
        PairingConfig {
            per_utt_targets: q[0],
            per_utt_nontargets: q[1],
            per_utt_spoofs: q[2],
            enroll_size: self.enroll_size,
            seed: self.seed.wrapping_add(stream),
        }
    }

    pub fn cm_pairing(&self) -> PairingConfig {
        self.pairing(self.cm_quota, 0)
    }

    pub fn asv_pairing(&self) -> PairingConfig {
        self.pairing([self.asv_quota[0], self.asv_quota[1], 0], 1)
    }

    pub fn eval_pairing(&self) -> PairingConfig {
        self.pairing(self.eval_quota, 2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Alternating training when set, conventional joint training otherwise.
    pub atmm: bool,
    /// Conventional training only.
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let c = ConventionalConfig::default();
        TrainingConfig {
            atmm: true,
            epochs: c.epochs,
            batch_size: c.batch_size,
            lambda: c.lambda,
            seed: c.seed,
        }
    }
}

impl TrainingConfig {
    pub fn conventional(&self) -> ConventionalConfig {
        ConventionalConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lambda: self.lambda,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub adcf: ADcfConfig,
    pub bootstrap: BootstrapConfig,
    pub hist_bins: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            adcf: ADcfConfig::default(),
            bootstrap: BootstrapConfig::default(),
            hist_bins: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: SynthConfig,
    pub protocol: ProtocolConfig,
    /// `asv_dim` and `cm_dim` are taken from the store at training time.
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub atmm: AtmmConfig,
    pub optimizer: OptimizerConfig,
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_owned()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ExperimentConfig::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.model.validate()?;
        self.atmm.validate()?;
        self.optimizer.validate()?;
        self.eval.adcf.validate()?;
        if self.protocol.enroll_size == 0 {
            return Err(Error::Config("enroll_size must be positive".into()));
        }
        if self.training.batch_size == 0 {
            return Err(Error::Config("training batch_size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.training.lambda) {
            return Err(Error::Config(format!("training lambda must be in [0, 1], got {}", self.training.lambda)));
        }
        if self.eval.hist_bins == 0 {
            return Err(Error::Config("hist_bins must be positive".into()));
        }
        Ok(())
    }
}
