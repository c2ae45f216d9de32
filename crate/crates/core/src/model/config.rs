use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where the CM score enters the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Gate the normalized ASV embedding (early integration).
    S1,
    /// Gate the post-gate hidden activation, just before the output layer.
    S2,
    /// Fuse a cosine ASV score with the CM score in one affine layer.
    S3,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::S1 => "s1",
            Strategy::S2 => "s2",
            Strategy::S3 => "s3",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Strategy::S1 => 1,
            Strategy::S2 => 2,
            Strategy::S3 => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Strategy::S1),
            2 => Some(Strategy::S2),
            3 => Some(Strategy::S3),
            _ => None,
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(Strategy::S1),
            "s2" => Ok(Strategy::S2),
            "s3" => Ok(Strategy::S3),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Which CM embeddings feed the CM path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmInput {
    /// `[enroll_cm | test_cm]`.
    Both,
    TestOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub strategy: Strategy,
    pub asv_dim: usize,
    pub cm_dim: usize,
    pub hidden_cm: usize,
    pub hidden_asv: usize,
    pub hidden_post: usize,
    pub use_batchnorm: bool,
    pub dropout_rate: f64,
    pub seed: u64,
    pub cm_input: CmInput,
    /// One `w_a` for both CM-path tReLU sites; otherwise one per site.
    pub share_wa: bool,
    /// Keep `w_a` diagonal (off-diagonal entries stay zero).
    pub diagonal_wa: bool,
    /// `false` replaces every tReLU by a plain ReLU and drops `w_a`.
    pub trelu: bool,
}

pub const DEFAULT_DROPOUT: f64 = 0.2;

/// Default ASV-path width of the experiment config, as a multiple of `asv_dim`.
/// A dimension-preserving ASV layer memorizes the few training speakers of a
/// desk-scale store and generalizes poorly to held-out ones.
pub const ASV_WIDTH_FACTOR: usize = 8;

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_asv: ASV_WIDTH_FACTOR * 32,
            ..ModelConfig::new(Strategy::S1, 32, 16)
        }
    }
}

impl ModelConfig {
    /// Config with dimension-preserving hidden widths and no regularization.
    pub fn new(strategy: Strategy, asv_dim: usize, cm_dim: usize) -> Self {
        ModelConfig {
            strategy,
            asv_dim,
            cm_dim,
            hidden_cm: cm_dim,
            hidden_asv: asv_dim,
            hidden_post: asv_dim,
            use_batchnorm: false,
            dropout_rate: 0.0,
            seed: 0,
            cm_input: CmInput::Both,
            share_wa: true,
            diagonal_wa: false,
            trelu: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("asv_dim", self.asv_dim),
            ("cm_dim", self.cm_dim),
            ("hidden_cm", self.hidden_cm),
            ("hidden_asv", self.hidden_asv),
            ("hidden_post", self.hidden_post),
        ];
        for (name, d) in dims {
            if d == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    pub(crate) fn cm_input_dim(&self) -> usize {
        match self.cm_input {
            CmInput::Both => 2 * self.cm_dim,
            CmInput::TestOnly => self.cm_dim,
        }
    }
}
