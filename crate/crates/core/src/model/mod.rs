//! SASV fusion network with S1/S2/S3 CM-score integration strategies.

mod checkpoint;
mod config;
mod network;
mod params;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{CmInput, ModelConfig, Strategy, ASV_WIDTH_FACTOR, DEFAULT_DROPOUT};
pub use network::{cosine_score, enroll_aggregate, saga_gate, DropoutKey, ForwardTrace, FusionModel, Mode, TrialInput};
pub use params::{group_digest, BnRunning, GradientSet, GroupSet, GroupTag, Param, ParamGroup, ParamKind};
