//! Embedding store, its binary format and synthetic generation.

mod store;
mod store_io;
mod synth;

pub use store::{EmbeddingRecord, EmbeddingStore, ResolvedTrial};
pub use store_io::{decode_store, encode_store, read_store, write_store, STORE_MAGIC, STORE_VERSION};
pub use synth::{generate, latent, speaker_id, SynthConfig, SynthLatent};
