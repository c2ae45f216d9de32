//! Multi-task loss, optimizer, conventional joint training and alternating
//! (freeze one branch per iteration) training.

mod atmm;
mod conventional;
mod engine;
mod loss;
mod optim;
mod report;
mod scoring;

pub use atmm::{atmm_round, atmm_round_prepared, train_atmm, AtmmConfig, AtmmStep, PSchedule, PreparedAtmm};
pub use conventional::{train_conventional, ConventionalConfig, EpochReport};
pub use loss::{total_loss, trial_loss, BatchLoss, LossConfig};
pub use optim::{apply_update, OptimizerConfig, OptimizerKind, OptimizerState};
pub use report::{atmm_rows, epoch_rows, format_training_report, write_training_report, ReportRow};
pub use scoring::{cosine_scores, export_scores};
