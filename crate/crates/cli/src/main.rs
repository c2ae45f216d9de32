use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sasv_core::config::ExperimentConfig;
use sasv_core::data::{generate, read_store, write_store, EmbeddingStore};
use sasv_core::experiment::{build_protocols, evaluate, format_ablation, run_ablation, train, ExperimentData};
use sasv_core::metrics::{format_histogram_csv, read_scores, score_histograms, write_metric_report, write_scores, ScoreColumn};
use sasv_core::model::{read_checkpoint, write_checkpoint, Strategy};
use sasv_core::training::{export_scores, write_training_report};
use sasv_core::trials::{read_protocol, write_metadata, write_protocol, AtmmDatasets, Trial};

const STORE_FILE: &str = "store.sgem";
const METADATA_FILE: &str = "metadata.tsv";
const CM_PROTOCOL: &str = "cm_train.tsv";
const ASV_PROTOCOL: &str = "asv_train.tsv";
const EVAL_PROTOCOL: &str = "eval.tsv";
const CHECKPOINT_FILE: &str = "model.saga";
const REPORT_FILE: &str = "training_report.tsv";
const SCORES_FILE: &str = "scores.tsv";
const METRICS_FILE: &str = "metrics.tsv";

/// Spoofing-aware speaker verification: synthetic data, fusion training and evaluation.
#[derive(Parser)]
#[command(name = "sasv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic embedding store, its metadata and trial lists.
    Gen(GenArgs),
    /// Train a fusion model and write a checkpoint plus training report.
    Train(TrainArgs),
    /// Score a trial list with a checkpoint and report SASV-EER and min a-DCF.
    Eval(EvalArgs),
    /// Train and score all eight BN x dropout x ATMM combinations.
    Ablate(AblateArgs),
    /// Per-class score histograms of a score file, as CSV.
    Hist(HistArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    S1,
    S2,
    S3,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::S1 => Strategy::S1,
            StrategyArg::S2 => Strategy::S2,
            StrategyArg::S3 => Strategy::S3,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ColumnArg {
    Sasv,
    Cm,
}

#[derive(Args)]
struct GenArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// TOML experiment config; `[data]` and `[protocol]` are used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    speakers: Option<usize>,
    /// Generator seed.
    #[arg(long)]
    seed: Option<u64>,
}

/// Model and training overrides shared by `train` and `ablate`.
#[derive(Args)]
struct ModelFlags {
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long, value_enum)]
    bn: Option<Switch>,
    #[arg(long, value_name = "RATE")]
    dropout: Option<f64>,
    /// Seeds model initialization, dropout and training order.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding `cm_train.tsv` and `asv_train.tsv`; built from the store when absent.
    #[arg(long)]
    protocol: Option<PathBuf>,
    /// Output directory for the checkpoint and training report.
    #[arg(long)]
    out: PathBuf,
    /// Checkpoint path; defaults to `model.saga` in the output directory.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    atmm: Option<Switch>,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Trial list, or a directory holding `eval.tsv`.
    #[arg(long)]
    protocol: PathBuf,
    /// Output directory for scores and the metric report.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bootstrap seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding `cm_train.tsv`, `asv_train.tsv` and `eval.tsv`.
    #[arg(long)]
    protocol: Option<PathBuf>,
    /// Summary table path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Args)]
struct HistArgs {
    #[arg(long)]
    scores: PathBuf,
    /// Defaults to `hist_bins` of the config.
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, value_enum, default_value = "sasv")]
    column: ColumnArg,
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Ablate(a) => ablate_cmd(a),
        Command::Hist(a) => hist_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("config {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn load_store(path: &Path) -> Result<EmbeddingStore> {
    read_store(path).with_context(|| format!("store {}", path.display()))
}

fn load_protocol(path: &Path) -> Result<Vec<Trial>> {
    read_protocol(path).with_context(|| format!("protocol {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(n) = a.speakers {
        cfg.data.n_speakers = n;
    }
    if let Some(s) = a.seed {
        cfg.data.seed = s;
    }
    cfg.validate()?;
    let store = generate(&cfg.data)?;
    let data = build_protocols(&store.metadata(), &cfg.protocol)?;
    create_dir(&a.out)?;
    write_store(&store, a.out.join(STORE_FILE))?;
    write_metadata(&store.metadata(), a.out.join(METADATA_FILE))?;
    write_protocol(&data.datasets.cm_dataset, a.out.join(CM_PROTOCOL))?;
    write_protocol(&data.datasets.asv_dataset, a.out.join(ASV_PROTOCOL))?;
    write_protocol(&data.eval_trials, a.out.join(EVAL_PROTOCOL))?;
    Ok(())
}

fn apply_model_flags(cfg: &mut ExperimentConfig, f: &ModelFlags) -> Result<()> {
    if let Some(s) = f.strategy {
        cfg.model.strategy = s.into();
    }
    if let Some(bn) = f.bn {
        cfg.model.use_batchnorm = bn.on();
    }
    if let Some(r) = f.dropout {
        cfg.model.dropout_rate = r;
    }
    if let Some(s) = f.seed {
        cfg.model.seed = s;
        cfg.atmm.seed = s;
        cfg.training.seed = s;
    }
    cfg.validate()?;
    Ok(())
}

fn training_data(store: &EmbeddingStore, cfg: &ExperimentConfig, dir: Option<&Path>) -> Result<AtmmDatasets> {
    match dir {
        Some(d) => Ok(AtmmDatasets::new(load_protocol(&d.join(CM_PROTOCOL))?, load_protocol(&d.join(ASV_PROTOCOL))?)?),
        None => Ok(build_protocols(&store.metadata(), &cfg.protocol)?.datasets),
    }
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(s) = a.atmm {
        cfg.training.atmm = s.on();
    }
    apply_model_flags(&mut cfg, &a.model)?;
    let store = load_store(&a.store)?;
    let datasets = training_data(&store, &cfg, a.protocol.as_deref())?;
    let out = train(&cfg, &store, &datasets)?;
    create_dir(&a.out)?;
    let ckpt = a.checkpoint.unwrap_or_else(|| a.out.join(CHECKPOINT_FILE));
    write_checkpoint(&out.model, &ckpt).with_context(|| format!("writing {}", ckpt.display()))?;
    write_training_report(&out.report, a.out.join(REPORT_FILE))?;
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.eval.bootstrap.seed = s;
    }
    let store = load_store(&a.store)?;
    let model = read_checkpoint(&a.checkpoint).with_context(|| format!("checkpoint {}", a.checkpoint.display()))?;
    let mc = model.config();
    if (mc.asv_dim, mc.cm_dim) != (store.asv_dim(), store.cm_dim()) {
        bail!(
            "dimension mismatch: checkpoint expects asv_dim {} cm_dim {}, store has {} and {}",
            mc.asv_dim,
            mc.cm_dim,
            store.asv_dim(),
            store.cm_dim()
        );
    }
    let path = if a.protocol.is_dir() { a.protocol.join(EVAL_PROTOCOL) } else { a.protocol.clone() };
    let trials = load_protocol(&path)?;
    let scores = export_scores(&model, &trials, &store)?;
    let rows = evaluate(&scores, &cfg.eval)?;
    create_dir(&a.out)?;
    write_scores(&scores, a.out.join(SCORES_FILE))?;
    write_metric_report(&rows, a.out.join(METRICS_FILE))?;
    Ok(())
}

fn ablate_cmd(a: AblateArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    apply_model_flags(&mut cfg, &a.model)?;
    let store = load_store(&a.store)?;
    let data = match a.protocol.as_deref() {
        Some(d) => ExperimentData {
            datasets: training_data(&store, &cfg, Some(d))?,
            eval_trials: load_protocol(&d.join(EVAL_PROTOCOL))?,
        },
        None => build_protocols(&store.metadata(), &cfg.protocol)?,
    };
    let rows = run_ablation(&cfg, &store, &data)?;
    emit(&format_ablation(&rows), a.out.as_deref())
}

fn hist_cmd(a: HistArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let scores = read_scores(&a.scores).with_context(|| format!("scores {}", a.scores.display()))?;
    let column = match a.column {
        ColumnArg::Sasv => ScoreColumn::Sasv,
        ColumnArg::Cm => ScoreColumn::Cm,
    };
    let bins = a.bins.unwrap_or(cfg.eval.hist_bins);
    let h = score_histograms(&scores.class_scores(column), bins)?;
    emit(&format_histogram_csv(&h), a.out.as_deref())
}
