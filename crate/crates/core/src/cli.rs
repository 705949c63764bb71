//! Command-line surface. Exit codes: 0 success, 1 runtime failure, 2 usage
//! or configuration error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use crate::config::RunConfigFile;
use crate::data::{
    convert_chexpert, linear_probe, load_images, load_manifest, preprocess, write_synthetic_dataset, ProbeConfig,
    SyntheticConfig, DEFAULT_PREVALENCE, DEFAULT_RAW_SIZE, PROBE_GATE,
};
use crate::domain::{PathologySet, NO_FINDING};
use crate::error::{Error, Result};
use crate::eval::{compare, evaluate, EvalReport, ReferenceTable, REFERENCE_NAMES};
use crate::inference::{classify, ZeroShotResult};
use crate::losses::{ConsistencyNegatives, LossConfigId};
use crate::reports::TemplateTable;
use crate::trainer::{
    load_checkpoint, prepare_from_disk, run_batch_ablation, run_loss_ablation, test_report, train, Prepared, RunDir,
    TrainOptions, TrainState, DEFAULT_BATCH_SIZES,
};

pub const RUNS_ROOT_ENV: &str = "MOCOCLIP_RUNS";

#[derive(Parser, Debug)]
#[command(name = "mococlip", version, about = "Image-text contrastive pretraining with a momentum key queue, zero-shot evaluation and ablations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the synthetic toy benchmark (PNG images plus manifest.csv).
    SynthData(SynthArgs),
    /// Train a model and write a run directory.
    Train(TrainArgs),
    /// Zero-shot predictions for every image of a manifest.
    Zeroshot(ZeroShotArgs),
    /// Per-pathology ROC-AUC of a predictions file against a manifest.
    Eval(EvalArgs),
    /// Loss-configuration or batch-size ablation.
    Ablate(AblateArgs),
    /// Side-by-side comparison of finished runs and transcribed reference tables.
    Report(ReportArgs),
    /// Convert a CheXpert-style label CSV into a manifest.
    ConvertChexpert(ConvertArgs),
    /// Linear-probe learnability check of a labelled image set.
    Probe(ProbeArgs),
    /// Print or write the built-in report and prompt templates.
    Templates(TemplatesArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Number of leading NIH classes (2..=15; 15 selects the full set).
    #[arg(long, default_value_t = 4)]
    pub pathologies: usize,
    /// Side length of the written images in pixels.
    #[arg(long, default_value_t = DEFAULT_RAW_SIZE)]
    pub size: usize,
    /// Per-finding probability of being present.
    #[arg(long, default_value_t = DEFAULT_PREVALENCE)]
    pub prevalence: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value = "data/toy")]
    pub out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
    #[value(name = "C", alias = "c")]
    C,
    #[value(name = "D", alias = "d")]
    D,
}

impl From<LossArg> for LossConfigId {
    fn from(a: LossArg) -> Self {
        match a {
            LossArg::A => LossConfigId::A,
            LossArg::B => LossConfigId::B,
            LossArg::C => LossConfigId::C,
            LossArg::D => LossConfigId::D,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NegativesArg {
    InBatch,
    Queue,
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// Run configuration file (TOML with [data] and [train] tables).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Manifest CSV; overrides data.manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory the manifest's image paths are relative to [default: manifest directory].
    #[arg(long)]
    pub image_root: Option<PathBuf>,
    /// Template table overriding the built-in one.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Label vocabulary of the manifest.
    #[arg(long, default_value = "nih", value_parser = ["nih", "chexpert"])]
    pub profile: String,
}

/// Hyperparameters. A flag overrides the config file only when given.
#[derive(Args, Debug)]
pub struct HyperArgs {
    /// Loss configuration: A image queue, B momentum text, C momentum image, D all.
    #[arg(long, value_enum, default_value_t = LossArg::A)]
    pub loss_config: LossArg,
    /// Weight of the auxiliary loss terms.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Negatives of the momentum-consistency terms.
    #[arg(long, value_enum, default_value_t = NegativesArg::InBatch)]
    pub consistency_negatives: NegativesArg,
    #[arg(long, default_value_t = crate::trainer::DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
    #[arg(long, default_value_t = crate::trainer::DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = crate::trainer::DEFAULT_LR)]
    pub lr: f64,
    #[arg(long, default_value_t = crate::trainer::DEFAULT_WEIGHT_DECAY)]
    pub weight_decay: f64,
    /// Momentum-encoder EMA coefficient m.
    #[arg(long, default_value_t = crate::trainer::DEFAULT_MOMENTUM)]
    pub momentum: f64,
    /// Key queue capacity K.
    #[arg(long, default_value_t = 1024)]
    pub queue_capacity: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Encoder input side length.
    #[arg(long, default_value_t = 32)]
    pub image_size: usize,
    /// Joint embedding dimension d.
    #[arg(long, default_value_t = 64)]
    pub embed_dim: usize,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Run directory name [default: <loss>-bs<batch>-seed<seed>].
    #[arg(long)]
    pub run_id: Option<String>,
    #[arg(long, env = RUNS_ROOT_ENV, default_value = "runs")]
    pub runs_root: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    /// One row per (image, pathology) with the raw similarities.
    Long,
    /// One row per image, one column per pathology.
    Wide,
}

#[derive(Args, Debug)]
pub struct ZeroShotArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// [default: manifest directory]
    #[arg(long)]
    pub image_root: Option<PathBuf>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long, default_value = "nih", value_parser = ["nih", "chexpert"])]
    pub profile: String,
    /// Comma-separated classes to score [default: the checkpoint's classes].
    #[arg(long, value_delimiter = ',')]
    pub pathologies: Option<Vec<String>>,
    /// Temperature of the positive/negative prompt softmax [default: from checkpoint].
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long, value_enum, default_value_t = FormatArg::Long)]
    pub format: FormatArg,
    #[arg(long, default_value = "predictions.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "nih", value_parser = ["nih", "chexpert"])]
    pub profile: String,
    /// Write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AblationKind {
    Loss,
    Batch,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[arg(long, value_enum)]
    pub kind: AblationKind,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Batch sizes of the batch ablation.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BATCH_SIZES)]
    pub sizes: Vec<usize>,
    /// Directory for table.txt, table.json and per-variant reports.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Run directories holding eval-test.json.
    pub runs: Vec<PathBuf>,
    /// Also print a transcribed reference table (repeatable).
    #[arg(long, value_parser = REFERENCE_NAMES)]
    pub reference: Vec<String>,
    /// Write the comparison table as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// [default: manifest directory]
    #[arg(long)]
    pub image_root: Option<PathBuf>,
    #[arg(long, default_value = "nih", value_parser = ["nih", "chexpert"])]
    pub profile: String,
}

#[derive(Args, Debug)]
pub struct TemplatesArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let sub = matches.subcommand().map(|(_, m)| m).expect("subcommand required");
    match dispatch(cli.command, sub) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cmd: Command, m: &ArgMatches) -> Result<()> {
    match cmd {
        Command::SynthData(a) => cmd_synth_data(&a),
        Command::Train(a) => cmd_train(&a, m),
        Command::Zeroshot(a) => cmd_zeroshot(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Ablate(a) => cmd_ablate(&a, m),
        Command::Report(a) => cmd_report(&a),
        Command::ConvertChexpert(a) => cmd_convert(&a),
        Command::Probe(a) => cmd_probe(&a),
        Command::Templates(a) => cmd_templates(&a),
    }
}

fn explicit(m: &ArgMatches, id: &str) -> bool {
    m.value_source(id) == Some(ValueSource::CommandLine)
}

fn manifest_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Defaults, then the config file, then explicitly given flags.
pub fn resolve_config(data: &DataArgs, hyper: &HyperArgs, m: &ArgMatches) -> Result<RunConfigFile> {
    let mut cfg = match &data.config {
        Some(p) => RunConfigFile::load(p)?,
        None => RunConfigFile::default(),
    };
    // Absolute, so that the copy written into the run directory stays valid.
    if let Some(p) = &data.manifest {
        cfg.data.manifest = Some(std::path::absolute(p)?);
    }
    if let Some(p) = &data.image_root {
        cfg.data.image_root = Some(std::path::absolute(p)?);
    }
    if let Some(p) = &data.templates {
        cfg.data.templates = Some(std::path::absolute(p)?);
    }
    if explicit(m, "profile") {
        cfg.data.profile = data.profile.clone();
    }
    let t = &mut cfg.train;
    if explicit(m, "loss_config") {
        t.loss.id = hyper.loss_config.into();
    }
    if explicit(m, "lambda") {
        t.loss.lambda = hyper.lambda;
    }
    if explicit(m, "consistency_negatives") {
        t.loss.consistency_negatives = match hyper.consistency_negatives {
            NegativesArg::InBatch => ConsistencyNegatives::InBatch,
            NegativesArg::Queue => ConsistencyNegatives::Queue,
        };
    }
    if explicit(m, "batch_size") {
        t.batch_size = hyper.batch_size;
    }
    if explicit(m, "epochs") {
        t.epochs = hyper.epochs;
    }
    if explicit(m, "lr") {
        t.lr = hyper.lr;
    }
    if explicit(m, "weight_decay") {
        t.weight_decay = hyper.weight_decay;
    }
    if explicit(m, "momentum") {
        t.momentum = hyper.momentum;
    }
    if explicit(m, "queue_capacity") {
        t.queue_capacity = hyper.queue_capacity;
    }
    if explicit(m, "seed") {
        t.seed = hyper.seed;
    }
    if explicit(m, "image_size") {
        t.model.image_size = hyper.image_size;
    }
    if explicit(m, "embed_dim") {
        t.model.embed_dim = hyper.embed_dim;
    }
    t.validate()?;
    cfg.data.pathology_set()?;
    Ok(cfg)
}

fn prepare_run(cfg: &RunConfigFile) -> Result<(Prepared, TemplateTable)> {
    let set = cfg.data.pathology_set()?;
    let manifest = load_manifest(cfg.data.manifest_path()?, &set)?;
    let table = cfg.data.template_table()?;
    let prepared = prepare_from_disk(&manifest, &cfg.data.image_root()?, &cfg.train, &table)?;
    for w in &prepared.splits.warnings {
        log::warn!("{w}");
    }
    log::info!(
        "split: {} train / {} val / {} test, classes {:?}",
        prepared.data.train.len(),
        prepared.data.val.len(),
        prepared.test.len(),
        prepared.classes
    );
    Ok((prepared, table))
}

fn fmt_auc(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |v| format!("{v:.4}"))
}

fn cmd_synth_data(a: &SynthArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        n: a.n,
        pathologies: a.pathologies,
        raw_size: a.size,
        prevalence: a.prevalence,
        seed: a.seed,
    };
    let (path, manifest) = write_synthetic_dataset(&cfg, &a.out_dir)?;
    println!("manifest: {}", path.display());
    println!("{} images, label prevalence:", manifest.len());
    let counts = manifest.positive_counts();
    for (name, count) in manifest.set.names().iter().zip(counts) {
        if count > 0 || cfg.findings().contains(&name.as_str()) {
            println!("  {name:<20} {count:>6}  {:.3}", count as f64 / manifest.len() as f64);
        }
    }
    Ok(())
}

fn default_run_id(cfg: &RunConfigFile) -> String {
    let t = &cfg.train;
    format!("{}-bs{}-seed{}", t.loss.id, t.batch_size, t.seed)
}

fn cmd_train(a: &TrainArgs, m: &ArgMatches) -> Result<()> {
    let cfg = resolve_config(&a.data, &a.hyper, m)?;
    let (prepared, table) = prepare_run(&cfg)?;
    let run_id = a.run_id.clone().unwrap_or_else(|| default_run_id(&cfg));
    let run = RunDir::create(a.runs_root.join(&run_id))?;
    std::fs::write(run.config(), cfg.to_toml()?)?;
    let mut state = TrainState::new(cfg.train.clone(), prepared.tokenizer.clone(), prepared.classes.clone())?;
    let report = train(
        &mut state,
        &prepared.data,
        &table,
        &TrainOptions {
            run: Some(run.clone()),
            max_steps: None,
        },
    )?;
    let model = report.best.as_ref().unwrap_or(&state);
    if report.best.is_none() {
        // No validation improvement recorded (e.g. zero epochs): the final
        // state doubles as the best checkpoint.
        std::fs::copy(run.last(), run.best())?;
    }
    let eval = test_report(model, &prepared, &table)?;
    eval.save(&run.test_eval())?;
    println!("run: {}", run.dir.display());
    println!("steps: {}", state.step);
    println!("best validation macro AUC: {}", fmt_auc(state.best_val_auc));
    println!("test macro AUC: {}", fmt_auc(eval.macro_auc));
    Ok(())
}

fn cmd_zeroshot(a: &ZeroShotArgs) -> Result<()> {
    let state = load_checkpoint(&a.checkpoint)?;
    let set = PathologySet::from_profile(&a.profile)?;
    let manifest = load_manifest(&a.manifest, &set)?;
    let table = match &a.templates {
        Some(p) => TemplateTable::load(p)?,
        None => TemplateTable::default_table(),
    };
    let classes = a.pathologies.clone().unwrap_or_else(|| state.classes.clone());
    for c in &classes {
        if !set.contains(c) {
            return Err(Error::UnknownLabel(c.clone()));
        }
    }
    let root = a.image_root.clone().unwrap_or_else(|| manifest_dir(&a.manifest));
    let size = state.config.model.image_size;
    let mut ids = Vec::with_capacity(manifest.len());
    let mut images = Vec::with_capacity(manifest.len());
    for (id, img, _) in load_images(&manifest, &root)? {
        images.push(preprocess(&img, size)?);
        ids.push(id);
    }
    let tau = a.temperature.unwrap_or(state.config.inference_temperature);
    let res = classify(
        &state.image.main,
        &state.text.main,
        &state.tokenizer,
        &table,
        &classes,
        &images,
        &ids,
        tau,
    )?;
    match a.format {
        FormatArg::Long => res.save_long(&a.out)?,
        FormatArg::Wide => res.save_wide(&a.out)?,
    }
    println!(
        "wrote {} images x {} pathologies to {}",
        res.len(),
        res.pathologies.len(),
        a.out.display()
    );
    Ok(())
}

fn print_report(r: &EvalReport) {
    println!("{:<22} {:>7} {:>9} {:>9}", "Pathology", "AUC", "positive", "negative");
    for row in &r.rows {
        println!(
            "{:<22} {:>7} {:>9} {:>9}",
            row.pathology,
            fmt_auc(row.auc),
            row.positives,
            row.negatives
        );
    }
    println!("{:<22} {:>7}", "Macro", fmt_auc(r.macro_auc));
    if r.rows.iter().any(|row| row.pathology == NO_FINDING) {
        println!(
            "{:<22} {:>7}",
            "Macro w/o No Finding",
            fmt_auc(r.metadata.macro_without_no_finding)
        );
    }
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let set = PathologySet::from_profile(&a.profile)?;
    let truth = load_manifest(&a.manifest, &set)?;
    let preds = ZeroShotResult::load(&a.predictions)?;
    let report = evaluate(&preds, &truth)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    print_report(&report);
    if let Some(out) = &a.out {
        report.save(out)?;
    }
    Ok(())
}

fn cmd_ablate(a: &AblateArgs, m: &ArgMatches) -> Result<()> {
    let cfg = resolve_config(&a.data, &a.hyper, m)?;
    let (prepared, table) = prepare_run(&cfg)?;
    let result = match a.kind {
        AblationKind::Loss => run_loss_ablation(&cfg.train, &prepared, &table)?,
        AblationKind::Batch => run_batch_ablation(&cfg.train, &prepared, &table, &a.sizes)?,
    };
    let rendered = result.table.render();
    print!("{rendered}");
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("table.txt"), &rendered)?;
        std::fs::write(dir.join("table.json"), serde_json::to_string_pretty(&result.table)?)?;
        for (name, report) in &result.reports {
            let file: String = name
                .chars()
                .take_while(|c| *c != ':')
                .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
                .collect();
            report.save(&dir.join(format!("eval-{file}.json")))?;
        }
    }
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    if a.runs.is_empty() && a.reference.is_empty() {
        return Err(Error::Config("give at least one run directory or --reference".into()));
    }
    if !a.runs.is_empty() {
        let mut reports = Vec::new();
        let mut names = Vec::new();
        for dir in &a.runs {
            let run = RunDir { dir: dir.clone() };
            reports.push(EvalReport::load(&run.test_eval())?);
            names.push(
                dir.file_name()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| dir.display().to_string()),
            );
        }
        let table = compare(&reports, &names)?;
        print!("{}", table.render());
        if let Some(out) = &a.out {
            std::fs::write(out, serde_json::to_string_pretty(&table)?)?;
        }
    }
    for name in &a.reference {
        let reference = ReferenceTable::builtin(name)?;
        println!();
        print!("{}", reference.to_table().render());
    }
    Ok(())
}

fn cmd_convert(a: &ConvertArgs) -> Result<()> {
    let file = std::fs::File::open(&a.input)?;
    let conv = convert_chexpert(file)?;
    for w in &conv.warnings {
        log::warn!("{w}");
    }
    conv.manifest.save(&a.out)?;
    println!("wrote {} rows to {}", conv.manifest.len(), a.out.display());
    if !conv.dropped_classes.is_empty() {
        println!("dropped classes: {}", conv.dropped_classes.join(", "));
    }
    Ok(())
}

fn cmd_probe(a: &ProbeArgs) -> Result<()> {
    let set = PathologySet::from_profile(&a.profile)?;
    let manifest = load_manifest(&a.manifest, &set)?;
    let root = a.image_root.clone().unwrap_or_else(|| manifest_dir(&a.manifest));
    let loaded = load_images(&manifest, &root)?;
    let (raw, labels): (Vec<_>, Vec<_>) = loaded.into_iter().map(|(_, img, l)| (img, l)).unzip();
    let present = manifest.present_pathologies();
    let names: Vec<&str> = present.iter().map(String::as_str).collect();
    let rows = linear_probe(&raw, &labels, &set, &names, &ProbeConfig::default())?;
    let mut pass = true;
    for r in &rows {
        println!("{:<22} {}", r.pathology, fmt_auc(r.auc));
        pass &= r.auc.is_some_and(|v| v > PROBE_GATE);
    }
    println!("gate (every AUC > {PROBE_GATE}): {}", if pass { "pass" } else { "FAIL" });
    if pass {
        Ok(())
    } else {
        Err(Error::Degenerate("linear probe below the learnability gate".into()))
    }
}

fn cmd_templates(a: &TemplatesArgs) -> Result<()> {
    let text = TemplateTable::default_table().to_toml()?;
    match &a.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_file_only_when_given() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.toml");
        std::fs::write(&file, "[train]\nbatch_size = 8\nepochs = 3\n").unwrap();
        let args = ["mococlip", "train", "--config", file.to_str().unwrap(), "--epochs", "5"];
        let matches = Cli::command().try_get_matches_from(args).unwrap();
        let Command::Train(t) = Cli::from_arg_matches(&matches).unwrap().command else {
            panic!("expected train");
        };
        let sub = matches.subcommand_matches("train").unwrap();
        let cfg = resolve_config(&t.data, &t.hyper, sub).unwrap();
        assert_eq!(cfg.train.batch_size, 8);
        assert_eq!(cfg.train.epochs, 5);
        assert_eq!(cfg.train.lr, 1e-4);
    }

    #[test]
    fn no_flags_give_documented_defaults() {
        let matches = Cli::command().try_get_matches_from(["mococlip", "train"]).unwrap();
        let Command::Train(t) = Cli::from_arg_matches(&matches).unwrap().command else {
            panic!("expected train");
        };
        let cfg = resolve_config(&t.data, &t.hyper, matches.subcommand_matches("train").unwrap()).unwrap();
        assert_eq!(cfg, RunConfigFile::default());
        // Flag defaults agree with the config defaults they stand for.
        assert_eq!(t.hyper.batch_size, cfg.train.batch_size);
        assert_eq!(t.hyper.epochs, cfg.train.epochs);
        assert_eq!(t.hyper.queue_capacity, cfg.train.queue_capacity);
        assert_eq!(t.hyper.image_size, cfg.train.model.image_size);
        assert_eq!(t.hyper.embed_dim, cfg.train.model.embed_dim);
        assert_eq!(t.hyper.lambda, cfg.train.loss.lambda);
        assert_eq!(LossConfigId::from(t.hyper.loss_config), cfg.train.loss.id);
    }
}
