use serde::Serialize;

use super::config::TrainConfig;
use super::pipeline::Prepared;
use super::run::{evaluate_dataset, train, TrainOptions};
use super::step::TrainState;
use crate::error::{Error, Result};
use crate::eval::{compare_rows, ComparisonTable, EvalReport, Highlight, TableRow, BATCH_TABLE_PATHOLOGIES};
use crate::losses::LossConfigId;
use crate::reports::TemplateTable;

pub const DEFAULT_BATCH_SIZES: [usize; 2] = [16, 32];

#[derive(Clone, Debug, Serialize)]
pub struct AblationResult {
    pub table: ComparisonTable,
    /// Variant name and its test-split report.
    pub reports: Vec<(String, EvalReport)>,
}

/// Trains one model and scores it on the test split, using the best
/// validation snapshot when there is one.
pub fn train_and_test(cfg: TrainConfig, prepared: &Prepared, table: &TemplateTable) -> Result<EvalReport> {
    let mut state = TrainState::new(cfg.clone(), prepared.tokenizer.clone(), prepared.classes.clone())?;
    let report = train(&mut state, &prepared.data, table, &TrainOptions::default())?;
    test_report(report.best.as_ref().unwrap_or(&state), prepared, table)
}

/// Zero-shot report of `model` on the test split, with provenance metadata.
pub fn test_report(model: &TrainState, prepared: &Prepared, table: &TemplateTable) -> Result<EvalReport> {
    let mut eval = evaluate_dataset(model, &prepared.test, table)?;
    eval.metadata.seed = Some(model.config.seed);
    eval.metadata.dataset_hash = Some(prepared.dataset_hash.clone());
    eval.metadata.config = Some(serde_json::to_value(&model.config)?);
    eval.metadata.checkpoint_hashes.insert("image".into(), model.image.main.content_hash());
    eval.metadata.checkpoint_hashes.insert("text".into(), model.text.main.content_hash());
    Ok(eval)
}

/// One model per loss configuration A–D, same seed and data.
pub fn run_loss_ablation(base: &TrainConfig, prepared: &Prepared, table: &TemplateTable) -> Result<AblationResult> {
    let mut reports = Vec::new();
    for id in LossConfigId::ALL {
        let mut cfg = base.clone();
        cfg.loss.id = id;
        log::info!("loss ablation: training configuration {id}");
        reports.push((id.label().to_string(), train_and_test(cfg, prepared, table)?));
    }
    let table = ComparisonTable {
        title: "Mean AUC by loss configuration".into(),
        row_header: "Loss configuration".into(),
        columns: vec!["Mean AUC".into()],
        rows: reports
            .iter()
            .map(|(label, r)| TableRow {
                label: label.clone(),
                values: vec![r.macro_auc],
            })
            .collect(),
        summary: None,
        highlight: Highlight::Column,
    };
    Ok(AblationResult { table, reports })
}

/// One model per batch size with the epoch count held fixed, so every run
/// sees the same number of samples.
pub fn run_batch_ablation(
    base: &TrainConfig,
    prepared: &Prepared,
    table: &TemplateTable,
    sizes: &[usize],
) -> Result<AblationResult> {
    if sizes.is_empty() {
        return Err(Error::Config("no batch sizes given".into()));
    }
    let mut reports = Vec::new();
    for &b in sizes {
        let mut cfg = base.clone();
        cfg.batch_size = b;
        log::info!("batch ablation: training with batch size {b}");
        let mut r = train_and_test(cfg, prepared, table)?;
        r.metadata.note = Some(format!("batch size {b}; epochs held constant at {}", base.epochs));
        reports.push((format!("bs={b}"), r));
    }
    let names: Vec<String> = reports.iter().map(|(n, _)| n.clone()).collect();
    let evals: Vec<EvalReport> = reports.iter().map(|(_, r)| r.clone()).collect();
    let mut table = compare_rows(&evals, &names, Some(&BATCH_TABLE_PATHOLOGIES), "Average")?;
    table.title = "AUC by batch size".into();
    Ok(AblationResult { table, reports })
}
