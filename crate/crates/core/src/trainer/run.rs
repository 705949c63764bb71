use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::checkpoint::save_checkpoint;
use super::step::TrainState;
use crate::data::Dataset;
use crate::domain::RngState;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::inference::{classify, ZeroShotResult};

pub const CONFIG_FILE: &str = "config.toml";
pub const METRICS_FILE: &str = "metrics.log";
pub const BEST_CHECKPOINT: &str = "ckpt-best";
pub const FINAL_CHECKPOINT: &str = "ckpt-final";
pub const TEST_EVAL_FILE: &str = "eval-test.json";

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricRecord {
    Step {
        step: u64,
        epoch: usize,
        total: f64,
        l_con: f64,
        l_moco: f64,
        l_mom_img: f64,
        l_mom_txt: f64,
        lr: f64,
        queue_fill: usize,
    },
    Epoch {
        epoch: usize,
        mean_loss: f64,
        val_macro_auc: Option<f64>,
    },
}

/// `runs/<run-id>/` layout.
#[derive(Clone, Debug)]
pub struct RunDir {
    pub dir: PathBuf,
}

impl RunDir {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn config(&self) -> PathBuf {
        self.dir.join(CONFIG_FILE)
    }

    pub fn metrics(&self) -> PathBuf {
        self.dir.join(METRICS_FILE)
    }

    pub fn best(&self) -> PathBuf {
        self.dir.join(BEST_CHECKPOINT)
    }

    pub fn last(&self) -> PathBuf {
        self.dir.join(FINAL_CHECKPOINT)
    }

    pub fn test_eval(&self) -> PathBuf {
        self.dir.join(TEST_EVAL_FILE)
    }
}

pub struct TrainData {
    pub train: Dataset,
    pub val: Dataset,
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub records: Vec<MetricRecord>,
    /// Validation macro AUC after each completed epoch.
    pub val_history: Vec<Option<f64>>,
    /// Snapshot taken at the best validation epoch.
    pub best: Option<TrainState>,
    /// False when stopped early by `max_steps`.
    pub finished: bool,
}

impl TrainReport {
    pub fn step_losses(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| match r {
                MetricRecord::Step { total, .. } => Some(*total),
                _ => None,
            })
            .collect()
    }

    pub fn epoch_mean_losses(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| match r {
                MetricRecord::Epoch { mean_loss, .. } => Some(*mean_loss),
                _ => None,
            })
            .collect()
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    pub run: Option<RunDir>,
    /// Stop (resumably) once the state reaches this many optimizer steps.
    pub max_steps: Option<u64>,
}

/// Sample order of `epoch`: a permutation drawn from the `data/epoch/<e>`
/// stream, so it depends only on (seed, epoch).
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut RngState::new(seed, "data").derive(format!("epoch/{epoch}")).rng());
    order
}

/// Indices of the next batch, or `None` when the current epoch is
/// exhausted. The trailing partial batch of each epoch is dropped.
pub fn next_batch(state: &TrainState, n: usize) -> Option<Vec<usize>> {
    let b = state.config.batch_size;
    let k = state.batch_in_epoch;
    if (k + 1) * b > n {
        return None;
    }
    Some(epoch_order(state.config.seed, state.epoch, n)[k * b..(k + 1) * b].to_vec())
}

pub fn classify_dataset(state: &TrainState, data: &Dataset, table: &crate::reports::TemplateTable) -> Result<ZeroShotResult> {
    let images: Vec<_> = data.samples.iter().map(|s| s.image.clone()).collect();
    let ids: Vec<String> = data.samples.iter().map(|s| s.id.clone()).collect();
    classify(
        &state.image.main,
        &state.text.main,
        &state.tokenizer,
        table,
        &state.classes,
        &images,
        &ids,
        state.config.inference_temperature,
    )
}

/// Zero-shot evaluation of the main encoders on `data`.
pub fn evaluate_dataset(
    state: &TrainState,
    data: &Dataset,
    table: &crate::reports::TemplateTable,
) -> Result<EvalReport> {
    let res = classify_dataset(state, data, table)?;
    evaluate(&res, &data.manifest()?)
}

fn append_record(path: &Path, rec: &MetricRecord) -> Result<()> {
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{}", serde_json::to_string(rec)?)?;
    Ok(())
}

/// Runs the remaining epochs of `state`.
///
/// Each completed epoch is scored on `data.val` by zero-shot macro AUC; an
/// improvement snapshots the state (and writes `ckpt-best` when a run
/// directory is given). `ckpt-final` is written when all epochs are done.
pub fn train(
    state: &mut TrainState,
    data: &TrainData,
    table: &crate::reports::TemplateTable,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    let n = data.train.len();
    let b = state.config.batch_size;
    if state.config.epochs > 0 && n < b {
        return Err(Error::Config(format!(
            "training split has {n} samples, fewer than the batch size {b}"
        )));
    }
    let mut report = TrainReport::default();
    let emit = |report: &mut TrainReport, rec: MetricRecord| -> Result<()> {
        if let Some(run) = &opts.run {
            append_record(&run.metrics(), &rec)?;
        }
        report.records.push(rec);
        Ok(())
    };
    if let Some(run) = &opts.run {
        // A caller may already have written a fuller run config.
        if !run.config().exists() {
            std::fs::write(run.config(), state.config.to_toml()?)?;
        }
        if state.step == 0 && run.metrics().exists() {
            std::fs::remove_file(run.metrics())?;
        }
    }

    while state.epoch < state.config.epochs {
        while let Some(batch) = next_batch(state, n) {
            if opts.max_steps.is_some_and(|m| state.step >= m) {
                return Ok(report);
            }
            let epoch = state.epoch;
            let loss = state.train_step(&data.train, &batch)?;
            state.batch_in_epoch += 1;
            state.epoch_loss_sum += loss.total;
            let rec = MetricRecord::Step {
                step: state.step,
                epoch,
                total: loss.total,
                l_con: loss.l_con,
                l_moco: loss.l_moco,
                l_mom_img: loss.l_mom_img,
                l_mom_txt: loss.l_mom_txt,
                lr: state.config.lr,
                queue_fill: state.queue_fill(),
            };
            emit(&mut report, rec)?;
        }
        let steps = state.batch_in_epoch.max(1) as f64;
        let mean_loss = state.epoch_loss_sum / steps;
        let val = if data.val.is_empty() {
            None
        } else {
            evaluate_dataset(state, &data.val, table)?.macro_auc
        };
        let epoch = state.epoch;
        state.epoch += 1;
        state.batch_in_epoch = 0;
        state.epoch_loss_sum = 0.0;
        let improved = match (val, state.best_val_auc) {
            (Some(v), Some(best)) => v > best,
            (Some(_), None) => true,
            _ => false,
        };
        if improved {
            state.best_val_auc = val;
            report.best = Some(state.clone());
            if let Some(run) = &opts.run {
                save_checkpoint(state, &run.best())?;
            }
        }
        log::info!(
            "epoch {epoch}: mean loss {mean_loss:.4}, validation macro AUC {}",
            val.map_or("n/a".into(), |v| format!("{v:.4}"))
        );
        report.val_history.push(val);
        emit(
            &mut report,
            MetricRecord::Epoch {
                epoch,
                mean_loss,
                val_macro_auc: val,
            },
        )?;
    }
    if let Some(run) = &opts.run {
        save_checkpoint(state, &run.last())?;
    }
    report.finished = true;
    Ok(report)
}
