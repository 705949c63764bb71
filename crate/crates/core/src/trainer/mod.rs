mod ablation;
mod checkpoint;
mod config;
mod optim;
mod pipeline;
mod run;
mod step;

pub use ablation::{run_batch_ablation, run_loss_ablation, test_report, train_and_test, AblationResult, DEFAULT_BATCH_SIZES};
pub use checkpoint::{
    file_hash, load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, BlobEntry, CheckpointHeader,
    FORMAT_VERSION, MAGIC,
};
pub use config::{
    ModelConfig, TrainConfig, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_LR, DEFAULT_MOMENTUM, DEFAULT_WEIGHT_DECAY,
};
pub use optim::AdamW;
pub use pipeline::{prepare, prepare_from_disk, Prepared};
pub use run::{
    classify_dataset, epoch_order, evaluate_dataset, next_batch, train, MetricRecord, RunDir, TrainData,
    TrainOptions, TrainReport, BEST_CHECKPOINT, CONFIG_FILE, FINAL_CHECKPOINT, METRICS_FILE, TEST_EVAL_FILE,
};
pub use step::{loss_and_gradients, needs_image_queue, needs_text_queue, LossEval, TrainState};
