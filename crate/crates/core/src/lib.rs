//! Image-text contrastive pretraining with a momentum-contrast key queue,
//! zero-shot multi-label classification and ROC-AUC evaluation, at a scale
//! that runs on a laptop CPU.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod data;
pub mod domain;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod inference;
pub mod losses;
pub mod queue;
pub mod reports;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
