mod auc;
mod reference;
mod report;
mod table;

pub use auc::{roc_auc, roc_auc_pairwise, roc_curve};
pub use reference::{ReferenceKind, ReferenceRow, ReferenceTable, BATCH_TABLE_PATHOLOGIES, REFERENCE_NAMES};
pub use report::{evaluate, AucRow, EvalMetadata, EvalReport};
pub use table::{compare, compare_rows, ComparisonTable, Highlight, TableRow, BEST_MARK};

#[cfg(test)]
mod tests;
