//! Classification metrics: confusion matrix, one-vs-rest rates, ROC/AUC and
//! the evaluation report built from them.

mod confusion;
mod report;
mod roc;

pub use confusion::{BinaryCounts, ClassRates, ConfusionMatrix, Rate};
pub use report::{report, MetricsReport};
pub use roc::{concordance_auc, roc_auc, Roc, RocPoint};
