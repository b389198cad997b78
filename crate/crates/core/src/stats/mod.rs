//! Evaluation metrics, run aggregation, Fisher's exact test and the
//! cohort term-frequency report.

mod aggregate;
mod fisher;
mod frequency;
mod metrics;
mod report;
mod roc;

pub use aggregate::{aggregate_runs, format_pm, mean_std, MetricSummary};
pub use fisher::{fisher_exact, ContingencyTable2x2};
pub use frequency::{frequency_comparison, positive_terms, significance_stars, TermFrequency};
pub use metrics::{compute_metrics, BinaryConfusion, ConfusionMatrix, MetricSet};
pub use report::{render_frequency_svg, FrequencyReport};
pub use roc::{roc_auc, RocCurve};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("contingency table is empty")]
    EmptyTable,
    #[error("ROC needs both positive and negative labels")]
    SingleClass,
    #[error("{0} scores but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("score at index {0} is not finite")]
    NonFiniteScore(usize),
    #[error("no runs to aggregate")]
    EmptyRuns,
    #[error("cohort {0:?} has no items")]
    EmptyCohort(String),
}
