use super::{MetricSet, StatsError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
    /// `"mean ± std"` with three decimals.
    pub formatted: String,
    pub single_run: bool,
}

/// Mean and sample standard deviation (n - 1 denominator; 0 when n < 2).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn format_pm(mean: f64, std: f64) -> String {
    format!("{mean:.3} ± {std:.3}")
}

/// Per-metric mean ± sample std across runs. AUC is included only when
/// every run has one.
pub fn aggregate_runs(runs: &[MetricSet]) -> Result<Vec<MetricSummary>, StatsError> {
    if runs.is_empty() {
        return Err(StatsError::EmptyRuns);
    }
    let mut columns: Vec<(&str, Vec<f64>)> = Vec::new();
    if runs.iter().all(|r| r.auc.is_some()) {
        columns.push(("auc", runs.iter().filter_map(|r| r.auc).collect()));
    }
    columns.push(("precision", runs.iter().map(|r| r.precision).collect()));
    columns.push(("recall_sensitivity", runs.iter().map(|r| r.recall_sensitivity).collect()));
    columns.push(("specificity", runs.iter().map(|r| r.specificity).collect()));
    columns.push(("f1", runs.iter().map(|r| r.f1).collect()));
    Ok(columns
        .into_iter()
        .map(|(name, values)| {
            let (mean, std) = mean_std(&values);
            MetricSummary {
                metric: name.to_string(),
                mean,
                std,
                formatted: format_pm(mean, std),
                single_run: runs.len() == 1,
            }
        })
        .collect())
}
