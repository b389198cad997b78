use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryConfusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl BinaryConfusion {
    /// Count outcomes of paired predictions and truths.
    ///
    /// # Panics
    /// If the slices differ in length.
    pub fn from_predictions(predicted: &[bool], actual: &[bool]) -> Self {
        assert_eq!(predicted.len(), actual.len());
        let mut c = BinaryConfusion::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p, a) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    /// The same outcomes with the positive and negative classes exchanged.
    pub fn swap_classes(&self) -> Self {
        BinaryConfusion { tp: self.tn, fp: self.fn_, tn: self.tp, fn_: self.fp }
    }
}

/// Binary classification metrics. Ratios with a zero denominator are
/// reported as 0 and their names listed in `undefined`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub auc: Option<f64>,
    pub precision: f64,
    pub recall_sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub undefined: Vec<String>,
}

impl MetricSet {
    pub fn with_auc(mut self, auc: f64) -> Self {
        self.auc = Some(auc);
        self
    }
}

pub fn compute_metrics(c: &BinaryConfusion) -> MetricSet {
    let mut undefined = Vec::new();
    let mut ratio = |name: &str, num: f64, den: f64| {
        if den == 0.0 {
            undefined.push(name.to_string());
            0.0
        } else {
            num / den
        }
    };
    let precision = ratio("precision", c.tp as f64, (c.tp + c.fp) as f64);
    let recall = ratio("recall_sensitivity", c.tp as f64, (c.tp + c.fn_) as f64);
    let specificity = ratio("specificity", c.tn as f64, (c.tn + c.fp) as f64);
    let f1 = ratio("f1", 2.0 * precision * recall, precision + recall);
    MetricSet { auc: None, precision, recall_sensitivity: recall, specificity, f1, undefined }
}

/// Square confusion matrix; `counts[actual][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    /// # Panics
    /// If the slices differ in length or a label is `>= classes`.
    pub fn from_labels(predicted: &[usize], actual: &[usize], classes: usize) -> Self {
        assert_eq!(predicted.len(), actual.len());
        let mut counts = vec![vec![0u64; classes]; classes];
        for (&p, &a) in predicted.iter().zip(actual) {
            counts[a][p] += 1;
        }
        ConfusionMatrix { counts }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    /// Class `k` against the rest.
    pub fn one_vs_rest(&self, k: usize) -> BinaryConfusion {
        let mut c = BinaryConfusion::default();
        for (a, row) in self.counts.iter().enumerate() {
            for (p, &n) in row.iter().enumerate() {
                match (p == k, a == k) {
                    (true, true) => c.tp += n,
                    (true, false) => c.fp += n,
                    (false, false) => c.tn += n,
                    (false, true) => c.fn_ += n,
                }
            }
        }
        c
    }

    pub fn accuracy(&self) -> f64 {
        let total: u64 = self.counts.iter().flatten().sum();
        let diag: u64 = (0..self.classes()).map(|k| self.counts[k][k]).sum();
        if total == 0 {
            0.0
        } else {
            diag as f64 / total as f64
        }
    }

    /// Unweighted mean of the per-class F1 scores.
    pub fn macro_f1(&self) -> f64 {
        let k = self.classes();
        if k == 0 {
            return 0.0;
        }
        (0..k).map(|i| compute_metrics(&self.one_vs_rest(i)).f1).sum::<f64>() / k as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiclass_one_vs_rest() {
        let m = ConfusionMatrix::from_labels(&[0, 1, 2, 2, 0], &[0, 1, 2, 1, 1], 3);
        assert_eq!(m.one_vs_rest(1), BinaryConfusion { tp: 1, fp: 0, tn: 2, fn_: 2 });
        assert!((m.accuracy() - 0.6).abs() < 1e-15);
        let perfect = ConfusionMatrix::from_labels(&[0, 1, 2], &[0, 1, 2], 3);
        assert_eq!(perfect.macro_f1(), 1.0);
    }

    #[test]
    fn from_predictions_counts() {
        let c = BinaryConfusion::from_predictions(&[true, true, false, false], &[true, false, false, true]);
        assert_eq!(c, BinaryConfusion { tp: 1, fp: 1, tn: 1, fn_: 1 });
    }
}
