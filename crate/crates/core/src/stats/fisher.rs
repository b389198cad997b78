use super::StatsError;
use serde::{Deserialize, Serialize};

/// Relative slack when comparing table probabilities against the observed one.
const RELATIVE_SLACK: f64 = 1e-7;

/// Rows are cohorts, columns are term present / absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable2x2 {
    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub fn transpose(&self) -> Self {
        ContingencyTable2x2 { a: self.a, b: self.c, c: self.b, d: self.d }
    }
}

fn log_factorials(n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0f64;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Two-sided Fisher exact test p-value.
///
/// Sums the hypergeometric probabilities of every table with the observed
/// margins whose probability is at most the observed one (within a relative
/// slack of 1e-7). Probabilities are handled in log space and normalized by
/// the sum over all tables, so totals in the millions neither overflow nor
/// underflow.
pub fn fisher_exact(t: &ContingencyTable2x2) -> Result<f64, StatsError> {
    let n = t.total();
    if n == 0 {
        return Err(StatsError::EmptyTable);
    }
    let (r1, r2, c1) = (t.a + t.b, t.c + t.d, t.a + t.c);
    let lf = log_factorials(n);
    let lf = |k: u64| lf[k as usize];
    // log of C(r1, x) * C(r2, c1 - x); the common 1/C(n, c1) cancels
    let log_weight = |x: u64| lf(r1) - lf(x) - lf(r1 - x) + lf(r2) - lf(c1 - x) - lf(r2 + x - c1);
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    let weights: Vec<f64> = (lo..=hi).map(log_weight).collect();
    let observed = log_weight(t.a) + RELATIVE_SLACK.ln_1p();
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut tail, mut all) = (0.0, 0.0);
    for &w in &weights {
        let p = (w - max).exp();
        all += p;
        if w <= observed {
            tail += p;
        }
    }
    Ok((tail / all).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_possible_table() {
        let t = ContingencyTable2x2 { a: 0, b: 3, c: 0, d: 9 };
        assert_eq!(fisher_exact(&t).unwrap(), 1.0);
    }

    #[test]
    fn log_factorial_small_values() {
        let lf = log_factorials(5);
        assert!((lf[5] - 120f64.ln()).abs() < 1e-13);
    }
}
