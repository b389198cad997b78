//! Independent oracles and fixtures shared by integration tests.
#![allow(dead_code)]

use figmine_core::textmine::Polarity;

pub fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// Two-sided Fisher p by exact integer enumeration of every table with the
/// observed margins. A table counts when its weight is at most the observed
/// weight times (1 + 1e-7), compared exactly in integers.
pub fn fisher_oracle(a: u64, b: u64, c: u64, d: u64) -> f64 {
    let (r1, r2, c1) = (a + b, c + d, a + c);
    let n = r1 + r2;
    let w = |x: u64| binom(r1, x) * binom(r2, c1 - x);
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    let obs = w(a);
    let mut num: u128 = 0;
    for x in lo..=hi {
        let wx = w(x);
        if wx * 10_000_000 <= obs * 10_000_001 {
            num += wx;
        }
    }
    (num as f64 / binom(n, c1) as f64).min(1.0)
}

/// Mann–Whitney formulation: fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half.
pub fn auc_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            wins += if scores[i] > scores[j] {
                1.0
            } else if scores[i] == scores[j] {
                0.5
            } else {
                0.0
            };
        }
    }
    let p = labels.iter().filter(|l| **l).count();
    wins / (p * (labels.len() - p)) as f64
}

pub const NEGATION_SUITE: &str = include_str!("../data/negation_suite.tsv");

pub struct NegationCase {
    pub sentence: &'static str,
    pub term: &'static str,
    pub expected: Polarity,
}

pub fn negation_suite() -> Vec<NegationCase> {
    NEGATION_SUITE
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let cols: Vec<&str> = l.split('\t').collect();
            assert_eq!(cols.len(), 3, "bad suite row {l:?}");
            let expected = match cols[2] {
                "positive" => Polarity::Positive,
                "negated" => Polarity::Negated,
                other => panic!("bad label {other}"),
            };
            NegationCase { sentence: cols[0], term: cols[1], expected }
        })
        .collect()
}
