use super::{fisher_exact, ContingencyTable2x2, StatsError};
use crate::textmine::{Category, Lexicon, Mention, Polarity};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Per-term comparison of two cohorts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermFrequency {
    pub term: String,
    pub category: Category,
    /// Items of cohort A with at least one positive mention.
    pub present_a: u64,
    pub n_a: u64,
    pub present_b: u64,
    pub n_b: u64,
    pub prop_a: f64,
    pub prop_b: f64,
    pub p_value: f64,
    pub stars: String,
}

/// `****` for p ≤ 1e-4, `***` ≤ 1e-3, `**` ≤ 0.01, `*` ≤ 0.05, else empty.
pub fn significance_stars(p: f64) -> &'static str {
    if p <= 1e-4 {
        "****"
    } else if p <= 1e-3 {
        "***"
    } else if p <= 0.01 {
        "**"
    } else if p <= 0.05 {
        "*"
    } else {
        ""
    }
}

/// Canonical terms with at least one positive mention.
pub fn positive_terms(mentions: &[Mention]) -> BTreeSet<&str> {
    mentions.iter().filter(|m| m.polarity == Polarity::Positive).map(|m| m.term.as_str()).collect()
}

/// Compare how many items (articles) of each cohort positively mention each
/// lexicon term, with Fisher's exact test per term. Rows follow lexicon order.
pub fn frequency_comparison<S: AsRef<[Mention]>>(
    cohort_a: &[S],
    cohort_b: &[S],
    lexicon: &Lexicon,
) -> Result<Vec<TermFrequency>, StatsError> {
    if cohort_a.is_empty() {
        return Err(StatsError::EmptyCohort("A".into()));
    }
    if cohort_b.is_empty() {
        return Err(StatsError::EmptyCohort("B".into()));
    }
    let sets_a: Vec<BTreeSet<&str>> = cohort_a.iter().map(|m| positive_terms(m.as_ref())).collect();
    let sets_b: Vec<BTreeSet<&str>> = cohort_b.iter().map(|m| positive_terms(m.as_ref())).collect();
    let (n_a, n_b) = (sets_a.len() as u64, sets_b.len() as u64);
    lexicon
        .entries()
        .iter()
        .map(|e| {
            let present_a = sets_a.iter().filter(|s| s.contains(e.term.as_str())).count() as u64;
            let present_b = sets_b.iter().filter(|s| s.contains(e.term.as_str())).count() as u64;
            let table = ContingencyTable2x2 { a: present_a, b: n_a - present_a, c: present_b, d: n_b - present_b };
            let p_value = fisher_exact(&table)?;
            Ok(TermFrequency {
                term: e.term.clone(),
                category: e.category,
                present_a,
                n_a,
                present_b,
                n_b,
                prop_a: present_a as f64 / n_a as f64,
                prop_b: present_b as f64 / n_b as f64,
                p_value,
                stars: significance_stars(p_value).to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textmine::{load_default_lexicon, MentionSource};

    fn mention(term: &str, polarity: Polarity) -> Mention {
        let lex = load_default_lexicon();
        Mention {
            term: term.into(),
            category: lex.entry(term).unwrap().category,
            span: (0, term.len()),
            polarity,
            source: MentionSource::Caption,
            source_index: 0,
            pmcid: "PMC1".parse().unwrap(),
            figure_number: 1,
        }
    }

    #[test]
    fn stars_ladder() {
        assert_eq!(significance_stars(0.00005), "****");
        assert_eq!(significance_stars(1e-4), "****");
        assert_eq!(significance_stars(0.0005), "***");
        assert_eq!(significance_stars(0.005), "**");
        assert_eq!(significance_stars(0.05), "*");
        assert_eq!(significance_stars(0.2), "");
    }

    #[test]
    fn identical_cohorts_are_not_significant() {
        let lex = load_default_lexicon();
        let items = vec![vec![mention("fever", Polarity::Positive)], vec![mention("cough", Polarity::Negated)]];
        let rows = frequency_comparison(&items, &items, &lex).unwrap();
        assert_eq!(rows.len(), 35);
        assert!(rows.iter().all(|r| r.p_value == 1.0 && r.stars.is_empty()));
        let fever = rows.iter().find(|r| r.term == "fever").unwrap();
        assert_eq!((fever.present_a, fever.prop_a), (1, 0.5));
        let cough = rows.iter().find(|r| r.term == "cough").unwrap();
        assert_eq!(cough.present_a, 0);
    }

    #[test]
    fn empty_cohort() {
        let lex = load_default_lexicon();
        let items = vec![Vec::<Mention>::new()];
        assert!(matches!(frequency_comparison(&items, &[], &lex), Err(StatsError::EmptyCohort(_))));
    }
}
