//! Symptom and finding mentions with negation-aware polarity.

mod lexicon;
mod negation;
mod sentence;

pub use lexicon::{load_default_lexicon, surface_key, Category, Lexicon, LexiconEntry, LexiconError, TermMatch};
pub use negation::{
    detect_negation, parse_phrase_list, NegationRules, NegationRulesError, Polarity, DEFAULT_SCOPE_WINDOW,
};
pub use sentence::split_sentences;

use crate::ingest::Pmcid;
use crate::linker::LinkedFigure;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionSource {
    Caption,
    ReferringText,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub term: String,
    pub category: Category,
    /// Byte offsets into the source text.
    pub span: (usize, usize),
    pub polarity: Polarity,
    pub source: MentionSource,
    /// 0 for the caption, otherwise the position in `referring_text`.
    pub source_index: usize,
    pub pmcid: Pmcid,
    pub figure_number: u32,
}

/// A lexicon hit with its decided polarity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolarMatch {
    #[serde(flatten)]
    pub hit: TermMatch,
    pub polarity: Polarity,
}

/// Find every lexicon mention in `text` and decide its polarity within its
/// sentence. Spans are offsets into `text`.
pub fn mine_text(text: &str, lexicon: &Lexicon, rules: &NegationRules) -> Vec<PolarMatch> {
    let mut out = Vec::new();
    for (start, end) in split_sentences(text) {
        let sentence = &text[start..end];
        for mut hit in lexicon.find_mentions(sentence) {
            let polarity = detect_negation(sentence, hit.span, rules);
            hit.span = (hit.span.0 + start, hit.span.1 + start);
            out.push(PolarMatch { hit, polarity });
        }
    }
    out
}

/// Mentions in a figure's caption followed by those in its referring text.
pub fn mine_linked_figure(lf: &LinkedFigure, lexicon: &Lexicon, rules: &NegationRules) -> Vec<Mention> {
    let tag = |m: PolarMatch, source, source_index| Mention {
        term: m.hit.term,
        category: m.hit.category,
        span: m.hit.span,
        polarity: m.polarity,
        source,
        source_index,
        pmcid: lf.article.pmcid.clone(),
        figure_number: lf.figure.figure_number,
    };
    let mut out: Vec<Mention> = mine_text(&lf.figure.caption_text, lexicon, rules)
        .into_iter()
        .map(|m| tag(m, MentionSource::Caption, 0))
        .collect();
    for (i, text) in lf.referring_text.iter().enumerate() {
        out.extend(mine_text(text, lexicon, rules).into_iter().map(|m| tag(m, MentionSource::ReferringText, i)));
    }
    out
}

/// Where one occurrence of a collapsed mention was found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionSite {
    pub source: MentionSource,
    pub source_index: usize,
    pub span: (usize, usize),
}

/// All mentions of one term with one polarity in one figure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionSummary {
    pub term: String,
    pub category: Category,
    pub polarity: Polarity,
    pub sites: Vec<MentionSite>,
}

/// Collapse mentions by (pmcid, figure, term, polarity), keeping every site.
/// Output is ordered by pmcid, figure, category, term and polarity.
pub fn summarize_mentions(mentions: &[Mention]) -> Vec<MentionSummary> {
    let mut groups: BTreeMap<(&str, u32, Category, &str, Polarity), Vec<MentionSite>> = BTreeMap::new();
    for m in mentions {
        groups
            .entry((m.pmcid.as_str(), m.figure_number, m.category, m.term.as_str(), m.polarity))
            .or_default()
            .push(MentionSite { source: m.source, source_index: m.source_index, span: m.span });
    }
    groups
        .into_iter()
        .map(|((_, _, category, term, polarity), sites)| MentionSummary {
            term: term.to_string(),
            category,
            polarity,
            sites,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::FigureBlock;
    use crate::linker::ArticleMeta;

    fn figure(caption: &str, referring: &[&str]) -> LinkedFigure {
        LinkedFigure {
            article: ArticleMeta {
                pmcid: "PMC100".parse().unwrap(),
                doi: None,
                title: String::new(),
                journal: None,
                pub_date: None,
                license: None,
            },
            figure: FigureBlock {
                figure_number: 1,
                raw_label: "Figure 1".into(),
                caption_text: caption.into(),
                graphic_ref: "f1.png".into(),
                passage_index: 3,
            },
            references: Vec::new(),
            referring_passages: (0..referring.len()).collect(),
            referring_text: referring.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn caption_and_referring_sources() {
        let lf = figure("Chest CT shows bilateral GGO.", &["On admission the patient had fever (Fig. 1)."]);
        let m = mine_linked_figure(&lf, &load_default_lexicon(), &NegationRules::default());
        assert_eq!(m.len(), 2);
        assert_eq!((m[0].term.as_str(), m[0].category, m[0].source), ("ground-glass opacification", Category::Finding, MentionSource::Caption));
        assert_eq!((m[1].term.as_str(), m[1].category, m[1].source), ("fever", Category::Symptom, MentionSource::ReferringText));
        assert!(m.iter().all(|x| x.polarity == Polarity::Positive && x.figure_number == 1));
    }

    #[test]
    fn caption_only() {
        let lf = figure("No pleural effusion.", &[]);
        let m = mine_linked_figure(&lf, &load_default_lexicon(), &NegationRules::default());
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].term.as_str(), m[0].polarity), ("effusion", Polarity::Negated));
    }

    #[test]
    fn duplicates_collapse_but_keep_sites() {
        let lf = figure("Fever and GGO.", &["The patient had fever.", "Fever persisted; no cough."]);
        let m = mine_linked_figure(&lf, &load_default_lexicon(), &NegationRules::default());
        let s = summarize_mentions(&m);
        let fever: Vec<_> = s.iter().filter(|x| x.term == "fever").collect();
        assert_eq!(fever.len(), 1);
        assert_eq!(fever[0].sites.len(), 3);
        assert!(s.iter().any(|x| x.term == "cough" && x.polarity == Polarity::Negated));
    }

    #[test]
    fn spans_index_source_text() {
        let text = "Fever. Later, no cough and no dyspnea were noted.";
        for m in mine_text(text, &load_default_lexicon(), &NegationRules::default()) {
            assert_eq!(surface_key(&text[m.hit.span.0..m.hit.span.1]), surface_key(&m.hit.term));
        }
    }
}
