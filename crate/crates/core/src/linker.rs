//! Figure cross-reference resolution.
//!
//! Figure mentions ("Fig. 2", "Figures 1–3", "Fig 2a, b") are scanned with a
//! small hand-written parser anchored on a keyword regex. Spans are UTF-8 byte
//! offsets into the passage text.

use crate::ingest::{ArticleDocument, FigureBlock, Pmcid, SectionType};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::LazyLock;

static KEYWORD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:figures|figure|figs\.?|fig\.?)").unwrap());

static SUPPLEMENT_PREFIX: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(?:supplementa(?:ry|l)|suppl\.?|extended\s+data|additional|appendix)\s*$").unwrap()
});

const MAX_RANGE: u32 = 50;

/// A figure mention found in free text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawMention {
    pub start: usize,
    pub end: usize,
    /// Denoted (figure number, panel) pairs in order, without duplicates.
    pub pairs: Vec<(u32, Option<char>)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FigureReference {
    pub figure_number: u32,
    pub panel: Option<char>,
    pub passage_index: usize,
    /// Byte range `[start, end)` of the whole mention in the passage text.
    pub span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleMeta {
    pub pmcid: Pmcid,
    pub doi: Option<String>,
    pub title: String,
    pub journal: Option<String>,
    pub pub_date: Option<String>,
    pub license: Option<String>,
}

impl From<&ArticleDocument> for ArticleMeta {
    fn from(d: &ArticleDocument) -> Self {
        ArticleMeta {
            pmcid: d.pmcid.clone(),
            doi: d.doi.clone(),
            title: d.title.clone(),
            journal: d.journal.clone(),
            pub_date: d.pub_date.clone(),
            license: d.license.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkedFigure {
    pub article: ArticleMeta,
    pub figure: FigureBlock,
    pub references: Vec<FigureReference>,
    /// Distinct referring passages, in passage order.
    pub referring_passages: Vec<usize>,
    pub referring_text: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinkError {
    #[error("figure {0} does not exist in the article")]
    UnknownFigureNumber(u32),
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.s[self.pos..].chars().next()
    }

    fn peek_at(&self, pos: usize) -> Option<char> {
        self.s.get(pos..).and_then(|r| r.chars().next())
    }

    fn skip_spaces(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Option<u32> {
        let rest = &self.s[self.pos..];
        let len = rest.bytes().take_while(u8::is_ascii_digit).count();
        if len == 0 || len > 4 {
            return None;
        }
        // "Figure 10" must not read as 1; also reject "1.5"-style decimals.
        let after = self.pos + len;
        if self.s[after..].starts_with('.') && self.peek_at(after + 1).is_some_and(|c| c.is_ascii_digit()) {
            return None;
        }
        let n: u32 = rest[..len].parse().ok()?;
        self.pos = after;
        (n >= 1).then_some(n)
    }

    /// A single panel letter not followed by another letter.
    fn bare_letter(&self, pos: usize) -> Option<(char, usize)> {
        let c = self.peek_at(pos)?;
        if !c.is_ascii_alphabetic() {
            return None;
        }
        let next = pos + 1;
        if self.peek_at(next).is_some_and(|n| n.is_alphanumeric()) {
            return None;
        }
        Some((c.to_ascii_lowercase(), next))
    }

    fn dash(&self, pos: usize) -> Option<usize> {
        let mut p = pos;
        while let Some(c) = self.peek_at(p) {
            if c == ' ' || c == '\u{a0}' {
                p += c.len_utf8();
            } else {
                break;
            }
        }
        let c = self.peek_at(p)?;
        if matches!(c, '-' | '\u{2010}' | '\u{2011}' | '\u{2012}' | '\u{2013}' | '\u{2014}' | '\u{2212}') {
            p += c.len_utf8();
            while let Some(c) = self.peek_at(p) {
                if c == ' ' || c == '\u{a0}' {
                    p += c.len_utf8();
                } else {
                    break;
                }
            }
            Some(p)
        } else {
            None
        }
    }

    /// Panel suffix right after a number: `a`, `a–c`, `(a)`, `(a, b)`, `(a–c)`.
    fn panels(&mut self) -> Vec<char> {
        if let Some((c, next)) = self.bare_letter(self.pos) {
            self.pos = next;
            if let Some(after_dash) = self.dash(self.pos) {
                if let Some((c2, next2)) = self.bare_letter(after_dash) {
                    if c2 >= c && (c2 as u32 - c as u32) < 26 {
                        self.pos = next2;
                        return (c..=c2).collect();
                    }
                }
            }
            return vec![c];
        }
        // Parenthesised panels, optionally after one space.
        let mut p = self.pos;
        if self.peek_at(p) == Some(' ') {
            p += 1;
        }
        if self.peek_at(p) != Some('(') {
            return Vec::new();
        }
        p += 1;
        let mut out = Vec::new();
        loop {
            let Some((c, next)) = self.bare_letter(p) else { return Vec::new() };
            p = next;
            if let Some(after_dash) = self.dash(p) {
                let Some((c2, next2)) = self.bare_letter(after_dash) else { return Vec::new() };
                if c2 < c {
                    return Vec::new();
                }
                out.extend(c..=c2);
                p = next2;
            } else {
                out.push(c);
            }
            let rest = &self.s[p..];
            let trimmed = rest.trim_start();
            let ws = rest.len() - trimmed.len();
            if trimmed.starts_with(')') {
                self.pos = p + ws + 1;
                return out;
            } else if trimmed.starts_with(',') {
                p += ws + 1;
            } else if trimmed.to_ascii_lowercase().starts_with("and ") {
                p += ws + 3;
            } else {
                return Vec::new();
            }
            while self.peek_at(p) == Some(' ') {
                p += 1;
            }
        }
    }

    /// List separator followed by something; returns the position after it.
    fn separator(&self) -> Option<usize> {
        let head: String = self.s[self.pos..].chars().take(16).collect();
        let lower = head.to_ascii_lowercase();
        let trimmed = lower.trim_start();
        let mut p = self.pos + (lower.len() - trimmed.len());
        let t = trimmed;
        let adv = if let Some(r) = t.strip_prefix(',') {
            let r2 = r.trim_start();
            let ws = r.len() - r2.len();
            if r2.starts_with("and ") || r2.starts_with("& ") {
                1 + ws + r2.find(' ').unwrap()
            } else {
                1
            }
        } else if t.starts_with(';') {
            1
        } else if t.starts_with("and ") {
            3
        } else if t.starts_with("& ") {
            1
        } else if t.starts_with("or ") {
            2
        } else {
            return None;
        };
        p += adv;
        while let Some(c) = self.peek_at(p) {
            if c.is_whitespace() {
                p += c.len_utf8();
            } else {
                break;
            }
        }
        Some(p)
    }
}

fn push_unique(pairs: &mut Vec<(u32, Option<char>)>, pair: (u32, Option<char>)) {
    if !pairs.contains(&pair) {
        pairs.push(pair);
    }
}

fn parse_after_keyword(s: &str, start: usize) -> Option<(usize, Vec<(u32, Option<char>)>)> {
    let mut cur = Cursor { s, pos: start };
    cur.skip_spaces();
    let mut pairs = Vec::new();
    let mut last_num: Option<u32>;
    let mut last_had_panel;
    let mut end;

    // first item must be a number
    let n = cur.number()?;
    let panels = cur.panels();
    last_num = Some(n);
    last_had_panel = !panels.is_empty();
    end = cur.pos;
    let mut item = (n, panels);
    loop {
        // range continuation
        if let Some(after_dash) = cur.dash(cur.pos) {
            let save = cur.pos;
            cur.pos = after_dash;
            if let Some(n2) = cur.number() {
                let panels2 = cur.panels();
                let (n1, panels1) = &item;
                if n2 == *n1 && !panels1.is_empty() && panels2.len() == 1 {
                    let (a, b) = (*panels1.last().unwrap(), panels2[0]);
                    if b >= a {
                        let mut ps = panels1.clone();
                        ps.extend((a..=b).skip(1));
                        item = (n2, ps);
                        last_had_panel = true;
                        end = cur.pos;
                        continue;
                    }
                }
                if n2 > *n1 && n2 - n1 <= MAX_RANGE {
                    for k in *n1..n2 {
                        if k == *n1 && !panels1.is_empty() {
                            for &p in panels1 {
                                push_unique(&mut pairs, (k, Some(p)));
                            }
                        } else {
                            push_unique(&mut pairs, (k, None));
                        }
                    }
                    item = (n2, panels2);
                    last_num = Some(n2);
                    last_had_panel = !item.1.is_empty();
                    end = cur.pos;
                    continue;
                }
            }
            cur.pos = save;
        }
        // flush current item
        let (n, ps) = (item.0, std::mem::take(&mut item.1));
        if ps.is_empty() {
            push_unique(&mut pairs, (n, None));
        } else {
            for p in ps {
                push_unique(&mut pairs, (n, Some(p)));
            }
        }
        // list continuation
        let Some(after_sep) = cur.separator() else { break };
        cur.pos = after_sep;
        if let Some(n2) = cur.number() {
            let ps = cur.panels();
            last_num = Some(n2);
            last_had_panel = !ps.is_empty();
            item = (n2, ps);
            end = cur.pos;
            continue;
        }
        if last_had_panel {
            if let Some((c, next)) = cur.bare_letter(cur.pos) {
                cur.pos = next;
                let mut ps = vec![c];
                if let Some(after_dash) = cur.dash(cur.pos) {
                    if let Some((c2, next2)) = cur.bare_letter(after_dash) {
                        if c2 >= c {
                            ps = (c..=c2).collect();
                            cur.pos = next2;
                        }
                    }
                }
                item = (last_num.unwrap(), ps);
                end = cur.pos;
                continue;
            }
        }
        break;
    }
    Some((end, pairs))
}

/// Find every figure mention in `text`.
pub fn scan_mentions(text: &str) -> Vec<RawMention> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(m) = KEYWORD.find_at(text, from) {
        from = m.end();
        if m.start() < out.last().map_or(0, |r: &RawMention| r.end) {
            continue;
        }
        if SUPPLEMENT_PREFIX.is_match(&text[..m.start()]) {
            continue;
        }
        if let Some((end, pairs)) = parse_after_keyword(text, m.end()) {
            if !pairs.is_empty() {
                out.push(RawMention { start: m.start(), end, pairs });
                from = end;
            }
        }
    }
    out
}

/// All (figure number, panel) pairs denoted by a figure label or mention.
///
/// Returns an empty list when `raw` does not start with a figure mention.
pub fn normalize_figure_label(raw: &str) -> Vec<(u32, Option<char>)> {
    let t = raw.trim();
    scan_mentions(t)
        .into_iter()
        .next()
        .filter(|m| m.start == 0)
        .map(|m| m.pairs)
        .unwrap_or_default()
}

fn is_referring_section(s: SectionType) -> bool {
    !matches!(s, SectionType::Fig | SectionType::Table | SectionType::Ref)
}

/// References to `figure_number` in the article body.
///
/// One reference per mention. `panel` is set only when the mention names
/// exactly one panel of that figure.
pub fn find_references(doc: &ArticleDocument, figure_number: u32) -> Result<Vec<FigureReference>, LinkError> {
    if doc.figure(figure_number).is_none() {
        return Err(LinkError::UnknownFigureNumber(figure_number));
    }
    Ok(references_unchecked(doc, figure_number))
}

fn references_unchecked(doc: &ArticleDocument, figure_number: u32) -> Vec<FigureReference> {
    let mut out = Vec::new();
    for (idx, p) in doc.passages.iter().enumerate() {
        if !is_referring_section(p.section_type) {
            continue;
        }
        for m in scan_mentions(&p.text) {
            let hits: Vec<_> = m.pairs.iter().filter(|(n, _)| *n == figure_number).collect();
            if hits.is_empty() {
                continue;
            }
            let panel = match hits.as_slice() {
                [(_, Some(c))] => Some(*c),
                _ => None,
            };
            out.push(FigureReference { figure_number, panel, passage_index: idx, span: (m.start, m.end) });
        }
    }
    out
}

/// Join every figure of the article with the passages that cite it.
pub fn link_figures(doc: &ArticleDocument) -> Vec<LinkedFigure> {
    let meta = ArticleMeta::from(doc);
    doc.figures
        .iter()
        .map(|fig| {
            let references = references_unchecked(doc, fig.figure_number);
            let mut referring_passages: Vec<usize> = references
                .iter()
                .map(|r| r.passage_index)
                .filter(|&i| i != fig.passage_index)
                .collect();
            referring_passages.dedup();
            let mut seen = std::collections::HashSet::new();
            referring_passages.retain(|&i| seen.insert(doc.passages[i].text.as_str()));
            let referring_text = referring_passages.iter().map(|&i| doc.passages[i].text.clone()).collect();
            LinkedFigure { article: meta.clone(), figure: fig.clone(), references, referring_passages, referring_text }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Passage;

    fn pairs(raw: &str) -> Vec<(u32, Option<char>)> {
        normalize_figure_label(raw)
    }

    #[test]
    fn basic_labels() {
        assert_eq!(pairs("Fig. 2"), vec![(2, None)]);
        assert_eq!(pairs("Figures 1–3"), vec![(1, None), (2, None), (3, None)]);
        assert_eq!(pairs("Fig. 2a and 2b"), vec![(2, Some('a')), (2, Some('b'))]);
        assert_eq!(pairs("Fig 2a, b"), vec![(2, Some('a')), (2, Some('b'))]);
        assert_eq!(pairs("Figure 10"), vec![(10, None)]);
        assert_eq!(pairs("Table 2"), vec![]);
        assert_eq!(pairs("Graphical abstract"), vec![]);
    }

    #[test]
    fn supplementary_figures_are_ignored() {
        assert!(scan_mentions("see Supplementary Figure 2").is_empty());
        assert_eq!(scan_mentions("see Figure 2").len(), 1);
    }

    fn doc_with(passages: Vec<(SectionType, &str)>, figures: &[u32]) -> ArticleDocument {
        let mut ps = Vec::new();
        let mut offset = 0;
        for (s, t) in passages {
            ps.push(Passage { section_type: s, text: t.to_string(), offset });
            offset += t.len() as u64 + 1;
        }
        let mut figs = Vec::new();
        for &n in figures {
            ps.push(Passage { section_type: SectionType::Fig, text: format!("Figure {n}. Caption."), offset });
            offset += 100;
            figs.push(FigureBlock {
                figure_number: n,
                raw_label: format!("Figure {n}"),
                caption_text: format!("Figure {n}. Caption."),
                graphic_ref: format!("gr{n}.jpg"),
                passage_index: ps.len() - 1,
            });
        }
        ArticleDocument {
            pmcid: "PMC1".parse().unwrap(),
            doi: None,
            title: "t".into(),
            journal: None,
            pub_date: None,
            license: None,
            passages: ps,
            figures: figs,
            warnings: vec![],
        }
    }

    #[test]
    fn direct_reference_span() {
        let text = "as shown in Fig. 2, the lungs were clear";
        let d = doc_with(vec![(SectionType::Results, text)], &[1, 2]);
        let refs = find_references(&d, 2).unwrap();
        assert_eq!(refs.len(), 1);
        let (s, e) = refs[0].span;
        assert_eq!(&text[s..e], "Fig. 2");
    }

    #[test]
    fn unmentioned_figure_and_unknown_number() {
        let d = doc_with(vec![(SectionType::Results, "see Figure 1")], &[1, 3]);
        assert!(find_references(&d, 3).unwrap().is_empty());
        assert_eq!(find_references(&d, 7), Err(LinkError::UnknownFigureNumber(7)));
    }

    #[test]
    fn range_containment() {
        let d = doc_with(vec![(SectionType::Results, "see Figures 1–3")], &[1, 2, 3]);
        let refs = find_references(&d, 2).unwrap();
        assert_eq!(refs.len(), 1);
        assert_eq!(refs[0].span, (4, 4 + "Figures 1–3".len()));
    }

    #[test]
    fn excluded_sections() {
        let d = doc_with(
            vec![
                (SectionType::Table, "Table shows Fig. 1 data"),
                (SectionType::Ref, "Smith et al. Fig 1"),
                (SectionType::Abstract, "Figure 1 shows"),
            ],
            &[1],
        );
        let refs = find_references(&d, 1).unwrap();
        assert_eq!(refs.len(), 1);
        assert_eq!(refs[0].passage_index, 2);
    }

    #[test]
    fn link_two_figures_one_cited() {
        let d = doc_with(
            vec![
                (SectionType::Intro, "Background text."),
                (SectionType::Results, "CT (Fig. 1) showed GGO. Also Figure 1b."),
            ],
            &[1, 2],
        );
        let linked = link_figures(&d);
        assert_eq!(linked.len(), 2);
        assert_eq!(linked[0].references.len(), 2);
        assert_eq!(linked[0].referring_passages, vec![1]);
        assert_eq!(linked[0].referring_text.len(), 1);
        assert!(linked[1].referring_text.is_empty());
    }

    #[test]
    fn empty_article_links_nothing() {
        let d = doc_with(vec![(SectionType::Intro, "text")], &[]);
        assert!(link_figures(&d).is_empty());
    }

    #[test]
    fn panel_only_when_single() {
        let d = doc_with(vec![(SectionType::Results, "Fig. 2a and Fig. 2a, b")], &[2]);
        let refs = find_references(&d, 2).unwrap();
        assert_eq!(refs.iter().map(|r| r.panel).collect::<Vec<_>>(), vec![Some('a'), None]);
    }
}
