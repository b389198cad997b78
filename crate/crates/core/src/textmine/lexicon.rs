//! Term lexicon and longest-match mention finding.

use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Symptom,
    Finding,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Symptom => "symptom",
            Category::Finding => "finding",
        }
    }
}

impl std::str::FromStr for Category {
    type Err = LexiconError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "symptom" => Ok(Category::Symptom),
            "finding" => Ok(Category::Finding),
            other => Err(LexiconError::Parse { line: 0, message: format!("unknown category {other:?}") }),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate canonical term {0:?}")]
    DuplicateTerm(String),
    #[error("synonym {synonym:?} maps to both {first:?} and {second:?}")]
    AmbiguousSynonym { synonym: String, first: String, second: String },
    #[error("lexicon has no entries")]
    Empty,
    #[error("reading lexicon {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub term: String,
    pub category: Category,
    /// Surface forms other than the canonical term itself.
    pub synonyms: Vec<String>,
}

impl LexiconEntry {
    /// The canonical term followed by its synonyms.
    pub fn surface_forms(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.term.as_str()).chain(self.synonyms.iter().map(String::as_str))
    }
}

/// A lexicon hit before negation is decided.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermMatch {
    pub term: String,
    pub category: Category,
    /// Byte offsets into the searched text.
    pub span: (usize, usize),
}

fn is_hyphen(c: char) -> bool {
    matches!(c, '-' | '\u{2010}' | '\u{2011}')
}

/// Lowercase and join words split on whitespace or hyphens with one space;
/// two surface strings denote the same form iff their keys are equal.
pub fn surface_key(s: &str) -> String {
    s.split(|c: char| c.is_whitespace() || is_hyphen(c))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    by_key: HashMap<String, usize>,
    matcher: Regex,
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Lexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Lexicon, LexiconError> {
        if entries.is_empty() {
            return Err(LexiconError::Empty);
        }
        let mut by_key: HashMap<String, usize> = HashMap::new();
        let mut canon = std::collections::HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if !canon.insert(surface_key(&e.term)) {
                return Err(LexiconError::DuplicateTerm(e.term.clone()));
            }
            for form in e.surface_forms() {
                let key = surface_key(form);
                if key.is_empty() {
                    return Err(LexiconError::Parse { line: 0, message: format!("empty surface form for {:?}", e.term) });
                }
                match by_key.get(&key) {
                    Some(&j) if j != i => {
                        return Err(LexiconError::AmbiguousSynonym {
                            synonym: form.to_string(),
                            first: entries[j].term.clone(),
                            second: e.term.clone(),
                        })
                    }
                    _ => {
                        by_key.insert(key, i);
                    }
                }
            }
        }

        // Longest alternatives first so the leftmost-first regex engine
        // prefers the longest surface form at each position.
        let mut keys: Vec<&String> = by_key.keys().collect();
        keys.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        let alternatives: Vec<String> = keys
            .iter()
            .map(|k| k.split(' ').map(regex::escape).collect::<Vec<_>>().join(r"[\s\-\x{2010}\x{2011}]+"))
            .collect();
        let pattern = format!(r"(?i)\b(?:{})\b", alternatives.join("|"));
        let matcher = Regex::new(&pattern).map_err(|e| LexiconError::Parse { line: 0, message: e.to_string() })?;
        Ok(Lexicon { entries, by_key, matcher })
    }

    /// Parse `term TAB category TAB synonym|synonym|...` lines. Blank lines
    /// and lines starting with `#` are ignored; the synonym column is optional.
    pub fn parse_tsv(text: &str) -> Result<Lexicon, LexiconError> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 2 || cols.len() > 3 {
                return Err(LexiconError::Parse { line: line_no, message: format!("expected 2 or 3 columns, got {}", cols.len()) });
            }
            let term = cols[0].trim();
            if term.is_empty() {
                return Err(LexiconError::Parse { line: line_no, message: "empty term".into() });
            }
            let category = cols[1].parse().map_err(|e| match e {
                LexiconError::Parse { message, .. } => LexiconError::Parse { line: line_no, message },
                other => other,
            })?;
            let synonyms = cols
                .get(2)
                .map(|s| s.split('|').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
                .unwrap_or_default();
            entries.push(LexiconEntry { term: term.to_string(), category, synonyms });
        }
        Lexicon::new(entries)
    }

    pub fn load(path: &Path) -> Result<Lexicon, LexiconError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| LexiconError::Io { path: path.display().to_string(), source })?;
        Lexicon::parse_tsv(&text)
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn count(&self, category: Category) -> usize {
        self.entries.iter().filter(|e| e.category == category).count()
    }

    pub fn entry(&self, term: &str) -> Option<&LexiconEntry> {
        self.entries.iter().find(|e| e.term == term)
    }

    /// Canonical entry for a surface string, if it is a known form.
    pub fn resolve(&self, surface: &str) -> Option<&LexiconEntry> {
        self.by_key.get(&surface_key(surface)).map(|&i| &self.entries[i])
    }

    /// Canonical terms of one category in lexicon order.
    pub fn terms(&self, category: Category) -> Vec<&str> {
        self.entries.iter().filter(|e| e.category == category).map(|e| e.term.as_str()).collect()
    }

    /// Non-overlapping, case-insensitive, word-bounded, longest-match hits in
    /// `text`, in order of position.
    pub fn find_mentions(&self, text: &str) -> Vec<TermMatch> {
        self.matcher
            .find_iter(text)
            .filter_map(|m| {
                // Unicode simple case folding can match strings that
                // lowercasing does not map back to a key; those are dropped.
                let entry = self.resolve(m.as_str())?;
                Some(TermMatch { term: entry.term.clone(), category: entry.category, span: (m.start(), m.end()) })
            })
            .collect()
    }
}

/// The shipped lexicon: 15 symptoms and 20 radiographic findings.
pub fn load_default_lexicon() -> Lexicon {
    Lexicon::parse_tsv(DEFAULT_LEXICON).expect("bundled lexicon is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn terms(lex: &Lexicon, text: &str) -> Vec<String> {
        lex.find_mentions(text).into_iter().map(|m| m.term).collect()
    }

    #[test]
    fn default_counts() {
        let lex = load_default_lexicon();
        assert_eq!(lex.count(Category::Symptom), 15);
        assert_eq!(lex.count(Category::Finding), 20);
    }

    #[test]
    fn ggo_resolves() {
        let lex = load_default_lexicon();
        assert_eq!(lex.resolve("GGO").unwrap().term, "ground-glass opacification");
        assert_eq!(lex.resolve("ground glass   opacities").unwrap().term, "ground-glass opacification");
    }

    #[test]
    fn longest_match_and_boundaries() {
        let lex = load_default_lexicon();
        assert_eq!(terms(&lex, "fever and cough"), ["fever", "cough"]);
        let m = lex.find_mentions("sputum production noted");
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].term.as_str(), m[0].span), ("sputum production", (0, 17)));
        assert_eq!(terms(&lex, "bilateral ground-glass opacities"), ["ground-glass opacification"]);
        assert_eq!(terms(&lex, "feverish coughing"), ["cough"]);
        assert_eq!(terms(&lex, "massive"), Vec::<String>::new());
        assert!(lex.find_mentions("").is_empty());
    }

    #[test]
    fn case_and_hyphen_insensitive() {
        let lex = load_default_lexicon();
        assert_eq!(terms(&lex, "CRAZY-PAVING and Pleural  Effusion"), ["crazy paving", "effusion"]);
    }

    #[test]
    fn rejects_ambiguous_and_duplicate() {
        let dup = "fever\tsymptom\nFever\tsymptom\n";
        assert!(matches!(Lexicon::parse_tsv(dup), Err(LexiconError::DuplicateTerm(_))));
        let amb = "fever\tsymptom\tpyrexia\nheat\tsymptom\tpyrexia\n";
        assert!(matches!(Lexicon::parse_tsv(amb), Err(LexiconError::AmbiguousSynonym { .. })));
        assert!(matches!(Lexicon::parse_tsv("fever\tsign\n"), Err(LexiconError::Parse { line: 1, .. })));
        assert!(matches!(Lexicon::parse_tsv("# nothing\n"), Err(LexiconError::Empty)));
    }
}
