//! Trigger, scope-window and terminator negation rules.

use regex::Regex;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::LazyLock;

static TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[\p{L}\p{N}]+(?:['’]\p{L}+)?").unwrap());

const PRE_TRIGGERS: &str = include_str!("../../data/negation/pre_triggers.txt");
const POST_TRIGGERS: &str = include_str!("../../data/negation/post_triggers.txt");
const TERMINATORS: &str = include_str!("../../data/negation/terminators.txt");
const PSEUDO_TRIGGERS: &str = include_str!("../../data/negation/pseudo_triggers.txt");

pub const DEFAULT_SCOPE_WINDOW: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negated,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negated => "negated",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum NegationRulesError {
    #[error("{0} list is empty")]
    EmptyList(&'static str),
    #[error("scope window must be at least 1")]
    ZeroWindow,
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Negation rules. Phrases are stored as lowercase token sequences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegationRules {
    pub pre_triggers: Vec<Vec<String>>,
    pub post_triggers: Vec<Vec<String>>,
    pub terminators: Vec<Vec<String>>,
    /// Phrases that contain a trigger but do not negate, e.g. "no change".
    pub pseudo_triggers: Vec<Vec<String>>,
    /// Maximum number of tokens a trigger reaches.
    pub scope_window: usize,
}

fn tokenize(text: &str) -> Vec<(usize, usize)> {
    TOKEN.find_iter(text).map(|m| (m.start(), m.end())).collect()
}

/// One phrase per line; `#` comments and blank lines are skipped.
pub fn parse_phrase_list(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| TOKEN.find_iter(l).map(|m| m.as_str().to_lowercase()).collect::<Vec<_>>())
        .filter(|p| !p.is_empty())
        .collect()
}

impl Default for NegationRules {
    fn default() -> Self {
        NegationRules {
            pre_triggers: parse_phrase_list(PRE_TRIGGERS),
            post_triggers: parse_phrase_list(POST_TRIGGERS),
            terminators: parse_phrase_list(TERMINATORS),
            pseudo_triggers: parse_phrase_list(PSEUDO_TRIGGERS),
            scope_window: DEFAULT_SCOPE_WINDOW,
        }
    }
}

impl NegationRules {
    pub fn validate(&self) -> Result<(), NegationRulesError> {
        if self.pre_triggers.is_empty() {
            return Err(NegationRulesError::EmptyList("pre-trigger"));
        }
        if self.post_triggers.is_empty() {
            return Err(NegationRulesError::EmptyList("post-trigger"));
        }
        if self.scope_window == 0 {
            return Err(NegationRulesError::ZeroWindow);
        }
        Ok(())
    }

    /// Load `pre_triggers.txt`, `post_triggers.txt`, `terminators.txt` and
    /// `pseudo_triggers.txt` from `dir`; missing terminator or pseudo-trigger
    /// files fall back to empty lists.
    pub fn load_dir(dir: &Path, scope_window: usize) -> Result<NegationRules, NegationRulesError> {
        let read = |name: &str, required: bool| -> Result<Vec<Vec<String>>, NegationRulesError> {
            let path = dir.join(name);
            match std::fs::read_to_string(&path) {
                Ok(text) => Ok(parse_phrase_list(&text)),
                Err(e) if !required && e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
                Err(source) => Err(NegationRulesError::Io { path: path.display().to_string(), source }),
            }
        };
        let rules = NegationRules {
            pre_triggers: read("pre_triggers.txt", true)?,
            post_triggers: read("post_triggers.txt", true)?,
            terminators: read("terminators.txt", false)?,
            pseudo_triggers: read("pseudo_triggers.txt", false)?,
            scope_window,
        };
        rules.validate()?;
        Ok(rules)
    }
}

/// Token-index ranges `[i, j)` where any phrase of `phrases` occurs.
fn occurrences(tokens: &[String], phrases: &[Vec<String>]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..tokens.len() {
        for p in phrases {
            if i + p.len() <= tokens.len() && tokens[i..i + p.len()] == p[..] {
                out.push((i, i + p.len()));
            }
        }
    }
    out
}

/// Polarity of the mention at byte `span` of `sentence`.
///
/// Negated iff an unmasked pre-trigger ends at most `scope_window - 1`
/// tokens before the mention's first token with no terminator in between,
/// or a post-trigger starts at most `scope_window - 1` tokens after the
/// mention's last token with no terminator in between. Triggers that lie
/// inside a pseudo-trigger phrase are masked.
pub fn detect_negation(sentence: &str, span: (usize, usize), rules: &NegationRules) -> Polarity {
    let spans = tokenize(sentence);
    let tokens: Vec<String> = spans.iter().map(|&(s, e)| sentence[s..e].to_lowercase()).collect();
    let first = spans.iter().position(|&(_, e)| e > span.0).unwrap_or(spans.len());
    let after = spans.iter().position(|&(s, _)| s >= span.1).unwrap_or(spans.len()).max(first);

    let mut masked = vec![false; tokens.len()];
    for (i, j) in occurrences(&tokens, &rules.pseudo_triggers) {
        masked[i..j].iter_mut().for_each(|m| *m = true);
    }
    let live = |(i, j): &(usize, usize)| !masked[*i..*j].iter().any(|&m| m);
    let terminators = occurrences(&tokens, &rules.terminators);
    let blocked = |lo: usize, hi: usize| terminators.iter().any(|&(i, j)| i >= lo && j <= hi);
    let window = rules.scope_window;

    let pre = occurrences(&tokens, &rules.pre_triggers)
        .into_iter()
        .filter(live)
        .any(|(_, j)| j <= first && first - j < window && !blocked(j, first));
    if pre {
        return Polarity::Negated;
    }
    let post = occurrences(&tokens, &rules.post_triggers)
        .into_iter()
        .filter(live)
        .any(|(i, _)| i >= after && i - after < window && !blocked(after, i));
    if post {
        Polarity::Negated
    } else {
        Polarity::Positive
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polarity(sentence: &str, term: &str) -> Polarity {
        let start = sentence.find(term).unwrap();
        detect_negation(sentence, (start, start + term.len()), &NegationRules::default())
    }

    #[test]
    fn defaults_are_valid() {
        NegationRules::default().validate().unwrap();
    }

    #[test]
    fn pre_trigger_with_terminator() {
        let s = "He noted myalgia and a sore throat but no fever on 3 February.";
        assert_eq!(polarity(s, "fever"), Polarity::Negated);
        assert_eq!(polarity(s, "myalgia"), Polarity::Positive);
        assert_eq!(polarity(s, "sore throat"), Polarity::Positive);
        let s = "denies chest pain but reports dyspnea";
        assert_eq!(polarity(s, "chest pain"), Polarity::Negated);
        assert_eq!(polarity(s, "dyspnea"), Polarity::Positive);
        assert_eq!(polarity("fever", "fever"), Polarity::Positive);
    }

    #[test]
    fn window_limits_reach() {
        let mut rules = NegationRules::default();
        let s = "no a b c d fever";
        let span = (11, 16);
        rules.scope_window = 5;
        assert_eq!(detect_negation(s, span, &rules), Polarity::Negated);
        rules.scope_window = 4;
        assert_eq!(detect_negation(s, span, &rules), Polarity::Positive);
    }

    #[test]
    fn post_trigger_and_pseudo() {
        assert_eq!(polarity("Pneumothorax was ruled out.", "Pneumothorax"), Polarity::Negated);
        assert_eq!(polarity("No change in the consolidation.", "consolidation"), Polarity::Positive);
    }

    #[test]
    fn validation() {
        let mut r = NegationRules::default();
        r.scope_window = 0;
        assert!(r.validate().is_err());
        r.scope_window = 3;
        r.pre_triggers.clear();
        assert!(r.validate().is_err());
    }
}
