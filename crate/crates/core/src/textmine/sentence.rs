//! Rule-based sentence splitting with byte-offset spans.

/// Tokens that end with a period without ending the sentence. Compared
/// lowercase, without the final period.
const ABBREVIATIONS: &[&str] = &[
    "fig", "figs", "dr", "drs", "mr", "mrs", "ms", "prof", "e.g", "i.e", "al", "vs", "approx", "ca", "resp", "cf",
    "no", "nos", "vol", "suppl", "st", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct",
    "nov", "dec",
];

fn is_abbreviation(before: &str) -> bool {
    let word_start = before
        .char_indices()
        .rev()
        .find(|(_, c)| !(c.is_alphanumeric() || *c == '.'))
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    let word = &before[word_start..];
    if word.is_empty() {
        return false;
    }
    let lower = word.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}

/// Split `text` into sentence spans `(start, end)` in bytes, trimmed of
/// surrounding whitespace. Boundaries are `;`, `?`, `!`, newlines, and a `.`
/// followed by whitespace or end of text, unless the period closes a known
/// abbreviation.
pub fn split_sentences(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        let end = i + c.len_utf8();
        let boundary = match c {
            '\n' | ';' | '?' | '!' => true,
            '.' => {
                let next = iter.peek().map(|&(_, n)| n);
                next.is_none_or(char::is_whitespace) && !is_abbreviation(&text[start..i])
            }
            _ => false,
        };
        if boundary {
            push_trimmed(text, start, end, &mut out);
            start = end;
        }
    }
    push_trimmed(text, start, text.len(), &mut out);
    out
}

fn push_trimmed(text: &str, start: usize, end: usize, out: &mut Vec<(usize, usize)>) {
    let seg = &text[start..end];
    let lead = seg.len() - seg.trim_start().len();
    let trimmed = seg.trim();
    if !trimmed.is_empty() {
        out.push((start + lead, start + lead + trimmed.len()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentences(text: &str) -> Vec<&str> {
        split_sentences(text).into_iter().map(|(s, e)| &text[s..e]).collect()
    }

    #[test]
    fn basic_boundaries() {
        assert_eq!(sentences("Fever. No cough; mild fatigue\nHeadache!"), ["Fever.", "No cough;", "mild fatigue", "Headache!"]);
        assert!(sentences("").is_empty());
        assert!(sentences("  \n ").is_empty());
    }

    #[test]
    fn abbreviation_and_decimal_guards() {
        assert_eq!(
            sentences("As shown in Fig. 2, GGO was seen (e.g. in case 3). Temperature was 38.5 C. Done"),
            ["As shown in Fig. 2, GGO was seen (e.g. in case 3).", "Temperature was 38.5 C.", "Done"]
        );
        assert_eq!(sentences("Smith et al. reported fever. Doe agreed."), ["Smith et al. reported fever.", "Doe agreed."]);
    }

    #[test]
    fn spans_index_the_original_text() {
        let text = "  Fever.   Cough.";
        assert_eq!(split_sentences(text), vec![(2, 8), (11, 17)]);
    }
}
