use figmine_core::textmine::{
    load_default_lexicon, mine_text, surface_key, Lexicon, NegationRules, Polarity,
};
use proptest::prelude::*;
use std::sync::LazyLock;

mod common;
use common::negation_suite as suite;

static LEXICON: LazyLock<Lexicon> = LazyLock::new(load_default_lexicon);

#[test]
fn suite_covers_sixty_sentences_and_known_terms() {
    let cases = suite();
    let lex = load_default_lexicon();
    let mut sentences: Vec<&str> = cases.iter().map(|c| c.sentence).collect();
    sentences.sort();
    sentences.dedup();
    assert!(sentences.len() >= 60, "{} sentences", sentences.len());
    for c in &cases {
        assert!(lex.entry(c.term).is_some(), "{} is not a canonical term", c.term);
    }
}

#[test]
fn negation_suite_accuracy() {
    let lex = load_default_lexicon();
    let rules = NegationRules::default();
    let cases = suite();
    let mut correct = 0;
    for c in &cases {
        let got = mine_text(c.sentence, &lex, &rules).into_iter().find(|m| m.hit.term == c.term).map(|m| m.polarity);
        if got == Some(c.expected) {
            correct += 1;
        } else {
            eprintln!("miss: {:?} {} expected {:?} got {:?}", c.sentence, c.term, c.expected, got);
        }
    }
    let acc = correct as f64 / cases.len() as f64;
    eprintln!("negation accuracy {correct}/{} = {acc:.3}", cases.len());
    assert!(acc >= 0.90);
}

#[test]
fn leading_mixed_polarity_example() {
    // The suite opens with one sentence carrying two positive symptoms and a
    // negated one; mining it whole must reproduce every label in order.
    let cases = suite();
    let sentence = cases[0].sentence;
    let expected: Vec<(&str, Polarity)> =
        cases.iter().filter(|c| c.sentence == sentence).map(|c| (c.term, c.expected)).collect();
    let lex = load_default_lexicon();
    let got: Vec<(String, Polarity)> =
        mine_text(sentence, &lex, &NegationRules::default()).into_iter().map(|m| (m.hit.term, m.polarity)).collect();
    let mut got_sorted: Vec<(&str, Polarity)> = got.iter().map(|(t, p)| (t.as_str(), *p)).collect();
    let mut expected_sorted = expected.clone();
    got_sorted.sort();
    expected_sorted.sort();
    assert_eq!(got_sorted, expected_sorted);
    assert_eq!(got.iter().map(|(t, _)| t.as_str()).collect::<Vec<_>>(), ["headache", "throat pain", "fever"]);
}

fn vocabulary(lex: &Lexicon) -> Vec<String> {
    let mut v: Vec<String> = lex.entries().iter().flat_map(|e| e.surface_forms().map(String::from)).collect();
    v.extend(
        ["no", "not", "but", "patient", "Fig.", "fevers.", "GGOs", "massive", "cough-like", "the", ";", "\n", "ß", "İ", "opacity"]
            .map(String::from),
    );
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mentions_are_sound(picks in prop::collection::vec((0usize..1000, 0usize..4, any::<bool>()), 0..30)) {
        let lex = &*LEXICON;
        let vocab = vocabulary(lex);
        let seps = [" ", "  ", "-", ", "];
        let mut text = String::new();
        for (w, s, upper) in picks {
            let word = &vocab[w % vocab.len()];
            text.push_str(&if upper { word.to_uppercase() } else { word.clone() });
            text.push_str(seps[s]);
        }
        let rules = NegationRules::default();
        let first = mine_text(&text, lex, &rules);
        for m in &first {
            let surface = &text[m.hit.span.0..m.hit.span.1];
            let entry = lex.resolve(surface).expect("span resolves");
            prop_assert_eq!(&entry.term, &m.hit.term);
            prop_assert!(entry.surface_forms().any(|f| surface_key(f) == surface_key(surface)));
        }
        for w in first.windows(2) {
            prop_assert!(w[0].hit.span.1 <= w[1].hit.span.0);
        }
        prop_assert_eq!(first, mine_text(&text, lex, &rules));
    }
}
