use figmine_core::ingest::{ArticleDocument, FigureBlock, Passage, SectionType};
use figmine_core::linker::{find_references, link_figures, normalize_figure_label, scan_mentions};
use proptest::prelude::*;
use std::collections::BTreeSet;

const TABLE: &str = include_str!("data/figure_mentions.tsv");
const MAX_FIG: u32 = 12;

fn rows() -> Vec<(&'static str, Vec<(u32, Option<char>)>)> {
    TABLE
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let (raw, expected) = l.split_once('\t').expect("raw TAB expected");
            let pairs = if expected == "-" {
                vec![]
            } else {
                expected
                    .split(',')
                    .map(|t| {
                        let digits: String = t.chars().take_while(char::is_ascii_digit).collect();
                        let panel = t[digits.len()..].chars().next();
                        (digits.parse().unwrap(), panel)
                    })
                    .collect()
            };
            (raw, pairs)
        })
        .collect()
}

fn article(body: &str) -> ArticleDocument {
    let mut passages = vec![Passage { section_type: SectionType::Results, text: body.to_string(), offset: 0 }];
    let mut figures = Vec::new();
    for n in 1..=MAX_FIG {
        passages.push(Passage {
            section_type: SectionType::Fig,
            text: format!("Figure {n}. Caption text."),
            offset: 1000 * n as u64,
        });
        figures.push(FigureBlock {
            figure_number: n,
            raw_label: format!("Figure {n}"),
            caption_text: format!("Figure {n}. Caption text."),
            graphic_ref: format!("gr{n}.jpg"),
            passage_index: passages.len() - 1,
        });
    }
    ArticleDocument {
        pmcid: "PMC42".parse().unwrap(),
        doi: None,
        title: String::new(),
        journal: None,
        pub_date: None,
        license: None,
        passages,
        figures,
        warnings: vec![],
    }
}

#[test]
fn expansion_table_has_enough_rows() {
    assert!(rows().len() >= 40);
}

#[test]
fn normalize_matches_expansion_table() {
    for (raw, expected) in rows() {
        assert_eq!(normalize_figure_label(raw), expected, "row {raw:?}");
    }
}

#[test]
fn find_references_matches_expansion_table() {
    for (raw, expected) in rows() {
        let body = format!("As described ({raw}) in the text.");
        let doc = article(&body);
        let want: BTreeSet<u32> = expected.iter().map(|p| p.0).collect();
        for n in 1..=MAX_FIG {
            let refs = find_references(&doc, n).unwrap();
            assert_eq!(!refs.is_empty(), want.contains(&n), "row {raw:?}, figure {n}");
            for r in refs {
                let slice = &doc.passages[r.passage_index].text[r.span.0..r.span.1];
                assert!(
                    normalize_figure_label(slice).iter().any(|p| p.0 == n),
                    "span {slice:?} does not denote figure {n}"
                );
            }
        }
    }
}

#[test]
fn case_figure_links_case_passage() {
    // A caption plus one case-description passage citing it.
    let case = "A 45-year-old man presented with fever and cough for 5 days. Chest CT (Fig. 2) showed \
                bilateral ground-glass opacities.";
    let mut doc = article(case);
    doc.passages[0].section_type = SectionType::Case;
    doc.passages[2].text =
        "Figure 2. CT and CXR that are positive for COVID-19 pneumonia.".to_string();
    doc.figures[1].caption_text = doc.passages[2].text.clone();
    let linked = link_figures(&doc);
    let fig2 = linked.iter().find(|l| l.figure.figure_number == 2).unwrap();
    assert_eq!(fig2.referring_text, vec![case.to_string()]);
    assert!(!fig2.referring_passages.contains(&fig2.figure.passage_index));
}

proptest! {
    #[test]
    fn spans_are_sound_on_random_text(words in prop::collection::vec(
        prop::sample::select(vec!["Fig.", "Figure", "Figs", "and", "2", "3a", "b", "1–4", ",", "the", "CT", "(", ")", "c"]),
        0..30,
    )) {
        let text = words.join(" ");
        for m in scan_mentions(&text) {
            prop_assert!(m.start < m.end && m.end <= text.len());
            let again = normalize_figure_label(&text[m.start..m.end]);
            prop_assert_eq!(again, m.pairs);
        }
    }

    #[test]
    fn linking_is_pure(body in "[a-zA-Z0-9 .,–-]{0,80}") {
        let doc = article(&body);
        prop_assert_eq!(link_figures(&doc), link_figures(&doc));
    }
}
