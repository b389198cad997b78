use super::{normalize_text, ArticleDocument, FigureBlock, Passage, Pmcid, SectionType};
use crate::linker::scan_mentions;
use quick_xml::events::Event;
use quick_xml::Reader;
use regex::Regex;
use std::collections::BTreeMap;
use std::sync::LazyLock;

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("missing required field `{0}`")]
    MissingRequiredField(&'static str),
    #[error("document is not valid UTF-8: {0}")]
    EncodingError(String),
}

#[derive(Default)]
struct RawPassage {
    infons: BTreeMap<String, String>,
    offset: Option<String>,
    text: String,
}

#[derive(Default)]
struct RawDocument {
    id: Option<String>,
    infons: BTreeMap<String, String>,
    passages: Vec<RawPassage>,
}

/// Parse a BioC XML collection holding one article.
///
/// Only the first `<document>` is read. Passages whose text is empty after
/// whitespace normalization are dropped.
pub fn parse_bioc(bytes: &[u8]) -> Result<ArticleDocument, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ParseError::EncodingError(e.to_string()))?;
    let raw = read_first_document(text)?;
    build_document(raw)
}

fn read_first_document(xml: &str) -> Result<RawDocument, ParseError> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(false);

    let mut stack: Vec<String> = Vec::new();
    let mut doc: Option<RawDocument> = None;
    let mut done = false;
    let mut passage: Option<RawPassage> = None;
    let mut infon_key: Option<String> = None;
    let mut buf = String::new();

    loop {
        let ev = reader
            .read_event()
            .map_err(|e| ParseError::MalformedXml(format!("at byte {}: {e}", reader.error_position())))?;
        match ev {
            Event::Start(e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                if !done {
                    match name.as_str() {
                        "document" if doc.is_none() => doc = Some(RawDocument::default()),
                        "passage" if doc.is_some() => passage = Some(RawPassage::default()),
                        "infon" => {
                            infon_key = e
                                .try_get_attribute("key")
                                .map_err(|e| ParseError::MalformedXml(e.to_string()))?
                                .map(|a| {
                                    a.unescape_value()
                                        .map(|v| v.into_owned())
                                        .map_err(|e| ParseError::MalformedXml(e.to_string()))
                                })
                                .transpose()?;
                        }
                        _ => {}
                    }
                }
                buf.clear();
                stack.push(name);
            }
            Event::Empty(_) => {}
            Event::Text(t) => {
                let s = t.unescape().map_err(|e| ParseError::MalformedXml(e.to_string()))?;
                buf.push_str(&s);
            }
            Event::CData(c) => {
                buf.push_str(&String::from_utf8_lossy(&c.into_inner()));
            }
            Event::End(e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                match stack.pop() {
                    Some(open) if open == name => {}
                    other => {
                        return Err(ParseError::MalformedXml(format!(
                            "closing </{name}> does not match {other:?}"
                        )))
                    }
                }
                if !done {
                    let parent = stack.last().map(String::as_str);
                    match (name.as_str(), parent) {
                        ("document", _) if doc.is_some() => done = true,
                        ("passage", _) => {
                            if let (Some(p), Some(d)) = (passage.take(), doc.as_mut()) {
                                d.passages.push(p);
                            }
                        }
                        ("infon", Some("passage")) => {
                            if let (Some(k), Some(p)) = (infon_key.take(), passage.as_mut()) {
                                p.infons.insert(k, buf.clone());
                            }
                        }
                        ("infon", Some("document")) => {
                            if let (Some(k), Some(d)) = (infon_key.take(), doc.as_mut()) {
                                d.infons.insert(k, buf.clone());
                            }
                        }
                        ("offset", Some("passage")) => {
                            if let Some(p) = passage.as_mut() {
                                p.offset = Some(buf.trim().to_string());
                            }
                        }
                        ("text", Some("passage")) => {
                            if let Some(p) = passage.as_mut() {
                                p.text.push_str(&buf);
                            }
                        }
                        ("id", Some("document")) => {
                            if let Some(d) = doc.as_mut() {
                                d.id = Some(buf.trim().to_string());
                            }
                        }
                        _ => {}
                    }
                }
                buf.clear();
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if let Some(open) = stack.last() {
        return Err(ParseError::MalformedXml(format!("unexpected end of input inside <{open}>")));
    }
    doc.ok_or_else(|| ParseError::MalformedXml("no <document> element".into()))
}

fn resolve_pmcid(raw: &RawDocument) -> Option<Pmcid> {
    let candidates = std::iter::once(raw.id.as_deref())
        .chain(raw.passages.iter().map(|p| p.infons.get("article-id_pmc").map(String::as_str)))
        .chain(std::iter::once(raw.infons.get("article-id_pmc").map(String::as_str)))
        .flatten();
    for c in candidates {
        let c = c.trim();
        if let Ok(p) = c.parse::<Pmcid>() {
            return Some(p);
        }
        if !c.is_empty() && c.bytes().all(|b| b.is_ascii_digit()) {
            return format!("PMC{c}").parse().ok();
        }
    }
    None
}

fn first_infon<'a>(raw: &'a RawDocument, keys: &[&str]) -> Option<&'a str> {
    for key in keys {
        for p in &raw.passages {
            if let Some(v) = p.infons.get(*key) {
                let v = v.trim();
                if !v.is_empty() {
                    return Some(v);
                }
            }
        }
        if let Some(v) = raw.infons.get(*key) {
            let v = v.trim();
            if !v.is_empty() {
                return Some(v);
            }
        }
    }
    None
}

static ID_NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:f|fig|figure|g|gr)?[_\-]?0*(\d{1,4})$").unwrap());

/// Figure number and printed label for a FIG passage, if one can be read.
fn figure_label(infons: &BTreeMap<String, String>, caption: &str) -> (Option<u32>, String) {
    for key in ["label", "fig_label"] {
        if let Some(label) = infons.get(key) {
            let label = normalize_text(label);
            let num = scan_mentions(&label)
                .into_iter()
                .find(|m| m.start == 0)
                .and_then(|m| m.pairs.first().map(|p| p.0));
            if !label.is_empty() {
                return (num, label);
            }
        }
    }
    if let Some(m) = scan_mentions(caption).into_iter().find(|m| m.start == 0) {
        if let Some(&(n, _)) = m.pairs.first() {
            return (Some(n), caption[m.start..m.end].to_string());
        }
    }
    if let Some(id) = infons.get("id") {
        let id = id.trim();
        if let Some(c) = ID_NUMBER.captures(id) {
            if let Ok(n) = c[1].parse::<u32>() {
                if n >= 1 {
                    return (Some(n), id.to_string());
                }
            }
        }
        return (None, id.to_string());
    }
    (None, String::new())
}

fn build_document(raw: RawDocument) -> Result<ArticleDocument, ParseError> {
    let pmcid = resolve_pmcid(&raw).ok_or(ParseError::MissingRequiredField("pmcid"))?;

    let mut passages = Vec::new();
    let mut fig_meta = Vec::new();
    let mut title = None;
    let mut last_end: Option<u64> = None;
    for p in &raw.passages {
        let text = normalize_text(&p.text);
        if text.is_empty() {
            continue;
        }
        let offset: u64 = match &p.offset {
            Some(o) => o
                .parse()
                .map_err(|_| ParseError::MalformedXml(format!("passage offset {o:?} is not a number")))?,
            None => return Err(ParseError::MissingRequiredField("passage offset")),
        };
        if let Some(end) = last_end {
            if offset < end {
                return Err(ParseError::MalformedXml(format!(
                    "passage at offset {offset} overlaps the previous passage ending at {end}"
                )));
            }
        }
        last_end = Some(offset + text.chars().count().max(1) as u64);

        let section_type = p
            .infons
            .get("section_type")
            .map(|s| SectionType::from_infon(s))
            .or_else(|| match p.infons.get("type").map(String::as_str) {
                Some("front") => Some(SectionType::Title),
                Some(t) if t.starts_with("fig") => Some(SectionType::Fig),
                Some(t) if t.starts_with("table") => Some(SectionType::Table),
                Some("ref") => Some(SectionType::Ref),
                _ => None,
            })
            .unwrap_or(SectionType::Other);
        if section_type == SectionType::Title && title.is_none() {
            title = Some(text.clone());
        }
        if section_type == SectionType::Fig {
            fig_meta.push((passages.len(), p.infons.clone()));
        }
        passages.push(Passage { section_type, text, offset });
    }

    let mut warnings = Vec::new();
    // First pass: readable labels. Unreadable ones are numbered after the
    // largest readable number, in order of appearance.
    let mut labelled = Vec::new();
    for (idx, infons) in fig_meta {
        let caption = &passages[idx].text;
        let graphic = infons.get("file").map(|s| s.trim().to_string()).unwrap_or_default();
        if graphic.is_empty() {
            warnings.push(format!("FIG passage {idx} has no graphic file; not treated as a figure"));
            continue;
        }
        let (num, raw_label) = figure_label(&infons, caption);
        labelled.push((idx, num, raw_label, graphic));
    }
    let mut next = labelled.iter().filter_map(|l| l.1).max().unwrap_or(0);
    let mut figures: Vec<FigureBlock> = Vec::new();
    for (idx, num, raw_label, graphic_ref) in labelled {
        let figure_number = num.unwrap_or_else(|| {
            next += 1;
            next
        });
        let block = FigureBlock {
            figure_number,
            raw_label,
            caption_text: passages[idx].text.clone(),
            graphic_ref,
            passage_index: idx,
        };
        if let Some(existing) = figures
            .iter_mut()
            .find(|f| f.figure_number == block.figure_number && f.graphic_ref == block.graphic_ref)
        {
            // Title and caption of one figure can arrive as two FIG passages
            // sharing a graphic; keep the longer text.
            warnings.push(format!(
                "duplicate figure block (figure {}, {}) at passages {} and {}",
                block.figure_number, block.graphic_ref, existing.passage_index, block.passage_index
            ));
            if block.caption_text.chars().count() > existing.caption_text.chars().count() {
                *existing = block;
            }
            continue;
        }
        figures.push(block);
    }

    Ok(ArticleDocument {
        pmcid,
        doi: first_infon(&raw, &["article-id_doi", "doi"]).map(str::to_string),
        title: title.unwrap_or_default(),
        journal: first_infon(&raw, &["journal", "journal-title"]).map(str::to_string),
        pub_date: first_infon(&raw, &["pub_date", "date", "year"]).map(str::to_string),
        license: first_infon(&raw, &["license"]).map(str::to_string),
        passages,
        figures,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(passages: &str) -> String {
        format!(
            r#"<?xml version="1.0" encoding="UTF-8"?>
<!DOCTYPE collection SYSTEM "BioC.dtd">
<collection><source>PMC</source><date>20200509</date><key>pmc.key</key>
<document><id>7100000</id>{passages}</document></collection>"#
        )
    }

    fn passage(section: &str, extra: &str, offset: u64, text: &str) -> String {
        format!(
            r#"<passage><infon key="section_type">{section}</infon>{extra}<offset>{offset}</offset><text>{text}</text></passage>"#
        )
    }

    #[test]
    fn minimal_document_with_one_figure() {
        let xml = doc(&format!(
            "{}{}",
            passage(
                "TITLE",
                r#"<infon key="type">front</infon><infon key="article-id_doi">10.1000/x</infon><infon key="journal">Radiology</infon><infon key="year">2020</infon><infon key="license">CC BY</infon>"#,
                0,
                "A case"
            ),
            passage(
                "FIG",
                r#"<infon key="type">fig_caption</infon><infon key="id">F1</infon><infon key="file">gr1.jpg</infon>"#,
                7,
                "Figure 1  Chest CT."
            ),
        ));
        let d = parse_bioc(xml.as_bytes()).unwrap();
        let expected = ArticleDocument {
            pmcid: "PMC7100000".parse().unwrap(),
            doi: Some("10.1000/x".into()),
            title: "A case".into(),
            journal: Some("Radiology".into()),
            pub_date: Some("2020".into()),
            license: Some("CC BY".into()),
            passages: vec![
                Passage { section_type: SectionType::Title, text: "A case".into(), offset: 0 },
                Passage { section_type: SectionType::Fig, text: "Figure 1 Chest CT.".into(), offset: 7 },
            ],
            figures: vec![FigureBlock {
                figure_number: 1,
                raw_label: "Figure 1".into(),
                caption_text: "Figure 1 Chest CT.".into(),
                graphic_ref: "gr1.jpg".into(),
                passage_index: 1,
            }],
            warnings: vec![],
        };
        assert_eq!(d, expected);
    }

    #[test]
    fn no_figures_gives_empty_list() {
        let xml = doc(&passage("INTRO", "", 0, "Nothing to see."));
        let d = parse_bioc(xml.as_bytes()).unwrap();
        assert!(d.figures.is_empty());
        assert_eq!(d.passages.len(), 1);
        assert_eq!(d.doi, None);
    }

    #[test]
    fn truncated_xml_is_malformed() {
        let xml = doc(&passage("INTRO", "", 0, "Text"));
        let cut = &xml[..xml.len() - 30];
        assert!(matches!(parse_bioc(cut.as_bytes()), Err(ParseError::MalformedXml(_))));
    }

    #[test]
    fn missing_pmcid() {
        let xml = r#"<collection><document><passage><offset>0</offset><text>x</text></passage></document></collection>"#;
        assert!(matches!(
            parse_bioc(xml.as_bytes()),
            Err(ParseError::MissingRequiredField("pmcid"))
        ));
    }

    #[test]
    fn invalid_utf8() {
        let mut bytes = doc("").into_bytes();
        bytes.insert(60, 0xff);
        assert!(matches!(parse_bioc(&bytes), Err(ParseError::EncodingError(_))));
    }

    #[test]
    fn overlapping_offsets_rejected() {
        let xml = doc(&format!(
            "{}{}",
            passage("INTRO", "", 10, "first passage"),
            passage("INTRO", "", 12, "second")
        ));
        assert!(matches!(parse_bioc(xml.as_bytes()), Err(ParseError::MalformedXml(_))));
    }

    #[test]
    fn unparseable_label_numbered_after_readable_ones() {
        let xml = doc(&format!(
            "{}{}{}",
            passage("FIG", r#"<infon key="id">ga1</infon><infon key="file">ga1.jpg</infon>"#, 0, "Graphical abstract"),
            passage("FIG", r#"<infon key="id">F1</infon><infon key="file">gr1.jpg</infon>"#, 100, "Chest X-ray."),
            passage("FIG", r#"<infon key="label">Figure 2</infon><infon key="file">gr2.jpg</infon>"#, 200, "CT scan."),
        ));
        let d = parse_bioc(xml.as_bytes()).unwrap();
        let nums: Vec<_> = d.figures.iter().map(|f| (f.figure_number, f.raw_label.as_str())).collect();
        assert_eq!(nums, vec![(3, "ga1"), (1, "F1"), (2, "Figure 2")]);
    }

    #[test]
    fn duplicate_figure_blocks_collapsed() {
        let xml = doc(&format!(
            "{}{}",
            passage("FIG", r#"<infon key="type">fig_title_caption</infon><infon key="id">F1</infon><infon key="file">gr1.jpg</infon>"#, 0, "CT findings"),
            passage("FIG", r#"<infon key="type">fig_caption</infon><infon key="id">F1</infon><infon key="file">gr1.jpg</infon>"#, 20, "Axial CT shows bilateral GGO."),
        ));
        let d = parse_bioc(xml.as_bytes()).unwrap();
        assert_eq!(d.figures.len(), 1);
        assert_eq!(d.figures[0].caption_text, "Axial CT shows bilateral GGO.");
        assert_eq!(d.figures[0].passage_index, 1);
        assert_eq!(d.warnings.len(), 1);
    }

    #[test]
    fn entities_and_whitespace() {
        let xml = doc(&passage("RESULTS", "", 0, "fever &amp; cough\n  &#x2013; mild"));
        let d = parse_bioc(xml.as_bytes()).unwrap();
        assert_eq!(d.passages[0].text, "fever & cough \u{2013} mild");
    }
}
