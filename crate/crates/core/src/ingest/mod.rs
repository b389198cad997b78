//! Article ingestion: fetching BioC XML (live or from a fixture directory)
//! and parsing it into [`ArticleDocument`] values.

mod bioc;
mod fetch;

pub use bioc::{parse_bioc, ParseError};
pub use fetch::{
    collect_corpus, fetch_article, fetch_image_with_retry, ArticleSource, ContentCache, Corpus, CorpusError,
    CorpusRequest, FetchError, FetchOutcome, FetchStatus, LiveConfig, API_BASE_ENV,
    DEFAULT_API_BASE, DEFAULT_IMAGE_BASE, DEFAULT_SEARCH_BASE,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// A PubMed Central identifier, always stored as `PMC` followed by digits.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Pmcid(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid PMCID {0:?}: expected `PMC` followed by digits")]
pub struct InvalidPmcid(pub String);

impl Pmcid {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Numeric part without the `PMC` prefix.
    pub fn digits(&self) -> &str {
        &self.0[3..]
    }
}

impl FromStr for Pmcid {
    type Err = InvalidPmcid;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let digits = if t.len() > 3 && t[..3].eq_ignore_ascii_case("PMC") {
            &t[3..]
        } else {
            return Err(InvalidPmcid(s.to_string()));
        };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(InvalidPmcid(s.to_string()));
        }
        Ok(Pmcid(format!("PMC{digits}")))
    }
}

impl TryFrom<String> for Pmcid {
    type Error = InvalidPmcid;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Pmcid> for String {
    fn from(p: Pmcid) -> String {
        p.0
    }
}

impl fmt::Display for Pmcid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Section types used by PMC BioC passages. Unknown values map to `Other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SectionType {
    Title,
    Abstract,
    Intro,
    Methods,
    Results,
    Discuss,
    Concl,
    Case,
    Fig,
    Table,
    Ref,
    Suppl,
    AckFund,
    AuthCont,
    CompInt,
    Abbr,
    Keyword,
    ReviewInfo,
    Appendix,
    Other,
}

impl SectionType {
    pub const ALL: [SectionType; 20] = [
        SectionType::Title,
        SectionType::Abstract,
        SectionType::Intro,
        SectionType::Methods,
        SectionType::Results,
        SectionType::Discuss,
        SectionType::Concl,
        SectionType::Case,
        SectionType::Fig,
        SectionType::Table,
        SectionType::Ref,
        SectionType::Suppl,
        SectionType::AckFund,
        SectionType::AuthCont,
        SectionType::CompInt,
        SectionType::Abbr,
        SectionType::Keyword,
        SectionType::ReviewInfo,
        SectionType::Appendix,
        SectionType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SectionType::Title => "TITLE",
            SectionType::Abstract => "ABSTRACT",
            SectionType::Intro => "INTRO",
            SectionType::Methods => "METHODS",
            SectionType::Results => "RESULTS",
            SectionType::Discuss => "DISCUSS",
            SectionType::Concl => "CONCL",
            SectionType::Case => "CASE",
            SectionType::Fig => "FIG",
            SectionType::Table => "TABLE",
            SectionType::Ref => "REF",
            SectionType::Suppl => "SUPPL",
            SectionType::AckFund => "ACK_FUND",
            SectionType::AuthCont => "AUTH_CONT",
            SectionType::CompInt => "COMP_INT",
            SectionType::Abbr => "ABBR",
            SectionType::Keyword => "KEYWORD",
            SectionType::ReviewInfo => "REVIEW_INFO",
            SectionType::Appendix => "APPENDIX",
            SectionType::Other => "OTHER",
        }
    }

    /// Lenient mapping from the `section_type` infon.
    pub fn from_infon(raw: &str) -> SectionType {
        let up = raw.trim().to_ascii_uppercase();
        SectionType::ALL
            .into_iter()
            .find(|s| s.as_str() == up)
            .unwrap_or(match up.as_str() {
                "DISCUSSION" => SectionType::Discuss,
                "CONCLUSION" | "CONCLUSIONS" => SectionType::Concl,
                "INTRODUCTION" => SectionType::Intro,
                "METHOD" => SectionType::Methods,
                "RESULT" => SectionType::Results,
                "FIGURE" => SectionType::Fig,
                "REFERENCES" => SectionType::Ref,
                _ => SectionType::Other,
            })
    }
}

impl fmt::Display for SectionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub section_type: SectionType,
    pub text: String,
    /// Character offset into the source document.
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FigureBlock {
    pub figure_number: u32,
    pub raw_label: String,
    pub caption_text: String,
    pub graphic_ref: String,
    /// Index of the FIG passage this block was built from.
    pub passage_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleDocument {
    pub pmcid: Pmcid,
    pub doi: Option<String>,
    pub title: String,
    pub journal: Option<String>,
    pub pub_date: Option<String>,
    pub license: Option<String>,
    pub passages: Vec<Passage>,
    pub figures: Vec<FigureBlock>,
    /// Non-fatal oddities met while parsing (duplicate figure blocks, FIG
    /// passages without a graphic).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ArticleDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("article serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    pub fn figure(&self, number: u32) -> Option<&FigureBlock> {
        self.figures.iter().find(|f| f.figure_number == number)
    }
}

/// Collapse whitespace runs to a single space, trim, and NFC-normalize.
pub fn normalize_text(raw: &str) -> String {
    use unicode_normalization::UnicodeNormalization;
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out.nfc().collect()
}
