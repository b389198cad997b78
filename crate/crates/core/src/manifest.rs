//! Dataset manifest: one entry per kept subfigure, written as JSONL and CSV.

use crate::classifier::Modality;
use crate::ingest::Pmcid;
use crate::textmine::MentionSummary;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Minimum subfigure side in pixels.
pub const MIN_SIDE: u32 = 224;

/// Separator between referring passages in `referring_text`.
pub const PASSAGE_SEPARATOR: &str = "\n\n";

/// Field order here is the order of JSONL keys and CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub pmcid: String,
    pub cohort: String,
    pub doi: Option<String>,
    pub title: String,
    pub journal: Option<String>,
    pub pub_date: Option<String>,
    pub license: Option<String>,
    pub figure_number: u32,
    /// 1-based position among the figure's kept subfigures.
    pub subfigure_index: u32,
    /// Relative to the manifest's directory.
    pub image_path: String,
    pub width: u32,
    pub height: u32,
    pub modality: String,
    pub prob_ct: f64,
    pub prob_cxr: f64,
    pub prob_other: f64,
    pub caption: String,
    pub referring_text: String,
    pub mentions: Vec<MentionSummary>,
}

/// CSV form: the mention list is a JSON string and absent values are empty.
#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    pmcid: String,
    cohort: String,
    doi: Option<String>,
    title: String,
    journal: Option<String>,
    pub_date: Option<String>,
    license: Option<String>,
    figure_number: u32,
    subfigure_index: u32,
    image_path: String,
    width: u32,
    height: u32,
    modality: String,
    prob_ct: f64,
    prob_cxr: f64,
    prob_other: f64,
    caption: String,
    referring_text: String,
    mentions: String,
}

pub const CSV_HEADER: [&str; 19] = [
    "pmcid",
    "cohort",
    "doi",
    "title",
    "journal",
    "pub_date",
    "license",
    "figure_number",
    "subfigure_index",
    "image_path",
    "width",
    "height",
    "modality",
    "prob_ct",
    "prob_cxr",
    "prob_other",
    "caption",
    "referring_text",
    "mentions",
];

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifestFormat {
    Jsonl,
    Csv,
}

impl ManifestFormat {
    /// `.csv` selects CSV; anything else is JSONL.
    pub fn from_path(path: &Path) -> ManifestFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => ManifestFormat::Csv,
            _ => ManifestFormat::Jsonl,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ManifestError + '_ {
    move |source| ManifestError::Io { path: path.display().to_string(), source }
}

fn non_empty(s: Option<String>) -> Option<String> {
    s.filter(|v| !v.is_empty())
}

impl ManifestEntry {
    /// Empty optional metadata is stored as absent so both formats agree.
    pub fn normalized(mut self) -> Self {
        self.doi = non_empty(self.doi);
        self.journal = non_empty(self.journal);
        self.pub_date = non_empty(self.pub_date);
        self.license = non_empty(self.license);
        self
    }

    pub fn key(&self) -> (&str, u32, u32) {
        (&self.pmcid, self.figure_number, self.subfigure_index)
    }

    fn to_csv_row(&self) -> CsvRow {
        CsvRow {
            pmcid: self.pmcid.clone(),
            cohort: self.cohort.clone(),
            doi: self.doi.clone(),
            title: self.title.clone(),
            journal: self.journal.clone(),
            pub_date: self.pub_date.clone(),
            license: self.license.clone(),
            figure_number: self.figure_number,
            subfigure_index: self.subfigure_index,
            image_path: self.image_path.clone(),
            width: self.width,
            height: self.height,
            modality: self.modality.clone(),
            prob_ct: self.prob_ct,
            prob_cxr: self.prob_cxr,
            prob_other: self.prob_other,
            caption: self.caption.clone(),
            referring_text: self.referring_text.clone(),
            mentions: serde_json::to_string(&self.mentions).expect("mentions serialize"),
        }
    }

    fn from_csv_row(row: CsvRow) -> Result<Self, serde_json::Error> {
        Ok(ManifestEntry {
            pmcid: row.pmcid,
            cohort: row.cohort,
            doi: non_empty(row.doi),
            title: row.title,
            journal: non_empty(row.journal),
            pub_date: non_empty(row.pub_date),
            license: non_empty(row.license),
            figure_number: row.figure_number,
            subfigure_index: row.subfigure_index,
            image_path: row.image_path,
            width: row.width,
            height: row.height,
            modality: row.modality,
            prob_ct: row.prob_ct,
            prob_cxr: row.prob_cxr,
            prob_other: row.prob_other,
            caption: row.caption,
            referring_text: row.referring_text,
            mentions: serde_json::from_str(&row.mentions)?,
        })
    }
}

pub fn write_jsonl<W: Write>(out: W, entries: &[ManifestEntry]) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// RFC 4180 CSV with a header row, even when there are no entries.
pub fn write_csv<W: Write>(out: W, entries: &[ManifestEntry]) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for e in entries {
        w.serialize(e.to_csv_row())?;
    }
    w.flush()
}

/// Write `entries` to `path` in `format`.
pub fn emit_manifest(entries: &[ManifestEntry], format: ManifestFormat, path: &Path) -> Result<(), ManifestError> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    match format {
        ManifestFormat::Jsonl => write_jsonl(file, entries),
        ManifestFormat::Csv => write_csv(file, entries),
    }
    .map_err(io_err(path))
}

/// Entries with their 1-based line numbers (CSV lines count the header).
pub fn read_manifest(path: &Path) -> Result<Vec<(usize, ManifestEntry)>, ManifestError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    match ManifestFormat::from_path(path) {
        ManifestFormat::Jsonl => read_jsonl(file),
        ManifestFormat::Csv => read_csv(file),
    }
}

pub fn read_jsonl<R: std::io::Read>(input: R) -> Result<Vec<(usize, ManifestEntry)>, ManifestError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| ManifestError::Schema { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line)
            .map_err(|e| ManifestError::Schema { line: line_no, message: e.to_string() })?;
        out.push((line_no, entry));
    }
    Ok(out)
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<(usize, ManifestEntry)>, ManifestError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| ManifestError::Schema { line: 1, message: e.to_string() })?;
    if header.iter().ne(CSV_HEADER) {
        return Err(ManifestError::Schema { line: 1, message: "unexpected CSV header".into() });
    }
    let mut out = Vec::new();
    for row in r.deserialize::<CsvRow>() {
        let row = row.map_err(|e| ManifestError::Schema {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = out.len() + 2;
        let entry = ManifestEntry::from_csv_row(row)
            .map_err(|e| ManifestError::Schema { line, message: format!("mentions: {e}") })?;
        out.push((line, entry));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub entries: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check entry invariants, the modality vocabulary, duplicate keys, and that
/// each image exists (relative to the manifest's directory) with the recorded
/// dimensions.
pub fn validate_manifest(path: &Path) -> Result<ValidationReport, ManifestError> {
    let entries = read_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut violations = Vec::new();
    let mut seen: HashMap<(String, u32, u32), usize> = HashMap::new();
    for (line, e) in &entries {
        let mut v = |message: String| violations.push(Violation { line: *line, message });
        if e.pmcid.parse::<Pmcid>().is_err() {
            v(format!("invalid pmcid {:?}", e.pmcid));
        }
        if e.width < MIN_SIDE || e.height < MIN_SIDE {
            v(format!("{}x{} is below {MIN_SIDE} filter", e.width, e.height));
        }
        if Modality::ALL.iter().all(|m| m.as_str() != e.modality) {
            v(format!("modality {:?} is not one of CT, CXR, Other", e.modality));
        }
        let probs = [e.prob_ct, e.prob_cxr, e.prob_other];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            v("modality probabilities are not a distribution".into());
        }
        if e.figure_number == 0 || e.subfigure_index == 0 {
            v("figure_number and subfigure_index are 1-based".into());
        }
        let key = (e.pmcid.clone(), e.figure_number, e.subfigure_index);
        if let Some(first) = seen.get(&key) {
            v(format!(
                "duplicate entry {} figure {} subfigure {} on lines {first} and {line}",
                e.pmcid, e.figure_number, e.subfigure_index
            ));
        } else {
            seen.insert(key, *line);
        }
        let image = base.join(&e.image_path);
        match image::image_dimensions(&image) {
            Ok((w, h)) if (w, h) != (e.width, e.height) => {
                v(format!("{} is {w}x{h}, manifest says {}x{}", e.image_path, e.width, e.height))
            }
            Ok(_) => {}
            Err(err) => v(format!("{}: {err}", e.image_path)),
        }
    }
    Ok(ValidationReport { entries: entries.len(), violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(caption: &str) -> ManifestEntry {
        ManifestEntry {
            pmcid: "PMC1".into(),
            cohort: "covid19".into(),
            doi: Some("10.1/x".into()),
            title: "T".into(),
            journal: None,
            pub_date: Some("2020".into()),
            license: None,
            figure_number: 1,
            subfigure_index: 1,
            image_path: "images/PMC1_fig1_1.png".into(),
            width: 300,
            height: 240,
            modality: "CT".into(),
            prob_ct: 0.7,
            prob_cxr: 0.2,
            prob_other: 0.1,
            caption: caption.into(),
            referring_text: String::new(),
            mentions: Vec::new(),
        }
    }

    #[test]
    fn empty_csv_has_header_only() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), CSV_HEADER.join(",") + "\n");
    }

    #[test]
    fn csv_quoting_roundtrip() {
        let e = entry("Axial CT, \"bilateral\" GGO;\nsecond line\r\nthird");
        let mut buf = Vec::new();
        write_csv(&mut buf, std::slice::from_ref(&e)).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back[0].1, e);
    }
}
