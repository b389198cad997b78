//! End-to-end run: ingest, link, split, filter, classify, mine, report.

use crate::classifier::{self, Modality, ModalityClassifier, ModelParams};
use crate::config::{ArticlesConfig, ConfigError, PipelineConfig, SourceMode};
use crate::ingest::{
    collect_corpus, fetch_image_with_retry, ArticleDocument, ArticleSource, ContentCache, CorpusRequest,
    FetchOutcome, FetchStatus, LiveConfig, Pmcid,
};
use crate::linker::{link_figures, LinkedFigure};
use crate::manifest::{self, ManifestEntry, ManifestFormat, PASSAGE_SEPARATOR};
use crate::raster::RasterImage;
use crate::splitter::{crop, crop_file_name, filter_min_size, split_compound, SplitParams};
use crate::stats::{render_frequency_svg, FrequencyReport};
use crate::textmine::{
    mine_linked_figure, summarize_mentions, Category, Lexicon, Mention, NegationRules, Polarity,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

pub const IMAGE_DIR: &str = "images";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("output {path} is not writable: {source}")]
    OutputNotWritable { path: String, source: std::io::Error },
}

fn config_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(ConfigError::Invalid(msg.into()))
}

/// Per-article outcome, one line in the run summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleStatus {
    pub id: String,
    pub cohort: String,
    #[serde(flatten)]
    pub outcome: FetchOutcome,
    pub figures: usize,
    pub subfigures_before_filter: usize,
    pub subfigures_after_filter: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub figure_failures: Vec<String>,
}

/// Stage counts of a run. Contains no timings, so reruns compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub articles_requested: usize,
    pub articles_parsed: usize,
    pub articles_skipped: usize,
    pub figures: usize,
    pub figures_without_image: usize,
    pub subfigures_before_filter: usize,
    pub subfigures_after_filter: usize,
    pub modality_counts: BTreeMap<String, usize>,
    pub mentions: usize,
    pub positive_mentions: usize,
    pub negated_mentions: usize,
    pub articles: Vec<ArticleStatus>,
}

/// Per-cohort term counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermCount {
    pub term: String,
    pub category: Category,
    /// Articles with at least one positive mention.
    pub articles_positive: usize,
    pub positive_mentions: usize,
    pub negated_mentions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortTerms {
    pub label: String,
    pub articles: usize,
    pub terms: Vec<TermCount>,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub cohorts: Vec<CohortTerms>,
    /// Present when a comparison cohort is configured.
    pub comparison: Option<FrequencyReport>,
}

/// Shared, immutable resources for processing articles.
pub struct Context<'a> {
    pub source: &'a ArticleSource,
    pub split: &'a SplitParams,
    pub classifier: &'a dyn ModalityClassifier,
    pub lexicon: &'a Lexicon,
    pub rules: &'a NegationRules,
    /// Output root; crops go to `<output_dir>/images`.
    pub output_dir: &'a Path,
}

/// Everything produced for one article.
#[derive(Debug, Clone, Default)]
pub struct ArticleResult {
    pub entries: Vec<ManifestEntry>,
    pub mentions: Vec<Mention>,
    pub figures: usize,
    pub subfigures_before_filter: usize,
    pub figure_failures: Vec<String>,
}

fn figure_entries(
    lf: &LinkedFigure,
    cohort: &str,
    image: &RasterImage,
    ctx: &Context<'_>,
    mentions: &[Mention],
) -> Result<(usize, Vec<ManifestEntry>), String> {
    let boxes = split_compound(image, ctx.split);
    let kept = filter_min_size(&boxes, ctx.split);
    let summaries = summarize_mentions(mentions);
    let mut entries = Vec::with_capacity(kept.len());
    for (k, b) in kept.iter().enumerate() {
        let index = k + 1;
        let sub = crop(image, b).map_err(|e| e.to_string())?;
        let name = crop_file_name(lf.article.pmcid.as_str(), lf.figure.figure_number, index);
        let rel = format!("{IMAGE_DIR}/{name}");
        sub.save_png(&ctx.output_dir.join(&rel)).map_err(|e| e.to_string())?;
        let pred = ctx.classifier.classify(&sub).map_err(|e| e.to_string())?;
        entries.push(
            ManifestEntry {
                pmcid: lf.article.pmcid.to_string(),
                cohort: cohort.to_string(),
                doi: lf.article.doi.clone(),
                title: lf.article.title.clone(),
                journal: lf.article.journal.clone(),
                pub_date: lf.article.pub_date.clone(),
                license: lf.article.license.clone(),
                figure_number: lf.figure.figure_number,
                subfigure_index: index as u32,
                image_path: rel,
                width: sub.width(),
                height: sub.height(),
                modality: pred.label.as_str().to_string(),
                prob_ct: pred.probs[Modality::Ct.index()],
                prob_cxr: pred.probs[Modality::Cxr.index()],
                prob_other: pred.probs[Modality::Other.index()],
                caption: lf.figure.caption_text.clone(),
                referring_text: lf.referring_text.join(PASSAGE_SEPARATOR),
                mentions: summaries.clone(),
            }
            .normalized(),
        );
    }
    Ok((boxes.len(), entries))
}

/// Link, split, filter, classify and mine one parsed article. Figure-level
/// failures (missing or undecodable images) are recorded, not fatal.
pub fn process_article(doc: &ArticleDocument, cohort: &str, ctx: &Context<'_>) -> ArticleResult {
    let mut out = ArticleResult::default();
    for lf in link_figures(doc) {
        out.figures += 1;
        let mentions = mine_linked_figure(&lf, ctx.lexicon, ctx.rules);
        let image = fetch_image_with_retry(ctx.source, &doc.pmcid, &lf.figure.graphic_ref)
            .map_err(|e| e.to_string())
            .and_then(|bytes| RasterImage::decode(&bytes).map_err(|e| e.to_string()));
        match image.and_then(|img| figure_entries(&lf, cohort, &img, ctx, &mentions)) {
            Ok((before, entries)) => {
                out.subfigures_before_filter += before;
                out.entries.extend(entries);
            }
            Err(reason) => out.figure_failures.push(format!("figure {}: {reason}", lf.figure.figure_number)),
        }
        out.mentions.extend(mentions);
    }
    out
}

fn build_source(cfg: &PipelineConfig) -> Result<ArticleSource, PipelineError> {
    let source = match cfg.source.mode {
        SourceMode::Fixture => {
            let dir = cfg.source.fixture_dir.as_ref().ok_or_else(|| config_err("fixture mode requires fixture_dir"))?;
            if !dir.is_dir() {
                return Err(config_err(format!("fixture directory {} does not exist", dir.display())));
            }
            ArticleSource::fixture(dir)
        }
        SourceMode::Live => {
            let mut live = LiveConfig::from_env();
            if let Some(base) = &cfg.source.api_base {
                live.api_base = base.clone();
            }
            ArticleSource::live(live)
        }
    };
    Ok(match &cfg.source.cache_dir {
        Some(dir) => source.with_cache(ContentCache::new(dir)),
        None => source,
    })
}

fn request(articles: &ArticlesConfig) -> Result<CorpusRequest, PipelineError> {
    match articles.resolve_ids()? {
        Some(ids) if ids.is_empty() => Err(config_err("article ID list is empty")),
        Some(ids) => Ok(CorpusRequest::Ids(ids)),
        None => Ok(CorpusRequest::Query {
            term: articles.query.clone().unwrap_or_default(),
            max_results: articles.max_results.unwrap_or(100),
        }),
    }
}

/// Load the configured model, or train one on synthetic images.
pub fn load_or_train_model(cfg: &PipelineConfig) -> Result<ModelParams, PipelineError> {
    match &cfg.classifier.model {
        Some(path) => ModelParams::load(path).map_err(|e| config_err(format!("model {}: {e}", path.display()))),
        None => {
            let hp = cfg.classifier.hyperparams(cfg.seed);
            classifier::train_synthetic(cfg.classifier.train_per_class, &hp)
                .map(|o| o.params)
                .map_err(|e| config_err(format!("training failed: {e}")))
        }
    }
}

pub fn load_text_resources(cfg: &PipelineConfig) -> Result<(Lexicon, NegationRules), PipelineError> {
    let lexicon = match &cfg.text.lexicon {
        Some(path) => Lexicon::load(path).map_err(|e| config_err(e.to_string()))?,
        None => crate::textmine::load_default_lexicon(),
    };
    let rules = match &cfg.text.negation_dir {
        Some(dir) => NegationRules::load_dir(dir, cfg.text.scope_window).map_err(|e| config_err(e.to_string()))?,
        None => NegationRules { scope_window: cfg.text.scope_window, ..NegationRules::default() },
    };
    Ok((lexicon, rules))
}

fn cohort_terms(label: &str, articles: &[Vec<Mention>], lexicon: &Lexicon) -> CohortTerms {
    let terms = lexicon
        .entries()
        .iter()
        .map(|e| {
            let mut tc = TermCount {
                term: e.term.clone(),
                category: e.category,
                articles_positive: 0,
                positive_mentions: 0,
                negated_mentions: 0,
            };
            for mentions in articles {
                let mut positive = false;
                for m in mentions.iter().filter(|m| m.term == e.term) {
                    match m.polarity {
                        Polarity::Positive => {
                            tc.positive_mentions += 1;
                            positive = true;
                        }
                        Polarity::Negated => tc.negated_mentions += 1,
                    }
                }
                tc.articles_positive += positive as usize;
            }
            tc
        })
        .collect();
    CohortTerms { label: label.to_string(), articles: articles.len(), terms }
}

struct Output<'a>(&'a Path);

impl Output<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<(), PipelineError> {
        let path = self.path(name);
        std::fs::write(&path, bytes)
            .map_err(|source| PipelineError::OutputNotWritable { path: path.display().to_string(), source })
    }
}

/// Run the whole pipeline and write `manifest.jsonl`, `manifest.csv`,
/// `mentions.jsonl`, `report.json`, `run_summary.json`, `model.json` and,
/// with a comparison cohort, `report_symptoms.svg` and `report_findings.svg`.
///
/// Outputs depend only on the configuration, the inputs and the seed.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    cfg.validate()?;
    let out = Output(&cfg.output_dir);
    let images = cfg.output_dir.join(IMAGE_DIR);
    std::fs::create_dir_all(&images)
        .map_err(|source| PipelineError::OutputNotWritable { path: images.display().to_string(), source })?;

    let source = build_source(cfg)?;
    let (lexicon, rules) = load_text_resources(cfg)?;
    let model = load_or_train_model(cfg)?;
    out.write("model.json", model.to_json() + "\n")?;

    let mut cohorts = vec![(cfg.cohort.label.clone(), request(&cfg.articles)?)];
    if let Some(c) = &cfg.compare {
        cohorts.push((c.label.clone(), request(&c.articles)?));
    }

    // Fetching stays sequential so live requests respect the rate limit.
    let mut fetched = Vec::new();
    let mut seen = BTreeSet::new();
    for (label, req) in &cohorts {
        let corpus = collect_corpus(req, &source).map_err(|e| config_err(e.to_string()))?;
        for doc in &corpus.documents {
            if !seen.insert(doc.pmcid.clone()) {
                return Err(config_err(format!("{} is listed more than once", doc.pmcid)));
            }
        }
        fetched.push((label.clone(), corpus));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| config_err(format!("worker pool: {e}")))?;
    let ctx = Context {
        source: &source,
        split: &cfg.split,
        classifier: &model,
        lexicon: &lexicon,
        rules: &rules,
        output_dir: &cfg.output_dir,
    };

    let mut summary = RunSummary {
        articles_requested: 0,
        articles_parsed: 0,
        articles_skipped: 0,
        figures: 0,
        figures_without_image: 0,
        subfigures_before_filter: 0,
        subfigures_after_filter: 0,
        modality_counts: Modality::ALL.iter().map(|m| (m.as_str().to_string(), 0)).collect(),
        mentions: 0,
        positive_mentions: 0,
        negated_mentions: 0,
        articles: Vec::new(),
    };
    let mut entries = Vec::new();
    let mut all_mentions = Vec::new();
    let mut per_cohort: Vec<(String, Vec<Vec<Mention>>)> = Vec::new();

    for (label, corpus) in &fetched {
        let results: Vec<ArticleResult> =
            pool.install(|| corpus.documents.par_iter().map(|doc| process_article(doc, label, &ctx)).collect());
        let mut docs = corpus.documents.iter().zip(results);
        let mut cohort_mentions = Vec::new();
        for status in &corpus.statuses {
            summary.articles_requested += 1;
            let mut line = ArticleStatus {
                id: status.id.clone(),
                cohort: label.clone(),
                outcome: status.outcome.clone(),
                figures: 0,
                subfigures_before_filter: 0,
                subfigures_after_filter: 0,
                figure_failures: Vec::new(),
            };
            if status.outcome == FetchOutcome::Ok {
                let (_, r) = docs.next().expect("one document per ok status");
                summary.articles_parsed += 1;
                summary.figures += r.figures;
                summary.figures_without_image += r.figure_failures.len();
                summary.subfigures_before_filter += r.subfigures_before_filter;
                summary.subfigures_after_filter += r.entries.len();
                for e in &r.entries {
                    *summary.modality_counts.entry(e.modality.clone()).or_default() += 1;
                }
                for m in &r.mentions {
                    summary.mentions += 1;
                    match m.polarity {
                        Polarity::Positive => summary.positive_mentions += 1,
                        Polarity::Negated => summary.negated_mentions += 1,
                    }
                }
                line.figures = r.figures;
                line.subfigures_before_filter = r.subfigures_before_filter;
                line.subfigures_after_filter = r.entries.len();
                line.figure_failures = r.figure_failures;
                log::info!(
                    "article={} cohort={} status=ok figures={} subfigures={} kept={} mentions={} failures={}",
                    status.id,
                    label,
                    line.figures,
                    line.subfigures_before_filter,
                    line.subfigures_after_filter,
                    r.mentions.len(),
                    line.figure_failures.len()
                );
                entries.extend(r.entries);
                all_mentions.extend(r.mentions.iter().cloned());
                cohort_mentions.push(r.mentions);
            } else {
                summary.articles_skipped += 1;
                if let FetchOutcome::Skipped { reason } = &status.outcome {
                    log::info!("article={} cohort={} status=skipped reason={reason:?}", status.id, label);
                }
            }
            summary.articles.push(line);
        }
        per_cohort.push((label.clone(), cohort_mentions));
    }

    manifest::emit_manifest(&entries, ManifestFormat::Jsonl, &out.path("manifest.jsonl")).map_err(not_writable)?;
    manifest::emit_manifest(&entries, ManifestFormat::Csv, &out.path("manifest.csv")).map_err(not_writable)?;

    let mut mentions_jsonl = String::new();
    for m in &all_mentions {
        mentions_jsonl.push_str(&serde_json::to_string(m).expect("mention serializes"));
        mentions_jsonl.push('\n');
    }
    out.write("mentions.jsonl", mentions_jsonl)?;

    write_report(&cfg.output_dir, &build_report(&per_cohort, &lexicon))?;
    out.write("run_summary.json", serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n")?;
    log::info!(
        "run complete: {} articles parsed, {} skipped, {} figures, {} subfigures kept of {}",
        summary.articles_parsed,
        summary.articles_skipped,
        summary.figures,
        summary.subfigures_after_filter,
        summary.subfigures_before_filter
    );
    Ok(summary)
}

/// Per-cohort term counts plus, for exactly two cohorts, their frequency
/// comparison. Each cohort is a list of per-article mention lists.
pub fn build_report(per_cohort: &[(String, Vec<Vec<Mention>>)], lexicon: &Lexicon) -> RunReport {
    let comparison = match per_cohort {
        [(la, a), (lb, b)] => match FrequencyReport::build(la, lb, a, b, lexicon) {
            Ok(r) => Some(r),
            Err(e) => {
                log::warn!("no cohort comparison: {e}");
                None
            }
        },
        _ => None,
    };
    RunReport { cohorts: per_cohort.iter().map(|(l, m)| cohort_terms(l, m, lexicon)).collect(), comparison }
}

/// Write `report.json` and, with a comparison, the two frequency charts.
pub fn write_report(dir: &Path, report: &RunReport) -> Result<(), PipelineError> {
    let out = Output(dir);
    if let Some(cmp) = &report.comparison {
        out.write("report_symptoms.svg", render_frequency_svg(cmp, Category::Symptom))?;
        out.write("report_findings.svg", render_frequency_svg(cmp, Category::Finding))?;
    }
    out.write("report.json", serde_json::to_string_pretty(report).expect("report serializes") + "\n")
}

/// Regroup a run's mentions into per-cohort, per-article lists using the
/// article order and cohort labels of its summary. Skipped articles are left
/// out; parsed articles without mentions count as empty lists.
pub fn group_mentions(summary: &RunSummary, mentions: &[Mention]) -> Vec<(String, Vec<Vec<Mention>>)> {
    let mut out: Vec<(String, Vec<Vec<Mention>>)> = Vec::new();
    for status in summary.articles.iter().filter(|s| s.outcome == FetchOutcome::Ok) {
        let id: Option<Pmcid> = status.id.parse().ok();
        let article: Vec<Mention> = mentions.iter().filter(|m| Some(&m.pmcid) == id.as_ref()).cloned().collect();
        match out.iter_mut().find(|(label, _)| *label == status.cohort) {
            Some((_, articles)) => articles.push(article),
            None => out.push((status.cohort.clone(), vec![article])),
        }
    }
    out
}

fn not_writable(e: manifest::ManifestError) -> PipelineError {
    match e {
        manifest::ManifestError::Io { path, source } => PipelineError::OutputNotWritable { path, source },
        other => config_err(other.to_string()),
    }
}

/// Statuses of the articles a corpus request would fetch, for the CLI.
pub fn fetch_statuses(cfg: &PipelineConfig) -> Result<(Vec<ArticleDocument>, Vec<FetchStatus>), PipelineError> {
    let source = build_source(cfg)?;
    let corpus = collect_corpus(&request(&cfg.articles)?, &source).map_err(|e| config_err(e.to_string()))?;
    Ok((corpus.documents, corpus.statuses))
}
