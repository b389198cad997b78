use super::{parse_bioc, ArticleDocument, Pmcid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

pub const API_BASE_ENV: &str = "FIGMINE_API_BASE";
pub const DEFAULT_API_BASE: &str = "https://www.ncbi.nlm.nih.gov/research/bionlp/RESTful/pmcoa.cgi";
pub const DEFAULT_SEARCH_BASE: &str = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils";
pub const DEFAULT_IMAGE_BASE: &str = "https://www.ncbi.nlm.nih.gov/pmc/articles";

const MAX_BODY_BYTES: u64 = 200 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FetchError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0} is not available as open-access full text")]
    NotOpenAccess(String),
    #[error("network error: {0}")]
    Network(String),
    #[error("rate limited; retry after {retry_after_secs} s")]
    RateLimited { retry_after_secs: u64 },
    #[error("query resolution requires live mode")]
    QueryNeedsLive,
}

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub api_base: String,
    pub search_base: String,
    pub image_base: String,
    pub min_delay: Duration,
    pub timeout: Duration,
    pub max_retries: u32,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            api_base: DEFAULT_API_BASE.to_string(),
            search_base: DEFAULT_SEARCH_BASE.to_string(),
            image_base: DEFAULT_IMAGE_BASE.to_string(),
            min_delay: Duration::from_millis(350),
            timeout: Duration::from_secs(60),
            max_retries: 3,
        }
    }
}

impl LiveConfig {
    /// Defaults with the API base taken from `FIGMINE_API_BASE` when set.
    pub fn from_env() -> Self {
        let mut cfg = LiveConfig::default();
        if let Ok(base) = std::env::var(API_BASE_ENV) {
            if !base.trim().is_empty() {
                cfg.api_base = base.trim().to_string();
            }
        }
        cfg
    }
}

struct LiveClient {
    cfg: LiveConfig,
    agent: ureq::Agent,
    // One queue for every request so the inter-request delay holds across
    // worker threads.
    last_request: Mutex<Option<Instant>>,
}

impl LiveClient {
    fn new(cfg: LiveConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .user_agent("figmine/0.1")
            .build()
            .into();
        LiveClient { cfg, agent, last_request: Mutex::new(None) }
    }

    fn get(&self, url: &str, query: &[(&str, &str)], what: &str) -> Result<Vec<u8>, FetchError> {
        let mut last = self.last_request.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = *last {
            let elapsed = t.elapsed();
            if elapsed < self.cfg.min_delay {
                thread::sleep(self.cfg.min_delay - elapsed);
            }
        }
        let mut req = self.agent.get(url);
        for (k, v) in query {
            req = req.query(*k, *v);
        }
        let result = req.call();
        *last = Some(Instant::now());
        drop(last);

        let mut resp = result.map_err(|e| FetchError::Network(e.to_string()))?;
        let status = resp.status().as_u16();
        match status {
            200..=299 => {}
            404 => return Err(FetchError::NotFound(what.to_string())),
            401 | 403 | 451 => return Err(FetchError::NotOpenAccess(what.to_string())),
            429 => {
                let retry_after_secs = resp
                    .headers()
                    .get("retry-after")
                    .and_then(|v| v.to_str().ok())
                    .and_then(|v| v.trim().parse().ok())
                    .unwrap_or(1);
                return Err(FetchError::RateLimited { retry_after_secs });
            }
            s => return Err(FetchError::Network(format!("HTTP {s} for {what}"))),
        }
        resp.body_mut()
            .with_config()
            .limit(MAX_BODY_BYTES)
            .read_to_vec()
            .map_err(|e| FetchError::Network(e.to_string()))
    }
}

/// Content-addressed store of fetched article bytes.
///
/// Objects live at `objects/<sha256>.xml`; `refs/<PMCID>` holds the hash.
#[derive(Debug, Clone)]
pub struct ContentCache {
    root: PathBuf,
}

impl ContentCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ContentCache { root: root.into() }
    }

    pub fn get(&self, pmcid: &Pmcid) -> Option<Vec<u8>> {
        let hash = std::fs::read_to_string(self.root.join("refs").join(pmcid.as_str())).ok()?;
        let bytes = std::fs::read(self.object_path(hash.trim())).ok()?;
        (hex::encode(Sha256::digest(&bytes)) == hash.trim()).then_some(bytes)
    }

    pub fn put(&self, pmcid: &Pmcid, bytes: &[u8]) -> io::Result<String> {
        let hash = hex::encode(Sha256::digest(bytes));
        std::fs::create_dir_all(self.root.join("objects"))?;
        std::fs::create_dir_all(self.root.join("refs"))?;
        let obj = self.object_path(&hash);
        if !obj.exists() {
            let tmp = obj.with_extension("tmp");
            std::fs::write(&tmp, bytes)?;
            std::fs::rename(&tmp, &obj)?;
        }
        std::fs::write(self.root.join("refs").join(pmcid.as_str()), &hash)?;
        Ok(hash)
    }

    fn object_path(&self, hash: &str) -> PathBuf {
        self.root.join("objects").join(format!("{hash}.xml"))
    }
}

enum Mode {
    Fixture(PathBuf),
    Live(LiveClient),
}

/// Where articles and figure images come from.
pub struct ArticleSource {
    mode: Mode,
    cache: Option<ContentCache>,
}

impl ArticleSource {
    /// Reads `<dir>/<PMCID>.xml` and images from `<dir>/<PMCID>/<file>`.
    pub fn fixture(dir: impl Into<PathBuf>) -> Self {
        ArticleSource { mode: Mode::Fixture(dir.into()), cache: None }
    }

    pub fn live(cfg: LiveConfig) -> Self {
        ArticleSource { mode: Mode::Live(LiveClient::new(cfg)), cache: None }
    }

    pub fn with_cache(mut self, cache: ContentCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn is_live(&self) -> bool {
        matches!(self.mode, Mode::Live(_))
    }

    fn max_retries(&self) -> u32 {
        match &self.mode {
            Mode::Live(c) => c.cfg.max_retries,
            Mode::Fixture(_) => 0,
        }
    }

    pub fn fetch_article(&self, pmcid: &Pmcid) -> Result<Vec<u8>, FetchError> {
        if let Some(bytes) = self.cache.as_ref().and_then(|c| c.get(pmcid)) {
            return Ok(bytes);
        }
        let bytes = match &self.mode {
            Mode::Fixture(dir) => read_file(&dir.join(format!("{pmcid}.xml")), pmcid.as_str())?,
            Mode::Live(client) => {
                let url = format!("{}/BioC_xml/{}/unicode", client.cfg.api_base.trim_end_matches('/'), pmcid);
                let bytes = client.get(&url, &[], pmcid.as_str())?;
                // The service answers 200 with an "[Error]" page for articles
                // outside the open-access subset.
                let head = String::from_utf8_lossy(&bytes[..bytes.len().min(256)]).to_string();
                if head.trim_start().starts_with("[Error]") || head.contains("No result can be found") {
                    return Err(FetchError::NotOpenAccess(pmcid.to_string()));
                }
                bytes
            }
        };
        if let Some(cache) = &self.cache {
            if let Err(e) = cache.put(pmcid, &bytes) {
                log::warn!("cache write failed for {pmcid}: {e}");
            }
        }
        Ok(bytes)
    }

    pub fn fetch_image(&self, pmcid: &Pmcid, graphic_ref: &str) -> Result<Vec<u8>, FetchError> {
        let what = format!("{pmcid}/{graphic_ref}");
        if graphic_ref.contains("..") || graphic_ref.starts_with('/') {
            return Err(FetchError::NotFound(what));
        }
        match &self.mode {
            Mode::Fixture(dir) => read_file(&dir.join(pmcid.as_str()).join(graphic_ref), &what),
            Mode::Live(client) => {
                let url = format!(
                    "{}/{}/bin/{}",
                    client.cfg.image_base.trim_end_matches('/'),
                    pmcid,
                    graphic_ref
                );
                client.get(&url, &[], &what)
            }
        }
    }

    /// Resolve a search query to PMCIDs through the E-utilities search endpoint.
    pub fn resolve_query(&self, query: &str, max_results: usize) -> Result<Vec<Pmcid>, FetchError> {
        let Mode::Live(client) = &self.mode else {
            return Err(FetchError::QueryNeedsLive);
        };
        #[derive(Deserialize)]
        struct Search {
            esearchresult: SearchResult,
        }
        #[derive(Deserialize)]
        struct SearchResult {
            idlist: Vec<String>,
        }
        let url = format!("{}/esearch.fcgi", client.cfg.search_base.trim_end_matches('/'));
        let retmax = max_results.to_string();
        let body = client.get(
            &url,
            &[("db", "pmc"), ("term", query), ("retmode", "json"), ("retmax", &retmax)],
            "search",
        )?;
        let parsed: Search =
            serde_json::from_slice(&body).map_err(|e| FetchError::Network(format!("bad search response: {e}")))?;
        Ok(parsed
            .esearchresult
            .idlist
            .iter()
            .filter_map(|id| format!("PMC{}", id.trim_start_matches("PMC")).parse().ok())
            .collect())
    }
}

fn read_file(path: &Path, what: &str) -> Result<Vec<u8>, FetchError> {
    std::fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => FetchError::NotFound(what.to_string()),
        _ => FetchError::Network(format!("{}: {e}", path.display())),
    })
}

/// Fetch the raw BioC XML of one article.
pub fn fetch_article(pmcid: &Pmcid, source: &ArticleSource) -> Result<Vec<u8>, FetchError> {
    source.fetch_article(pmcid)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusRequest {
    Ids(Vec<String>),
    Query { term: String, max_results: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FetchOutcome {
    Ok,
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchStatus {
    pub id: String,
    #[serde(flatten)]
    pub outcome: FetchOutcome,
}

#[derive(Debug, Default)]
pub struct Corpus {
    pub documents: Vec<ArticleDocument>,
    pub statuses: Vec<FetchStatus>,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("configuration error: {0}")]
    Config(String),
}

/// Fetch and parse every requested article.
///
/// Only configuration problems abort; individual fetch or parse failures
/// become `Skipped` statuses. Rate-limited requests are retried after the
/// server's delay up to the source's retry budget.
pub fn collect_corpus(request: &CorpusRequest, source: &ArticleSource) -> Result<Corpus, CorpusError> {
    let ids: Vec<String> = match request {
        CorpusRequest::Ids(ids) => {
            if ids.is_empty() {
                return Err(CorpusError::Config("article ID list is empty".into()));
            }
            ids.clone()
        }
        CorpusRequest::Query { term, max_results } => {
            if !source.is_live() {
                return Err(CorpusError::Config("query resolution requires live mode".into()));
            }
            source
                .resolve_query(term, *max_results)
                .map_err(|e| CorpusError::Config(format!("query resolution failed: {e}")))?
                .into_iter()
                .map(|p| p.to_string())
                .collect()
        }
    };

    let mut corpus = Corpus::default();
    for id in ids {
        let outcome = match id.parse::<Pmcid>() {
            Err(e) => Err(e.to_string()),
            Ok(pmcid) => fetch_with_retry(&pmcid, source)
                .map_err(|e| e.to_string())
                .and_then(|bytes| parse_bioc(&bytes).map_err(|e| e.to_string())),
        };
        match outcome {
            Ok(doc) => {
                corpus.documents.push(doc);
                corpus.statuses.push(FetchStatus { id, outcome: FetchOutcome::Ok });
            }
            Err(reason) => {
                log::info!("skipping {id}: {reason}");
                corpus.statuses.push(FetchStatus { id, outcome: FetchOutcome::Skipped { reason } });
            }
        }
    }
    Ok(corpus)
}

pub(crate) fn fetch_with_retry(pmcid: &Pmcid, source: &ArticleSource) -> Result<Vec<u8>, FetchError> {
    with_retry(source, pmcid.as_str(), || source.fetch_article(pmcid))
}

/// Fetch a figure image, retrying rate-limited requests like articles.
pub fn fetch_image_with_retry(source: &ArticleSource, pmcid: &Pmcid, graphic_ref: &str) -> Result<Vec<u8>, FetchError> {
    with_retry(source, graphic_ref, || source.fetch_image(pmcid, graphic_ref))
}

fn with_retry(
    source: &ArticleSource,
    what: &str,
    mut f: impl FnMut() -> Result<Vec<u8>, FetchError>,
) -> Result<Vec<u8>, FetchError> {
    let mut attempts = 0;
    loop {
        match f() {
            Err(FetchError::RateLimited { retry_after_secs }) if attempts < source.max_retries() => {
                attempts += 1;
                log::warn!("{what}: rate limited, retrying in {retry_after_secs} s");
                thread::sleep(Duration::from_secs(retry_after_secs));
            }
            other => return other,
        }
    }
}
