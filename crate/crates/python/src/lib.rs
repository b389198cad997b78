//! Python bindings. Structured results cross the boundary as plain dicts and
//! lists; text spans are reported in characters, not bytes.

use figmine_core::classifier::{self, FeatureVector, Hyperparams, Modality, ModelParams};
use figmine_core::config::PipelineConfig;
use figmine_core::ingest::{self, ArticleDocument};
use figmine_core::linker;
use figmine_core::manifest;
use figmine_core::pipeline::{self, PipelineError};
use figmine_core::raster::RasterImage;
use figmine_core::splitter::{self, SplitParams};
use figmine_core::stats::{self, BinaryConfusion, ContingencyTable2x2};
use figmine_core::textmine::{self, Category, Lexicon, NegationRules};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::path::PathBuf;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = match obj.extract::<String>() {
        Ok(s) => s,
        Err(_) => obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?,
    };
    serde_json::from_str(&text).map_err(value_error)
}

fn bytes_or_str(obj: &Bound<'_, PyAny>) -> PyResult<Vec<u8>> {
    if let Ok(b) = obj.cast::<PyBytes>() {
        return Ok(b.as_bytes().to_vec());
    }
    Ok(obj.extract::<String>()?.into_bytes())
}

fn open_image(path: PathBuf) -> PyResult<RasterImage> {
    RasterImage::open(&path).map_err(|e| PyOSError::new_err(e.to_string()))
}

fn pixels_image(width: u32, height: u32, rgb: &[u8]) -> PyResult<RasterImage> {
    RasterImage::new(width, height, rgb.to_vec()).map_err(value_error)
}

fn pipeline_error(e: PipelineError) -> PyErr {
    match e {
        PipelineError::Config(c) => PyValueError::new_err(c.to_string()),
        e @ PipelineError::OutputNotWritable { .. } => PyOSError::new_err(e.to_string()),
    }
}

/// Parse a BioC XML document (bytes or str) into an article dict.
#[pyfunction]
fn parse_bioc<'py>(py: Python<'py>, data: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let bytes = bytes_or_str(data)?;
    let doc = ingest::parse_bioc(&bytes).map_err(value_error)?;
    to_py(py, &doc)
}

/// Link each figure of an article dict to the passages that cite it.
#[pyfunction]
fn link_figures<'py>(py: Python<'py>, article: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let doc: ArticleDocument = from_py(article)?;
    to_py(py, &linker::link_figures(&doc))
}

/// `(figure number, panel letter or None)` pairs denoted by a label.
#[pyfunction]
fn normalize_figure_label(raw: &str) -> Vec<(u32, Option<String>)> {
    linker::normalize_figure_label(raw).into_iter().map(|(n, p)| (n, p.map(String::from))).collect()
}

fn split_params(uniformity_threshold: f64, min_gutter: u32, max_depth: u32, min_panel: u32) -> PyResult<SplitParams> {
    let p = SplitParams { uniformity_threshold, min_gutter, max_depth, min_panel };
    p.validate().map_err(value_error)?;
    Ok(p)
}

fn boxes(img: &RasterImage, params: &SplitParams, keep_small: bool) -> Vec<(u32, u32, u32, u32)> {
    let mut found = splitter::split_compound(img, params);
    if !keep_small {
        found = splitter::filter_min_size(&found, params);
    }
    found.into_iter().map(|b| (b.x, b.y, b.w, b.h)).collect()
}

/// Subfigure boxes `(x, y, w, h)` of the image file at `path`.
#[pyfunction]
#[pyo3(signature = (path, *, uniformity_threshold=4.0, min_gutter=6, max_depth=4, min_panel=224, keep_small=false))]
fn split_compound(
    py: Python<'_>,
    path: PathBuf,
    uniformity_threshold: f64,
    min_gutter: u32,
    max_depth: u32,
    min_panel: u32,
    keep_small: bool,
) -> PyResult<Vec<(u32, u32, u32, u32)>> {
    let params = split_params(uniformity_threshold, min_gutter, max_depth, min_panel)?;
    let img = open_image(path)?;
    Ok(py.detach(|| boxes(&img, &params, keep_small)))
}

/// Like `split_compound`, for a row-major RGB8 buffer.
#[pyfunction]
#[pyo3(signature = (width, height, rgb, *, uniformity_threshold=4.0, min_gutter=6, max_depth=4, min_panel=224, keep_small=false))]
#[allow(clippy::too_many_arguments)]
fn split_pixels(
    py: Python<'_>,
    width: u32,
    height: u32,
    rgb: &[u8],
    uniformity_threshold: f64,
    min_gutter: u32,
    max_depth: u32,
    min_panel: u32,
    keep_small: bool,
) -> PyResult<Vec<(u32, u32, u32, u32)>> {
    let params = split_params(uniformity_threshold, min_gutter, max_depth, min_panel)?;
    let img = pixels_image(width, height, rgb)?;
    Ok(py.detach(|| boxes(&img, &params, keep_small)))
}

/// Two-sided Fisher exact p-value of the table `[[a, b], [c, d]]`.
#[pyfunction]
fn fisher_exact(a: u64, b: u64, c: u64, d: u64) -> PyResult<f64> {
    stats::fisher_exact(&ContingencyTable2x2 { a, b, c, d }).map_err(value_error)
}

/// Area under the ROC curve; ties count one half.
#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    stats::roc_auc(&scores, &labels).map(|r| r.auc).map_err(value_error)
}

/// Precision, recall, specificity and F1 from confusion counts.
#[pyfunction]
#[pyo3(signature = (tp, fp, tn, fn_, auc=None))]
fn compute_metrics(py: Python<'_>, tp: u64, fp: u64, tn: u64, fn_: u64, auc: Option<f64>) -> PyResult<Bound<'_, PyAny>> {
    let mut m = stats::compute_metrics(&BinaryConfusion { tp, fp, tn, fn_ });
    if let Some(a) = auc {
        m = m.with_auc(a);
    }
    to_py(py, &m)
}

/// Lexicon plus negation rules.
#[pyclass(frozen)]
struct TextMiner {
    lexicon: Lexicon,
    rules: NegationRules,
}

#[pymethods]
impl TextMiner {
    /// Bundled resources unless a lexicon TSV or negation directory is given.
    #[new]
    #[pyo3(signature = (lexicon=None, negation_dir=None, scope_window=textmine::DEFAULT_SCOPE_WINDOW))]
    fn new(lexicon: Option<PathBuf>, negation_dir: Option<PathBuf>, scope_window: usize) -> PyResult<Self> {
        let lexicon = match lexicon {
            Some(p) => Lexicon::load(&p).map_err(value_error)?,
            None => textmine::load_default_lexicon(),
        };
        let rules = match negation_dir {
            Some(d) => NegationRules::load_dir(&d, scope_window).map_err(value_error)?,
            None => NegationRules { scope_window, ..NegationRules::default() },
        };
        rules.validate().map_err(value_error)?;
        Ok(TextMiner { lexicon, rules })
    }

    /// Canonical terms of a category (`"symptom"` or `"finding"`).
    fn terms(&self, category: &str) -> PyResult<Vec<String>> {
        let c: Category = category.parse().map_err(value_error)?;
        Ok(self.lexicon.terms(c).into_iter().map(String::from).collect())
    }

    /// Mentions as dicts with `term`, `category`, `start`, `end` (character
    /// offsets), `text` and `polarity`.
    fn mine<'py>(&self, py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
        #[derive(Serialize)]
        struct Row<'a> {
            term: String,
            category: &'static str,
            start: usize,
            end: usize,
            text: &'a str,
            polarity: &'static str,
        }
        let rows: Vec<Row> = textmine::mine_text(text, &self.lexicon, &self.rules)
            .into_iter()
            .map(|m| {
                let (s, e) = m.hit.span;
                let start = text[..s].chars().count();
                Row {
                    term: m.hit.term,
                    category: m.hit.category.as_str(),
                    start,
                    end: start + text[s..e].chars().count(),
                    text: &text[s..e],
                    polarity: m.polarity.as_str(),
                }
            })
            .collect();
        to_py(py, &rows)
    }

    fn __repr__(&self) -> String {
        format!(
            "TextMiner({} symptoms, {} findings, scope_window={})",
            self.lexicon.count(Category::Symptom),
            self.lexicon.count(Category::Finding),
            self.rules.scope_window
        )
    }
}

/// Image descriptor of the file at `path`.
#[pyfunction]
fn extract_features(path: PathBuf) -> PyResult<Vec<f64>> {
    Ok(classifier::extract_features(&open_image(path)?).0)
}

fn hyperparams(learning_rate: f64, batch_size: usize, epochs: usize, seed: u64) -> PyResult<Hyperparams> {
    let hp = Hyperparams { learning_rate, batch_size, epochs, seed, ..Hyperparams::default() };
    hp.validate().map_err(value_error)?;
    Ok(hp)
}

/// Softmax modality classifier over image features.
#[pyclass(frozen)]
struct Model {
    params: ModelParams,
}

#[pymethods]
impl Model {
    /// Train on labelled feature vectors; labels are `"CT"`, `"CXR"` or `"Other"`.
    #[staticmethod]
    #[pyo3(signature = (features, labels, *, learning_rate=1e-4, batch_size=16, epochs=50, seed=0))]
    fn train(
        py: Python<'_>,
        features: Vec<Vec<f64>>,
        labels: Vec<String>,
        learning_rate: f64,
        batch_size: usize,
        epochs: usize,
        seed: u64,
    ) -> PyResult<Model> {
        if features.len() != labels.len() {
            return Err(PyValueError::new_err("features and labels differ in length"));
        }
        let hp = hyperparams(learning_rate, batch_size, epochs, seed)?;
        let data = features
            .into_iter()
            .zip(&labels)
            .map(|(f, l)| Ok((FeatureVector(f), l.parse::<Modality>().map_err(value_error)?)))
            .collect::<PyResult<Vec<_>>>()?;
        let out = py.detach(|| classifier::train(&data, &hp)).map_err(value_error)?;
        Ok(Model { params: out.params })
    }

    /// Train on generated CT-, CXR- and chart-like images.
    #[staticmethod]
    #[pyo3(signature = (per_class=100, *, learning_rate=1e-4, batch_size=16, epochs=50, seed=0))]
    fn train_synthetic(
        py: Python<'_>,
        per_class: usize,
        learning_rate: f64,
        batch_size: usize,
        epochs: usize,
        seed: u64,
    ) -> PyResult<Model> {
        let hp = hyperparams(learning_rate, batch_size, epochs, seed)?;
        let out = py.detach(|| classifier::train_synthetic(per_class, &hp)).map_err(value_error)?;
        Ok(Model { params: out.params })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Model> {
        Ok(Model { params: ModelParams::from_json(text).map_err(value_error)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Model> {
        Ok(Model { params: ModelParams::load(&path).map_err(value_error)? })
    }

    fn to_json(&self) -> String {
        self.params.to_json()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.params.save(&path).map_err(|e| PyOSError::new_err(e.to_string()))
    }

    #[getter]
    fn classes(&self) -> Vec<&'static str> {
        self.params.classes.iter().map(|c| c.as_str()).collect()
    }

    /// `(label, [p_ct, p_cxr, p_other])` for a feature vector.
    fn predict_features(&self, features: Vec<f64>) -> PyResult<(&'static str, Vec<f64>)> {
        let p = classifier::softmax_forward(&self.params, &FeatureVector(features)).map_err(value_error)?;
        Ok((p.label.as_str(), p.probs.to_vec()))
    }

    /// `(label, [p_ct, p_cxr, p_other])` for the image file at `path`.
    fn predict(&self, path: PathBuf) -> PyResult<(&'static str, Vec<f64>)> {
        let p = classifier::predict(&self.params, &open_image(path)?).map_err(value_error)?;
        Ok((p.label.as_str(), p.probs.to_vec()))
    }

    /// Like `predict`, for a row-major RGB8 buffer.
    fn predict_pixels(&self, width: u32, height: u32, rgb: &[u8]) -> PyResult<(&'static str, Vec<f64>)> {
        let p = classifier::predict(&self.params, &pixels_image(width, height, rgb)?).map_err(value_error)?;
        Ok((p.label.as_str(), p.probs.to_vec()))
    }
}

/// Run the pipeline from a TOML config file; returns the run summary.
#[pyfunction]
#[pyo3(signature = (config_path, *, output_dir=None, workers=None))]
fn run_pipeline(
    py: Python<'_>,
    config_path: PathBuf,
    output_dir: Option<PathBuf>,
    workers: Option<usize>,
) -> PyResult<Bound<'_, PyAny>> {
    let mut cfg = PipelineConfig::load(&config_path).map_err(value_error)?;
    if let Some(d) = output_dir {
        cfg.output_dir = d;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    let summary = py.detach(|| pipeline::run_pipeline(&cfg)).map_err(pipeline_error)?;
    to_py(py, &summary)
}

/// Validate a manifest file; returns `{"entries": n, "violations": [...]}`.
#[pyfunction]
fn validate_manifest(py: Python<'_>, path: PathBuf) -> PyResult<Bound<'_, PyAny>> {
    let report = manifest::validate_manifest(&path).map_err(|e| match e {
        manifest::ManifestError::Io { .. } => PyOSError::new_err(e.to_string()),
        other => value_error(other),
    })?;
    to_py(py, &report)
}

/// Write the bundled demo corpus (BioC XML plus figure images) to `dir`.
#[pyfunction]
#[pyo3(signature = (dir, seed=1))]
fn write_demo_corpus(dir: PathBuf, seed: u64) -> PyResult<Vec<String>> {
    let corpus = figmine_core::synthetic::demo_corpus();
    figmine_core::synthetic::write_fixture_corpus(&dir, &corpus, seed).map_err(|e| PyOSError::new_err(e.to_string()))?;
    Ok(corpus.into_iter().map(|a| a.pmcid).collect())
}

#[pymodule]
fn figmine(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("MIN_SIDE", manifest::MIN_SIDE)?;
    m.add_function(wrap_pyfunction!(parse_bioc, m)?)?;
    m.add_function(wrap_pyfunction!(link_figures, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_figure_label, m)?)?;
    m.add_function(wrap_pyfunction!(split_compound, m)?)?;
    m.add_function(wrap_pyfunction!(split_pixels, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_exact, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(compute_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(validate_manifest, m)?)?;
    m.add_function(wrap_pyfunction!(write_demo_corpus, m)?)?;
    m.add_class::<TextMiner>()?;
    m.add_class::<Model>()?;
    Ok(())
}
