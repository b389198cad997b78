//! Pipeline configuration, read from TOML.

use crate::classifier::Hyperparams;
use crate::splitter::SplitParams;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceMode {
    #[default]
    Fixture,
    Live,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub mode: SourceMode,
    /// Fixture directory holding `<PMCID>.xml` and `<PMCID>/<image>`.
    pub fixture_dir: Option<PathBuf>,
    /// Content-addressed cache of fetched articles.
    pub cache_dir: Option<PathBuf>,
    /// Overrides the BioC API base; `FIGMINE_API_BASE` is used otherwise.
    pub api_base: Option<String>,
}

/// Where article IDs come from; exactly one of `ids`, `id_file` and `query`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArticlesConfig {
    pub ids: Option<Vec<String>>,
    /// One PMCID per line; `#` comments allowed.
    pub id_file: Option<PathBuf>,
    pub query: Option<String>,
    pub max_results: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Trained model JSON; when absent a model is trained on synthetic images.
    pub model: Option<PathBuf>,
    /// Synthetic images per class when training a model.
    pub train_per_class: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub validation_fraction: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        let hp = Hyperparams::default();
        ClassifierConfig {
            model: None,
            train_per_class: 100,
            learning_rate: hp.learning_rate,
            batch_size: hp.batch_size,
            epochs: hp.epochs,
            validation_fraction: hp.validation_fraction,
        }
    }
}

impl ClassifierConfig {
    pub fn hyperparams(&self, seed: u64) -> Hyperparams {
        Hyperparams {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            validation_fraction: self.validation_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextConfig {
    /// Lexicon TSV replacing the bundled one.
    pub lexicon: Option<PathBuf>,
    /// Directory with negation trigger lists replacing the bundled ones.
    pub negation_dir: Option<PathBuf>,
    pub scope_window: usize,
}

impl Default for TextConfig {
    fn default() -> Self {
        TextConfig { lexicon: None, negation_dir: None, scope_window: crate::textmine::DEFAULT_SCOPE_WINDOW }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    /// Label of the articles selected in `[articles]`.
    pub label: String,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig { label: "cohort".into() }
    }
}

/// A second cohort whose term frequencies are compared against the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub label: String,
    #[serde(flatten)]
    pub articles: ArticlesConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 means one per logical CPU.
    pub workers: usize,
    pub source: SourceConfig,
    pub articles: ArticlesConfig,
    pub split: SplitParams,
    pub classifier: ClassifierConfig,
    pub text: TextConfig,
    pub cohort: CohortConfig,
    pub compare: Option<CompareConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            output_dir: PathBuf::from("figmine-out"),
            seed: 0,
            workers: 0,
            source: SourceConfig::default(),
            articles: ArticlesConfig::default(),
            split: SplitParams::default(),
            classifier: ClassifierConfig::default(),
            text: TextConfig::default(),
            cohort: CohortConfig::default(),
            compare: None,
        }
    }
}

impl ArticlesConfig {
    fn validate(&self, what: &str) -> Result<(), ConfigError> {
        let given = [self.ids.is_some(), self.id_file.is_some(), self.query.is_some()];
        match given.iter().filter(|g| **g).count() {
            1 => Ok(()),
            0 => Err(ConfigError::Invalid(format!("{what}: one of ids, id_file or query is required"))),
            _ => Err(ConfigError::Invalid(format!("{what}: ids, id_file and query are mutually exclusive"))),
        }
    }

    /// The explicit ID list, or `None` for a query.
    pub fn resolve_ids(&self) -> Result<Option<Vec<String>>, ConfigError> {
        if let Some(ids) = &self.ids {
            return Ok(Some(ids.clone()));
        }
        if let Some(path) = &self.id_file {
            let text = std::fs::read_to_string(path)
                .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
            return Ok(Some(
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(String::from)
                    .collect(),
            ));
        }
        Ok(None)
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<PipelineConfig, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Ok(cfg)
    }

    /// Load a TOML file. Relative paths inside it are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<PipelineConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for p in [
            self.source.fixture_dir.as_mut(),
            self.source.cache_dir.as_mut(),
            self.articles.id_file.as_mut(),
            self.classifier.model.as_mut(),
            self.text.lexicon.as_mut(),
            self.text.negation_dir.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let Some(p) = self.compare.as_mut().and_then(|c| c.articles.id_file.as_mut()) {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.articles.validate("[articles]")?;
        if let Some(c) = &self.compare {
            c.articles.validate("[compare]")?;
            if c.label == self.cohort.label {
                return Err(ConfigError::Invalid("compare label equals cohort label".into()));
            }
        }
        if self.source.mode == SourceMode::Fixture && self.source.fixture_dir.is_none() {
            return Err(ConfigError::Invalid("fixture mode requires source.fixture_dir".into()));
        }
        let uses_query = self.articles.query.is_some()
            || self.compare.as_ref().is_some_and(|c| c.articles.query.is_some());
        if uses_query && self.source.mode != SourceMode::Live {
            return Err(ConfigError::Invalid("query resolution requires live mode".into()));
        }
        if let Some(ids) = &self.articles.ids {
            if ids.is_empty() {
                return Err(ConfigError::Invalid("article ID list is empty".into()));
            }
        }
        self.split.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.classifier.hyperparams(self.seed).validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.classifier.model.is_none() && self.classifier.train_per_class == 0 {
            return Err(ConfigError::Invalid("classifier.train_per_class must be positive without a model".into()));
        }
        if self.text.scope_window == 0 {
            return Err(ConfigError::Invalid("text.scope_window must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = PipelineConfig::from_toml(
            r#"
output_dir = "out"
seed = 7
workers = 2

[source]
mode = "fixture"
fixture_dir = "fixtures"

[articles]
ids = ["PMC1", "PMC2"]

[split]
min_panel = 200

[classifier]
train_per_class = 10
epochs = 5

[cohort]
label = "covid19"

[compare]
label = "influenza"
id_file = "flu.txt"
"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.split.min_panel, 200);
        assert_eq!(cfg.split.min_gutter, SplitParams::default().min_gutter);
        assert_eq!(cfg.classifier.hyperparams(cfg.seed).seed, 7);
        assert_eq!(cfg.compare.unwrap().articles.id_file.unwrap(), PathBuf::from("flu.txt"));
    }

    #[test]
    fn exactly_one_article_source() {
        let base = "[source]\nfixture_dir = \"f\"\n";
        let none = PipelineConfig::from_toml(base).unwrap();
        assert!(none.validate().is_err());
        let both = PipelineConfig::from_toml(&format!("{base}[articles]\nids = [\"PMC1\"]\nquery = \"x\"\n")).unwrap();
        assert!(both.validate().is_err());
        let empty = PipelineConfig::from_toml(&format!("{base}[articles]\nids = []\n")).unwrap();
        assert!(empty.validate().is_err());
        let query = PipelineConfig::from_toml(&format!("{base}[articles]\nquery = \"covid\"\n")).unwrap();
        assert!(query.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_toml("sede = 1\n").is_err());
    }
}
