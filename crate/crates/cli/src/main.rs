use anyhow::{bail, Context, Result};
use clap::{ArgAction, Args, Parser, Subcommand};
use figmine_core::classifier::{ClassifierError, ModalityClassifier};
use figmine_core::config::{ArticlesConfig, CompareConfig, ConfigError, PipelineConfig, SourceMode};
use figmine_core::ingest::{parse_bioc, ArticleDocument};
use figmine_core::linker::link_figures;
use figmine_core::manifest::{validate_manifest, ManifestError};
use figmine_core::pipeline::{
    build_report, fetch_statuses, group_mentions, load_or_train_model, load_text_resources, run_pipeline,
    write_report, PipelineError, RunSummary,
};
use figmine_core::raster::RasterImage;
use figmine_core::splitter::{filter_min_size, split_compound};
use figmine_core::synthetic::{demo_corpus, write_fixture_corpus};
use figmine_core::textmine::{mine_text, Mention};
use serde::Serialize;
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Collect figures, subfigures and their text from open-access articles.
#[derive(Parser)]
#[command(name = "figmine", version, about)]
struct Cli {
    /// TOML configuration; flags override its values.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    /// More logging (-v debug, -vv trace).
    #[arg(short, long, global = true, action = ArgAction::Count, conflicts_with = "quiet")]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch articles and store them as parsed JSON under <output-dir>/articles.
    Fetch {
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Link figures to their referring text; BioC XML or article JSON in, JSON lines out.
    Extract {
        /// Article files or directories of them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Write here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Split one compound figure into subfigure boxes.
    Split {
        image: PathBuf,
        /// Save each kept subfigure as PNG into this directory.
        #[arg(long)]
        crops: Option<PathBuf>,
        /// Keep boxes below the minimum panel size.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Predict the modality of images.
    Classify {
        #[arg(required = true)]
        images: Vec<PathBuf>,
        /// Write the (loaded or trained) model JSON here.
        #[arg(long)]
        save_model: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Find symptom and finding mentions with their polarity.
    Mine {
        /// Text to mine; files or stdin otherwise.
        #[arg(long, conflicts_with = "files")]
        text: Option<String>,
        files: Vec<PathBuf>,
        #[command(flatten)]
        text_args: TextArgs,
    },
    /// Rebuild report.json and the charts from a finished run directory.
    Report {
        run_dir: PathBuf,
        /// Output directory; defaults to the run directory.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        text_args: TextArgs,
    },
    /// Run the full pipeline.
    Run {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        text_args: TextArgs,
    },
    /// Check a manifest (JSONL or CSV); exits 2 on any violation.
    Validate { manifest: PathBuf },
    /// Write a small fixture corpus and a config that runs on it.
    Fixtures {
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct SourceArgs {
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// Read articles from this fixture directory.
    #[arg(long, conflicts_with = "live")]
    fixture_dir: Option<PathBuf>,
    /// Fetch from the live BioC and PMC services.
    #[arg(long)]
    live: bool,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    api_base: Option<String>,
    /// Comma-separated PMCIDs.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["id_file", "query"])]
    ids: Option<Vec<String>>,
    #[arg(long, conflicts_with = "query")]
    id_file: Option<PathBuf>,
    /// Search term resolved to PMCIDs (live mode).
    #[arg(long)]
    query: Option<String>,
    #[arg(long)]
    max_results: Option<usize>,
    /// Label of the main cohort.
    #[arg(long)]
    cohort: Option<String>,
    /// Label of the comparison cohort.
    #[arg(long)]
    compare_label: Option<String>,
    #[arg(long, value_delimiter = ',', group = "compare_source")]
    compare_ids: Option<Vec<String>>,
    #[arg(long, group = "compare_source")]
    compare_id_file: Option<PathBuf>,
    /// Worker threads; 0 uses every CPU.
    #[arg(short, long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    min_panel: Option<u32>,
    #[arg(long)]
    min_gutter: Option<u32>,
    #[arg(long)]
    uniformity_threshold: Option<f64>,
    #[arg(long)]
    max_depth: Option<u32>,
}

#[derive(Args)]
struct ModelArgs {
    /// Trained model JSON; a model is trained on synthetic images otherwise.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    train_per_class: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TextArgs {
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    negation_dir: Option<PathBuf>,
    #[arg(long)]
    scope_window: Option<usize>,
}

fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
    if let Some(v) = value {
        *slot = v.clone();
    }
}

fn set_opt<T: Clone>(slot: &mut Option<T>, value: &Option<T>) {
    if value.is_some() {
        *slot = value.clone();
    }
}

fn non_blank(ids: &[String]) -> Vec<String> {
    ids.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).map(String::from).collect()
}

impl SourceArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        set(&mut cfg.output_dir, &self.output_dir);
        if let Some(dir) = &self.fixture_dir {
            cfg.source.mode = SourceMode::Fixture;
            cfg.source.fixture_dir = Some(dir.clone());
        }
        if self.live {
            cfg.source.mode = SourceMode::Live;
        }
        set_opt(&mut cfg.source.cache_dir, &self.cache_dir);
        set_opt(&mut cfg.source.api_base, &self.api_base);
        if self.ids.is_some() || self.id_file.is_some() || self.query.is_some() {
            cfg.articles = ArticlesConfig {
                ids: self.ids.as_deref().map(non_blank),
                id_file: self.id_file.clone(),
                query: self.query.clone(),
                max_results: self.max_results.or(cfg.articles.max_results),
            };
        } else {
            set_opt(&mut cfg.articles.max_results, &self.max_results);
        }
        set(&mut cfg.cohort.label, &self.cohort);
        if self.compare_ids.is_some() || self.compare_id_file.is_some() {
            let label = self
                .compare_label
                .clone()
                .or_else(|| cfg.compare.as_ref().map(|c| c.label.clone()))
                .unwrap_or_else(|| "compare".into());
            cfg.compare = Some(CompareConfig {
                label,
                articles: ArticlesConfig {
                    ids: self.compare_ids.as_deref().map(non_blank),
                    id_file: self.compare_id_file.clone(),
                    ..ArticlesConfig::default()
                },
            });
        } else if let (Some(label), Some(c)) = (&self.compare_label, cfg.compare.as_mut()) {
            c.label = label.clone();
        }
        set(&mut cfg.workers, &self.workers);
    }
}

impl SplitArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        set(&mut cfg.split.min_panel, &self.min_panel);
        set(&mut cfg.split.min_gutter, &self.min_gutter);
        set(&mut cfg.split.uniformity_threshold, &self.uniformity_threshold);
        set(&mut cfg.split.max_depth, &self.max_depth);
    }
}

impl ModelArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        set_opt(&mut cfg.classifier.model, &self.model);
        set(&mut cfg.classifier.train_per_class, &self.train_per_class);
        set(&mut cfg.classifier.epochs, &self.epochs);
        set(&mut cfg.classifier.learning_rate, &self.learning_rate);
        set(&mut cfg.classifier.batch_size, &self.batch_size);
        set(&mut cfg.seed, &self.seed);
    }
}

impl TextArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        set_opt(&mut cfg.text.lexicon, &self.lexicon);
        set_opt(&mut cfg.text.negation_dir, &self.negation_dir);
        set(&mut cfg.text.scope_window, &self.scope_window);
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    Ok(match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    })
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn print_json_lines<T: Serialize>(out: &mut dyn Write, values: impl IntoIterator<Item = T>) -> Result<()> {
    for v in values {
        serde_json::to_writer(&mut *out, &v)?;
        writeln!(out)?;
    }
    Ok(())
}

fn article_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(input)
                .with_context(|| format!("reading {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("xml" | "json")))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

fn read_article(path: &Path) -> Result<ArticleDocument> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
        ArticleDocument::from_json(&text).with_context(|| format!("parsing {}", path.display()))
    } else {
        parse_bioc(&bytes).with_context(|| format!("parsing {}", path.display()))
    }
}

fn cmd_fetch(mut cfg: PipelineConfig, source: &SourceArgs) -> Result<ExitCode> {
    source.apply(&mut cfg);
    cfg.validate()?;
    let (docs, statuses) = fetch_statuses(&cfg)?;
    let dir = cfg.output_dir.join("articles");
    std::fs::create_dir_all(&dir).map_err(|source| io_error(&dir, source))?;
    for doc in &docs {
        let path = dir.join(format!("{}.json", doc.pmcid));
        std::fs::write(&path, doc.to_json() + "\n").map_err(|source| io_error(&path, source))?;
    }
    let status_path = cfg.output_dir.join("fetch_status.jsonl");
    let mut buf = Vec::new();
    print_json_lines(&mut buf, &statuses)?;
    std::fs::write(&status_path, buf).map_err(|source| io_error(&status_path, source))?;
    println!("fetched {} of {} articles into {}", docs.len(), statuses.len(), dir.display());
    Ok(ExitCode::SUCCESS)
}

fn io_error(path: &Path, source: std::io::Error) -> PipelineError {
    PipelineError::OutputNotWritable { path: path.display().to_string(), source }
}

fn cmd_extract(inputs: &[PathBuf], out: Option<&Path>) -> Result<ExitCode> {
    let mut sink: Box<dyn Write> = match out {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p).map_err(|e| io_error(p, e))?)),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut figures = 0;
    for path in article_files(inputs)? {
        let doc = read_article(&path)?;
        let linked = link_figures(&doc);
        figures += linked.len();
        log::info!("article={} figures={}", doc.pmcid, linked.len());
        print_json_lines(&mut sink, linked)?;
    }
    sink.flush()?;
    log::info!("linked {figures} figures");
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SplitOutput<'a> {
    image: &'a Path,
    width: u32,
    height: u32,
    boxes: Vec<figmine_core::splitter::SubfigureBox>,
}

fn cmd_split(cfg: &PipelineConfig, image: &Path, crops: Option<&Path>, all: bool) -> Result<ExitCode> {
    cfg.split.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let img = RasterImage::open(image)?;
    let mut boxes = split_compound(&img, &cfg.split);
    if !all {
        boxes = filter_min_size(&boxes, &cfg.split);
    }
    if let Some(dir) = crops {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let stem = image.file_stem().and_then(|s| s.to_str()).unwrap_or("figure");
        for (i, b) in boxes.iter().enumerate() {
            let path = dir.join(format!("{stem}_{}.png", i + 1));
            figmine_core::splitter::crop(&img, b)?.save_png(&path)?;
        }
    }
    print_json(&SplitOutput { image, width: img.width(), height: img.height(), boxes })?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct ClassifyOutput<'a> {
    image: &'a Path,
    modality: &'static str,
    prob_ct: f64,
    prob_cxr: f64,
    prob_other: f64,
}

fn cmd_classify(cfg: &PipelineConfig, images: &[PathBuf], save_model: Option<&Path>) -> Result<ExitCode> {
    cfg.classifier.hyperparams(cfg.seed).validate()?;
    let model = load_or_train_model(cfg)?;
    if let Some(path) = save_model {
        model.save(path)?;
    }
    let mut out = std::io::stdout().lock();
    for image in images {
        let pred = model.classify(&RasterImage::open(image)?)?;
        let [prob_ct, prob_cxr, prob_other] = pred.probs;
        print_json_lines(
            &mut out,
            [ClassifyOutput { image, modality: pred.label.as_str(), prob_ct, prob_cxr, prob_other }],
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_mine(cfg: &PipelineConfig, text: Option<&str>, files: &[PathBuf]) -> Result<ExitCode> {
    let (lexicon, rules) = load_text_resources(cfg)?;
    let texts: Vec<String> = match text {
        Some(t) => vec![t.to_string()],
        None if files.is_empty() => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf)?;
            vec![buf]
        }
        None => files
            .iter()
            .map(|p| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))
            .collect::<Result<_>>()?,
    };
    let mut out = std::io::stdout().lock();
    for t in &texts {
        print_json_lines(&mut out, mine_text(t, &lexicon, &rules))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(cfg: &PipelineConfig, run_dir: &Path, out: Option<&Path>) -> Result<ExitCode> {
    let (lexicon, _) = load_text_resources(cfg)?;
    let summary_path = run_dir.join("run_summary.json");
    let summary: RunSummary = serde_json::from_str(
        &std::fs::read_to_string(&summary_path).with_context(|| format!("reading {}", summary_path.display()))?,
    )
    .with_context(|| format!("parsing {}", summary_path.display()))?;
    let mentions_path = run_dir.join("mentions.jsonl");
    let file = std::fs::File::open(&mentions_path).with_context(|| format!("reading {}", mentions_path.display()))?;
    let mut mentions: Vec<Mention> = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        mentions.push(
            serde_json::from_str(&line).with_context(|| format!("{} line {}", mentions_path.display(), i + 1))?,
        );
    }
    let report = build_report(&group_mentions(&summary, &mentions), &lexicon);
    let dir = out.unwrap_or(run_dir);
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    write_report(dir, &report)?;
    println!("wrote {}", dir.join("report.json").display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(path: &Path) -> Result<ExitCode> {
    let report = validate_manifest(path)?;
    for v in &report.violations {
        println!("{}:{}: {}", path.display(), v.line, v.message);
    }
    if report.is_ok() {
        println!("{}: {} entries, no violations", path.display(), report.entries);
        Ok(ExitCode::SUCCESS)
    } else {
        println!("{}: {} entries, {} violations", path.display(), report.entries, report.violations.len());
        Ok(ExitCode::from(2))
    }
}

fn cmd_fixtures(dir: &Path, seed: u64) -> Result<ExitCode> {
    let corpus = demo_corpus();
    let fixture_dir = dir.join("corpus");
    write_fixture_corpus(&fixture_dir, &corpus, seed).map_err(|e| io_error(&fixture_dir, e))?;
    if corpus.len() < 2 {
        bail!("demo corpus is too small for a comparison");
    }
    let (main, compare) = corpus.split_at(corpus.len() - 1);
    let quoted = |a: &[figmine_core::synthetic::FixtureArticle]| {
        a.iter().map(|x| format!("\"{}\"", x.pmcid)).collect::<Vec<_>>().join(", ")
    };
    let config = format!(
        "output_dir = \"out\"\nseed = {seed}\n\n[source]\nmode = \"fixture\"\nfixture_dir = \"corpus\"\n\n\
         [articles]\nids = [{}]\n\n[cohort]\nlabel = \"covid19\"\n\n[compare]\nlabel = \"influenza\"\nids = [{}]\n\n\
         [classifier]\ntrain_per_class = 40\n",
        quoted(main),
        quoted(compare)
    );
    let path = dir.join("figmine.toml");
    std::fs::write(&path, config).map_err(|e| io_error(&path, e))?;
    println!("wrote {} articles to {} and {}", corpus.len(), fixture_dir.display(), path.display());
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    let cfg = || load_config(cli.config.as_deref());
    match &cli.command {
        Command::Fetch { source } => cmd_fetch(cfg()?, source),
        Command::Extract { inputs, out } => cmd_extract(inputs, out.as_deref()),
        Command::Split { image, crops, all, split } => {
            let mut c = cfg()?;
            split.apply(&mut c);
            cmd_split(&c, image, crops.as_deref(), *all)
        }
        Command::Classify { images, save_model, model } => {
            let mut c = cfg()?;
            model.apply(&mut c);
            cmd_classify(&c, images, save_model.as_deref())
        }
        Command::Mine { text, files, text_args } => {
            let mut c = cfg()?;
            text_args.apply(&mut c);
            cmd_mine(&c, text.as_deref(), files)
        }
        Command::Report { run_dir, out, text_args } => {
            let mut c = cfg()?;
            text_args.apply(&mut c);
            cmd_report(&c, run_dir, out.as_deref())
        }
        Command::Run { source, split, model, text_args } => {
            let mut c = cfg()?;
            source.apply(&mut c);
            split.apply(&mut c);
            model.apply(&mut c);
            text_args.apply(&mut c);
            let summary = run_pipeline(&c)?;
            print_json(&summary)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { manifest } => cmd_validate(manifest),
        Command::Fixtures { dir, seed } => cmd_fixtures(dir, *seed),
    }
}

/// 1 for configuration problems, 2 for manifest schema failures, 3 for I/O
/// and everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<PipelineError>() {
            return match e {
                PipelineError::Config(_) => 1,
                PipelineError::OutputNotWritable { .. } => 3,
            };
        }
        if let Some(e) = cause.downcast_ref::<ManifestError>() {
            return match e {
                ManifestError::Schema { .. } => 2,
                ManifestError::Io { .. } => 3,
            };
        }
        if let Some(e) = cause.downcast_ref::<ClassifierError>() {
            return if matches!(e, ClassifierError::Io(_)) { 3 } else { 1 };
        }
        if cause.is::<ConfigError>() {
            return 1;
        }
    }
    3
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|c| {
        let kind = c
            .downcast_ref::<std::io::Error>()
            .map(|e| e.kind())
            .or_else(|| c.downcast_ref::<serde_json::Error>().and_then(|e| e.io_error_kind()));
        kind == Some(std::io::ErrorKind::BrokenPipe)
    })
}

/// The error chain joined with ": ", skipping causes already spelled out.
fn describe(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if msg.contains(&text) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&text);
    }
    msg
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "error",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
