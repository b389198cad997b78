use figmine_core::config::{ArticlesConfig, CompareConfig, PipelineConfig, SourceMode};
use figmine_core::manifest::{read_manifest, validate_manifest};
use figmine_core::pipeline::{run_pipeline, PipelineError};
use figmine_core::synthetic::{demo_corpus, write_fixture_corpus};
use std::path::Path;

fn config(fixtures: &Path, out: &Path, workers: usize) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.output_dir = out.to_path_buf();
    cfg.workers = workers;
    cfg.source.mode = SourceMode::Fixture;
    cfg.source.fixture_dir = Some(fixtures.to_path_buf());
    cfg.articles.ids = Some(vec!["PMC7000001".into(), "PMC7000002".into(), "PMC7999999".into()]);
    cfg.cohort.label = "covid19".into();
    cfg.compare = Some(CompareConfig {
        label: "influenza".into(),
        articles: ArticlesConfig { ids: Some(vec!["PMC7000003".into()]), ..ArticlesConfig::default() },
    });
    cfg.classifier.train_per_class = 20;
    cfg
}

fn corpus() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_fixture_corpus(dir.path(), &demo_corpus(), 1).unwrap();
    dir
}

#[test]
fn demo_corpus_counts_match_its_composition() {
    let fixtures = corpus();
    let out = tempfile::tempdir().unwrap();
    let summary = run_pipeline(&config(fixtures.path(), out.path(), 2)).unwrap();
    assert_eq!(summary.articles_requested, 4);
    assert_eq!(summary.articles_parsed, 3);
    assert_eq!(summary.articles_skipped, 1);
    assert_eq!(summary.figures, 6);
    assert_eq!(summary.figures_without_image, 1);
    assert_eq!(summary.subfigures_before_filter, 2 + 1 + 4 + 3 + 1);
    assert_eq!(summary.subfigures_after_filter, 2 + 1 + 4 + 1);
    assert_eq!(summary.modality_counts.values().sum::<usize>(), summary.subfigures_after_filter);
    let kept: Vec<usize> = summary.articles.iter().map(|a| a.subfigures_after_filter).collect();
    assert_eq!(kept, [3, 4, 0, 1]);

    let manifest = out.path().join("manifest.jsonl");
    let report = validate_manifest(&manifest).unwrap();
    assert!(report.is_ok(), "{:?}", report.violations);
    assert_eq!(report.entries, 8);
    let csv = validate_manifest(&out.path().join("manifest.csv")).unwrap();
    assert!(csv.is_ok());
    let jsonl: Vec<_> = read_manifest(&manifest).unwrap().into_iter().map(|(_, e)| e).collect();
    let csv: Vec<_> = read_manifest(&out.path().join("manifest.csv")).unwrap().into_iter().map(|(_, e)| e).collect();
    assert_eq!(jsonl, csv);
    assert!(jsonl.iter().all(|e| e.width >= 224 && e.height >= 224));
    for name in ["report.json", "report_symptoms.svg", "report_findings.svg", "run_summary.json", "mentions.jsonl", "model.json"] {
        assert!(out.path().join(name).is_file(), "{name}");
    }
    let fig1 = jsonl.iter().find(|e| e.pmcid == "PMC7000001" && e.figure_number == 1).unwrap();
    assert!(fig1.mentions.iter().any(|m| m.term == "ground-glass opacification"));
    assert!(fig1.mentions.iter().any(|m| m.term == "fever" && m.polarity.as_str() == "negated"));
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let fixtures = corpus();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(&config(fixtures.path(), a.path(), 1)).unwrap();
    run_pipeline(&config(fixtures.path(), b.path(), 4)).unwrap();
    for name in ["manifest.jsonl", "manifest.csv", "report.json", "run_summary.json", "mentions.jsonl", "report_findings.svg"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn empty_id_list_is_a_config_error() {
    let fixtures = corpus();
    let out = tempfile::tempdir().unwrap();
    let mut cfg = config(fixtures.path(), out.path(), 1);
    cfg.articles.ids = Some(Vec::new());
    assert!(matches!(run_pipeline(&cfg), Err(PipelineError::Config(_))));
}

#[test]
fn unwritable_output_is_reported() {
    let fixtures = corpus();
    let out = tempfile::tempdir().unwrap();
    let file = out.path().join("plain-file");
    std::fs::write(&file, b"x").unwrap();
    let cfg = config(fixtures.path(), &file.join("sub"), 1);
    assert!(matches!(run_pipeline(&cfg), Err(PipelineError::OutputNotWritable { .. })));
}
