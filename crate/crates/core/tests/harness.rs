//! Experiment harness: configs, data files, runs, sweeps and artifacts.

use std::path::{Path, PathBuf};
use std::time::Duration;

use reformir::harness::config::parse_override_args;
use reformir::harness::{
    read_queries, run_experiment, sweep_reformulations, Experiment, ExperimentConfig, ExperimentError, PipelineKind,
    TimingRecord,
};
use reformir::reformir::run_reformir;
use reformir::sim::{simulate_world, TopicWorld};
use reformir::teacher::{DelayedTeacher, QrelsTeacher};
use reformir::text::{AnalyzerConfig, Bm25Params, Index};
use reformir::prelude::LoopConfig;

fn mini() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini/mini.toml")
}

fn mini_into(out: &Path, extra: &[(&str, &str)]) -> ExperimentConfig {
    let mut overrides = vec![("output_dir".to_string(), out.display().to_string())];
    overrides.extend(extra.iter().map(|(k, v)| (k.to_string(), v.to_string())));
    ExperimentConfig::load(&mini(), &overrides).unwrap()
}

#[test]
fn query_files_report_line_numbers() {
    let ok = read_queries("1\tsolar power\n\n2\twind\n".as_bytes()).unwrap();
    assert_eq!(ok, [("1".to_string(), "solar power".to_string()), ("2".into(), "wind".into())]);
    let err = read_queries("1\ta\n1\tb\n".as_bytes()).unwrap_err().to_string();
    assert!(err.contains("line 2") && err.contains("duplicate"), "{err}");
    let err = read_queries("1\ta\nno tab here\n".as_bytes()).unwrap_err().to_string();
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn overrides_and_unknown_keys() {
    let args: Vec<String> = ["--loop.budget", "40", "--seed=3"].iter().map(|s| s.to_string()).collect();
    let parsed = parse_override_args(&args).unwrap();
    let config = ExperimentConfig::load(&mini(), &parsed).unwrap();
    assert_eq!(config.loop_.budget, 40);
    assert_eq!(config.seed, 3);

    let bad = [("loop.budgett".to_string(), "4".to_string())];
    assert!(matches!(ExperimentConfig::load(&mini(), &bad), Err(ExperimentError::Config(_))));
    let missing = ExperimentConfig::load(Path::new("/nonexistent/x.toml"), &[]);
    assert_eq!(missing.unwrap_err().exit_code(), 1);
}

#[test]
fn hash_ignores_output_location_and_parallelism() {
    let a = mini_into(Path::new("/tmp/a"), &[]);
    let b = mini_into(Path::new("/tmp/b"), &[("parallelism", "3")]);
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 16);
    let c = mini_into(Path::new("/tmp/a"), &[("loop.budget", "50")]);
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn repeated_runs_never_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let config = mini_into(tmp.path(), &[]);
    let first = run_experiment(config.clone()).unwrap();
    let second = run_experiment(config).unwrap();
    assert_ne!(first.dir, second.dir);
    assert_eq!(second.dir.file_name().unwrap().to_str().unwrap(), format!("{}.1", first.hash));
    for name in ["run.trec", "weights.tsv", "trace.jsonl", "timings.jsonl", "report.tsv", "report.txt", "summary.json", "config.toml"] {
        assert!(first.dir.join(name).is_file(), "missing {name}");
    }
    let trec = std::fs::read_to_string(first.dir.join("run.trec")).unwrap();
    for line in trec.lines() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(cols.len(), 6, "{line}");
        assert!(cols[5].contains(&first.hash[..8]));
    }
    let weights = std::fs::read_to_string(first.dir.join("weights.tsv")).unwrap();
    assert!(weights.starts_with(&format!("# config_hash={}", first.hash)));
    // the saved config reproduces the same hash
    let saved = ExperimentConfig::load(&first.dir.join("config.toml"), &[]).unwrap();
    assert_eq!(saved.hash(), first.hash);
    assert!(first.failed.is_empty());
    let report = first.report.as_ref().expect("qrels give a report");
    let tag = &report.runs[0];
    assert!(tag.starts_with("reformir-"));
    let ndcg = report.mean(tag, "nDCG@50").unwrap();
    assert!(ndcg > 0.0 && ndcg <= 1.0);
}

#[test]
fn without_reformulations_fusion_reduces_to_the_base_ranking() {
    let tmp = tempfile::tempdir().unwrap();
    let exp = Experiment::prepare(mini_into(tmp.path(), &[])).unwrap();
    let rrf = Experiment::ranked_lists(&exp.run_pipeline(PipelineKind::RrfRerank, Some(0)));
    let base = Experiment::ranked_lists(&exp.run_pipeline(PipelineKind::BaseRerank, Some(0)));
    assert_eq!(rrf, base);
    // base ignores whatever reformulations are supplied
    let base5 = Experiment::ranked_lists(&exp.run_pipeline(PipelineKind::BaseRerank, Some(5)));
    assert_eq!(base, base5);
}

#[test]
fn sweep_writes_one_row_per_setting() {
    let tmp = tempfile::tempdir().unwrap();
    let config = mini_into(tmp.path(), &[("sweep.m", "[3, 5]"), ("sweep.compare", "[\"rrf_rerank\"]")]);
    let outcome = sweep_reformulations(config).unwrap();
    // two m values, two pipelines, two cutoffs, two metrics
    assert_eq!(outcome.rows.len(), 2 * 2 * 2 * 2);
    for m in [3, 5] {
        for p in ["reformir", "rrf_rerank"] {
            let v = outcome.value(m, p, "Recall@100").unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }
    let csv = std::fs::read_to_string(outcome.dir.unwrap().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + outcome.rows.len());
}

#[test]
fn teacher_time_grows_with_budget() {
    let world = simulate_world(&TopicWorld { topics: 2, queries_per_topic: 1, seed: 4, ..TopicWorld::default() }).unwrap();
    let index = Index::build(world.docs.iter().cloned(), AnalyzerConfig::default(), Bm25Params::default()).unwrap();
    let qrels = std::sync::Arc::new(world.qrels.clone());
    let q = &world.queries[0];
    let reforms = world.reformulate(&q.id, 3, 0.0, 4).unwrap();
    let mut last = 0.0;
    for budget in [8, 32, 96] {
        let mut teacher = DelayedTeacher::new(QrelsTeacher::new(qrels.clone(), 1), Duration::from_micros(300));
        let config = LoopConfig { budget, ..LoopConfig::default() };
        let result = run_reformir(&index, &q.text, &reforms, &mut teacher, &config);
        let record = TimingRecord::from(&result);
        assert!(record.teacher_ms > last, "budget {budget}: {} <= {last}", record.teacher_ms);
        assert!(record.phase_sum() <= record.total_ms + 1e-6);
        last = record.teacher_ms;
    }
}
