//! Loading an experiment's inputs and running a pipeline over its queries.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, PipelineKind, ReformulationSource, TeacherKind};
use super::timing::{latency_summary, TimingRecord};
use super::{load_queries, ExperimentError};
use crate::baselines::run_baseline;
use crate::eval::{report, write_run, Qrels, ReportTable};
use crate::reform::{HttpReformulator, ReformulationFile, ReformulationSet};
use crate::reformir::{run_reformir, RunResult};
use crate::rng::derive_seed;
use crate::sim::simulate_world;
use crate::teacher::{FileTeacher, HttpTeacher, QrelsTeacher, Teacher};
use crate::text::{load_corpus, CorpusFormat, Index, RankedList};

/// Everything a pipeline run needs, loaded once.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub hash: String,
    pub index: Index,
    pub queries: Vec<(String, String)>,
    pub qrels: Option<Arc<Qrels>>,
    /// Per query, in query order; `Err` when generation failed.
    pub reforms: Vec<Result<ReformulationSet, String>>,
    file_teacher: Option<FileTeacher>,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self, ExperimentError> {
        config.validate()?;
        let hash = config.hash();
        let analyzer = config.analyzer.build()?;
        let world = match &config.world {
            Some(spec) => Some(simulate_world(spec).map_err(|e| ExperimentError::Config(e.to_string()))?),
            None => None,
        };

        let index = match (&world, &config.corpus.index, &config.corpus.path) {
            (Some(w), _, _) => Index::build(w.docs.iter().cloned(), analyzer, config.bm25),
            (None, Some(p), _) => Index::load(p),
            (None, None, Some(p)) => {
                let format: CorpusFormat = if config.corpus.format.is_empty() {
                    CorpusFormat::Tsv
                } else {
                    config.corpus.format.parse::<CorpusFormat>().map_err(|e| ExperimentError::Config(e.to_string()))?
                };
                let docs = load_corpus(p, format).map_err(|e| ExperimentError::Io(e.to_string()))?;
                Index::build(docs, analyzer, config.bm25)
            }
            (None, None, None) => unreachable!("validated"),
        }
        .map_err(|e| ExperimentError::Io(e.to_string()))?;

        let queries = match (&world, &config.queries) {
            (_, Some(p)) => load_queries(p)?,
            (Some(w), None) => w.queries.iter().map(|q| (q.id.clone(), q.text.clone())).collect(),
            (None, None) => unreachable!("validated"),
        };
        let qrels = match (&world, &config.qrels) {
            (_, Some(p)) => Some(Qrels::load(p).map_err(|e| ExperimentError::Io(format!("{}: {e}", p.display())))?),
            (Some(w), None) => Some(w.qrels.clone()),
            (None, None) => None,
        }
        .map(Arc::new);

        let rc = &config.reformulations;
        let reforms: Vec<Result<ReformulationSet, String>> = match rc.source {
            ReformulationSource::None => queries
                .iter()
                .map(|(q, t)| Ok(ReformulationSet::empty(q.clone(), t.clone(), "none")))
                .collect(),
            ReformulationSource::File => {
                let path = rc.path.as_ref().expect("validated");
                let file = ReformulationFile::load(path).map_err(|e| ExperimentError::Io(e.to_string()))?;
                queries.iter().map(|(q, t)| Ok(file.get(q, t))).collect()
            }
            ReformulationSource::Synthetic => {
                let w = world.as_ref().expect("validated");
                let count = rc.count.max(config.sweep.m.iter().copied().max().unwrap_or(0));
                let seed = derive_seed(config.seed, "reformulations");
                queries
                    .iter()
                    .map(|(q, _)| w.reformulate(q, count, rc.drift, seed).map_err(|e| e.to_string()))
                    .collect()
            }
            ReformulationSource::Http => {
                let generator =
                    HttpReformulator::new(rc.generator.clone()).map_err(|e| ExperimentError::Config(e.to_string()))?;
                queries
                    .iter()
                    .map(|(q, t)| generator.reformulate(q, t).map_err(|e| e.to_string()))
                    .collect()
            }
        };

        let file_teacher = match (config.teacher.kind, &config.teacher.path) {
            (TeacherKind::File, Some(p)) => Some(FileTeacher::load(p).map_err(|e| ExperimentError::Io(e.to_string()))?),
            _ => None,
        };
        if config.teacher.kind == TeacherKind::Qrels && qrels.as_ref().is_none_or(|q| q.max_grade() == 0) && config.teacher.max_grade == 0 {
            return Err(ExperimentError::Config("qrels teacher: no positive grades to normalize by".into()));
        }

        Ok(Self {
            config,
            hash,
            index,
            queries,
            qrels,
            reforms,
            file_teacher,
        })
    }

    fn teacher_for(&self, qid: &str) -> Box<dyn Teacher> {
        let tc = &self.config.teacher;
        match tc.kind {
            TeacherKind::Qrels => {
                let qrels = self.qrels.clone().expect("validated");
                let max = if tc.max_grade > 0 { tc.max_grade } else { qrels.max_grade() };
                let seed = derive_seed(self.config.seed, &format!("teacher/{qid}"));
                Box::new(QrelsTeacher::new(qrels, max).with_noise(tc.noise, seed))
            }
            TeacherKind::Http => Box::new(HttpTeacher::new(tc.endpoint.clone(), Duration::from_millis(tc.timeout_ms))),
            TeacherKind::File => Box::new(self.file_teacher.clone().expect("loaded in prepare")),
        }
    }

    fn thread_pool(&self) -> rayon::ThreadPool {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.parallelism)
            .build()
            .expect("thread pool")
    }

    /// Runs `kind` on every query, keeping the first `m` reformulations when
    /// `m` is given. Results come back in query order.
    pub fn run_pipeline(&self, kind: PipelineKind, m: Option<usize>) -> Vec<RunResult> {
        if let Some(b) = kind.baseline() {
            let supplied = self.reforms.iter().flatten().any(|r| !r.truncated(m.unwrap_or(usize::MAX)).is_empty());
            if !b.uses_reformulations() && supplied {
                log::warn!("{} ignores the supplied reformulations", b.name());
            }
        }
        let work: Vec<usize> = (0..self.queries.len()).collect();
        self.thread_pool().install(|| {
            work.par_iter()
                .map(|&i| self.run_query(i, kind, m))
                .collect()
        })
    }

    fn run_query(&self, i: usize, kind: PipelineKind, m: Option<usize>) -> RunResult {
        let (qid, text) = &self.queries[i];
        let reforms = match &self.reforms[i] {
            Ok(r) => match m {
                Some(m) => r.truncated(m),
                None => r.clone(),
            },
            Err(e) => return RunResult::failed_early(qid, kind.name(), format!("reformulation failed: {e}")),
        };
        let mut teacher = self.teacher_for(qid);
        let result = match kind.baseline() {
            None => {
                let mut cfg = self.config.loop_.clone();
                cfg.seed = derive_seed(self.config.seed, &format!("surrogate/{qid}"));
                run_reformir(&self.index, text, &reforms, &mut *teacher, &cfg)
            }
            Some(b) => {
                let reforms = if b.uses_reformulations() {
                    reforms
                } else {
                    ReformulationSet::empty(qid.clone(), text.clone(), "ignored")
                };
                run_baseline(&self.index, text, &reforms, &mut *teacher, &self.config.baseline_spec(b))
            }
        };
        if let Some(f) = &result.failure {
            log::warn!("query `{qid}` failed: {f}");
        }
        result
    }

    /// Ranked lists of the successful queries, keyed by query id.
    pub fn ranked_lists(results: &[RunResult]) -> std::collections::BTreeMap<String, RankedList> {
        results
            .iter()
            .filter(|r| !r.failed())
            .map(|r| (r.query_id.clone(), r.ranked_list()))
            .collect()
    }

    pub fn run_tag(&self, kind: PipelineKind) -> String {
        format!("{}-{}-s{}", kind.name(), &self.hash[..8], self.config.seed)
    }

    /// Creates `<output_dir>/<hash>`, or the first free `<hash>.N` when a
    /// previous run already used it.
    pub fn artifact_dir(&self) -> Result<PathBuf, ExperimentError> {
        let root = &self.config.output_dir;
        std::fs::create_dir_all(root).map_err(|e| ExperimentError::Io(format!("{}: {e}", root.display())))?;
        let mut n = 0;
        loop {
            let name = if n == 0 { self.hash.clone() } else { format!("{}.{n}", self.hash) };
            let dir = root.join(name);
            match std::fs::create_dir(&dir) {
                Ok(()) => return Ok(dir),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => n += 1,
                Err(e) => return Err(ExperimentError::Io(format!("{}: {e}", dir.display()))),
            }
        }
    }

    pub fn header(&self) -> String {
        format!("# config_hash={} seed={}", self.hash, self.config.seed)
    }
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub dir: PathBuf,
    pub hash: String,
    pub results: Vec<RunResult>,
    pub report: Option<ReportTable>,
    pub failed: Vec<String>,
    pub latency_mean_ms: f64,
    pub latency_std_ms: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    config_hash: &'a str,
    seed: u64,
    pipeline: &'a str,
    queries: usize,
    failed: &'a [String],
    latency_mean_ms: f64,
    latency_std_ms: f64,
}

fn create(path: &Path) -> Result<BufWriter<std::fs::File>, ExperimentError> {
    std::fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))
}

pub(crate) fn write_weights<W: Write>(mut w: W, header: &str, results: &[RunResult]) -> std::io::Result<()> {
    writeln!(w, "{header}")?;
    writeln!(w, "qid\tfeature\tweight")?;
    for r in results.iter().filter(|r| !r.failed()) {
        for (label, weight) in r.feature_labels.iter().zip(&r.weights) {
            writeln!(w, "{}\t{label}\t{weight}", r.query_id)?;
        }
    }
    Ok(())
}

/// Runs the configured pipeline and writes every artifact.
pub fn run_experiment(config: ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    let exp = Experiment::prepare(config)?;
    let kind = exp.config.pipeline.kind;
    let results = exp.run_pipeline(kind, exp.config.reformulations.m);
    let dir = exp.artifact_dir()?;
    let header = exp.header();
    let ok: Vec<RunResult> = results.iter().filter(|r| !r.failed()).cloned().collect();
    let failed: Vec<String> = results.iter().filter(|r| r.failed()).map(|r| r.query_id.clone()).collect();

    let lists: Vec<RankedList> = ok.iter().map(RunResult::ranked_list).collect();
    let mut w = create(&dir.join("run.trec"))?;
    write_run(&mut w, &lists, &exp.run_tag(kind))?;
    w.flush()?;

    let mut w = create(&dir.join("weights.tsv"))?;
    write_weights(&mut w, &header, &results)?;
    w.flush()?;

    let mut w = create(&dir.join("trace.jsonl"))?;
    writeln!(w, "{}", serde_json::json!({ "config_hash": exp.hash, "seed": exp.config.seed }))?;
    for r in &results {
        for t in &r.trace {
            let rec = serde_json::json!({
                "qid": r.query_id,
                "batch": t.batch,
                "selected": t.selected,
                "mean_error": t.mean_error,
                "solve": t.solve,
                "elapsed_ms": t.elapsed_ms,
            });
            writeln!(w, "{rec}")?;
        }
        if let Some(f) = &r.failure {
            writeln!(w, "{}", serde_json::json!({ "qid": r.query_id, "failure": f }))?;
        }
    }
    w.flush()?;

    let timings: Vec<TimingRecord> = ok.iter().map(TimingRecord::from).collect();
    let mut w = create(&dir.join("timings.jsonl"))?;
    writeln!(w, "{}", serde_json::json!({ "config_hash": exp.hash, "seed": exp.config.seed }))?;
    for t in &timings {
        writeln!(w, "{}", serde_json::to_string(t).expect("serializable"))?;
    }
    w.flush()?;
    let (mean, std) = latency_summary(&timings);

    let report = match &exp.qrels {
        Some(qrels) => {
            let mut opts = exp.config.eval.report_options();
            opts.weights_path = Some(dir.join("weights.tsv").display().to_string());
            let table = report(&[(exp.run_tag(kind), Experiment::ranked_lists(&results))], qrels, &[], &opts)
                .map_err(|e| ExperimentError::Io(e.to_string()))?;
            let mut w = create(&dir.join("report.tsv"))?;
            writeln!(w, "{header}")?;
            table.write_tsv(&mut w)?;
            w.flush()?;
            std::fs::write(dir.join("report.txt"), format!("{header}\n{}", table.render_text()))?;
            Some(table)
        }
        None => None,
    };

    let summary = Summary {
        config_hash: &exp.hash,
        seed: exp.config.seed,
        pipeline: kind.name(),
        queries: results.len(),
        failed: &failed,
        latency_mean_ms: mean,
        latency_std_ms: std,
    };
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("serializable") + "\n",
    )?;
    std::fs::write(dir.join("config.toml"), format!("{header}\n{}", exp.config.to_toml()))?;

    if failed.len() * 2 > results.len() {
        return Err(ExperimentError::MajorityFailure {
            failed: failed.len(),
            total: results.len(),
            dir: dir.display().to_string(),
        });
    }
    Ok(ExperimentOutcome {
        dir,
        hash: exp.hash,
        results,
        report,
        failed,
        latency_mean_ms: mean,
        latency_std_ms: std,
    })
}
