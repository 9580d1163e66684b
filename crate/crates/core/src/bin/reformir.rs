//! Command-line front end. Exit codes: 0 success, 1 configuration error,
//! 2 more than half of the queries failed, 3 I/O error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use reformir::eval::{read_run, report, Gain, Qrels, ReportOptions};
use reformir::harness::config::parse_override_args;
use reformir::harness::data::write_queries;
use reformir::harness::{run_experiment, sweep_reformulations, Experiment, ExperimentConfig, ExperimentError};
use reformir::reform::write_reformulations;
use reformir::sim::{simulate_world, TopicWorld};
use reformir::text::{english_stopwords, load_corpus, load_stopwords, write_corpus_tsv, AnalyzerConfig, Bm25Params, CorpusFormat, Index};

#[derive(Parser)]
#[command(name = "reformir", version, about = "Budget-aware reranking over many query reformulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and save a BM25 index.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "tsv")]
        format: String,
        #[arg(long)]
        out: PathBuf,
        /// `english`, `none`, or a word-list file.
        #[arg(long, default_value = "english")]
        stopwords: String,
        #[arg(long)]
        no_stemming: bool,
        #[arg(long, default_value_t = 1.2)]
        k1: f64,
        #[arg(long, default_value_t = 0.75)]
        b: f64,
    },
    /// Produce reformulations for every query of a config and write JSONL.
    Reformulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Dotted overrides, e.g. `--reformulations.generator.n_requested 10`.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Run the configured pipeline and write artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Score TREC runs against qrels; later runs are tested against the first.
    Evaluate {
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long = "run", required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "100")]
        cutoffs: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        threshold: u32,
        #[arg(long)]
        exponential_gain: bool,
        /// Also write the table as TSV.
        #[arg(long)]
        tsv: Option<PathBuf>,
        /// Per-query values as CSV (`run,metric,qid,value`).
        #[arg(long)]
        per_query: Option<PathBuf>,
    },
    /// Run every pipeline at every reformulation count in `sweep.m`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Generate a synthetic topic world on disk.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        topics: usize,
        #[arg(long, default_value_t = 150)]
        docs_per_topic: usize,
        #[arg(long, default_value_t = 200)]
        vocab_per_topic: usize,
        #[arg(long, default_value_t = 3)]
        queries_per_topic: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Reformulations per query to write alongside; 0 writes none.
        #[arg(long, default_value_t = 0)]
        reformulations: usize,
        #[arg(long, default_value_t = 0.0)]
        drift: f64,
        /// Head words of the off-topic vocabulary drifted reformulations draw from; 0 uses all.
        #[arg(long, default_value_t = 0)]
        drift_focus: usize,
    },
    /// Print learned feature weights from a run's artifacts.
    DumpWeights {
        /// Artifact directory or weights.tsv file.
        path: PathBuf,
        #[arg(long)]
        query: Option<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Io(format!("{}: {e}", path.display()))
}

fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, ExperimentError> {
    let overrides = parse_override_args(overrides)?;
    ExperimentConfig::load(path, &overrides)
}

fn dispatch(command: Command) -> Result<(), ExperimentError> {
    match command {
        Command::Index {
            corpus,
            format,
            out,
            stopwords,
            no_stemming,
            k1,
            b,
        } => {
            let format: CorpusFormat = format.parse::<CorpusFormat>().map_err(|e| ExperimentError::Config(e.to_string()))?;
            let stop = match stopwords.as_str() {
                "english" => english_stopwords(),
                "none" => Default::default(),
                p => load_stopwords(Path::new(p)).map_err(|e| io_err(Path::new(p), e))?,
            };
            let analyzer = AnalyzerConfig::default().with_stopwords(stop).with_stemming(!no_stemming);
            let docs = load_corpus(&corpus, format).map_err(|e| io_err(&corpus, e))?;
            let index = Index::build(docs, analyzer, Bm25Params { k1, b }).map_err(|e| ExperimentError::Config(e.to_string()))?;
            index.save(&out).map_err(|e| io_err(&out, e))?;
            log::info!(
                "indexed {} documents, {} terms -> {}",
                index.doc_count(),
                index.vocabulary_size(),
                out.display()
            );
        }
        Command::Reformulate { config, out, overrides } => {
            let exp = Experiment::prepare(load_config(&config, &overrides)?)?;
            let mut sets = Vec::new();
            for ((qid, _), r) in exp.queries.iter().zip(&exp.reforms) {
                match r {
                    Ok(s) => sets.push(s.clone()),
                    Err(e) => log::warn!("no reformulations for `{qid}`: {e}"),
                }
            }
            let f = std::fs::File::create(&out).map_err(|e| io_err(&out, e))?;
            write_reformulations(std::io::BufWriter::new(f), &sets)?;
            log::info!("wrote reformulations for {} queries to {}", sets.len(), out.display());
        }
        Command::Run { config, overrides } => {
            let outcome = run_experiment(load_config(&config, &overrides)?)?;
            if let Some(t) = &outcome.report {
                print!("{}", t.render_text());
            }
            println!(
                "latency per query: {:.1} ms (std {:.1}); failed queries: {}",
                outcome.latency_mean_ms,
                outcome.latency_std_ms,
                outcome.failed.len()
            );
            println!("artifacts: {}", outcome.dir.display());
        }
        Command::Evaluate {
            qrels,
            runs,
            cutoffs,
            threshold,
            exponential_gain,
            tsv,
            per_query,
        } => {
            let q = Qrels::load(&qrels).map_err(|e| io_err(&qrels, e))?;
            let mut loaded = Vec::new();
            for p in &runs {
                let f = std::fs::File::open(p).map_err(|e| io_err(p, e))?;
                let run = read_run(std::io::BufReader::new(f)).map_err(|e| io_err(p, e))?;
                loaded.push((p.display().to_string(), run));
            }
            let comparisons: Vec<(usize, usize)> = (1..loaded.len()).map(|i| (i, 0)).collect();
            let opts = ReportOptions {
                cutoffs,
                threshold,
                gain: if exponential_gain { Gain::Exponential } else { Gain::Linear },
                ..ReportOptions::default()
            };
            let table = report(&loaded, &q, &comparisons, &opts).map_err(|e| ExperimentError::Config(e.to_string()))?;
            print!("{}", table.render_text());
            if let Some(p) = tsv {
                let f = std::fs::File::create(&p).map_err(|e| io_err(&p, e))?;
                table.write_tsv(f)?;
            }
            if let Some(p) = per_query {
                let mut w = std::io::BufWriter::new(std::fs::File::create(&p).map_err(|e| io_err(&p, e))?);
                writeln!(w, "run,metric,qid,value")?;
                for row in &table.cells {
                    for cell in row {
                        for (qid, v) in &cell.per_query {
                            writeln!(w, "{},{},{qid},{v}", cell.run_tag, cell.column())?;
                        }
                    }
                }
                w.flush()?;
            }
        }
        Command::Sweep { config, overrides } => {
            let outcome = sweep_reformulations(load_config(&config, &overrides)?)?;
            outcome.write_csv(std::io::stdout().lock(), None)?;
            if let Some(d) = &outcome.dir {
                println!("artifacts: {}", d.display());
            }
        }
        Command::Simulate {
            out,
            topics,
            docs_per_topic,
            vocab_per_topic,
            queries_per_topic,
            seed,
            reformulations,
            drift,
            drift_focus,
        } => {
            let spec = TopicWorld {
                topics,
                docs_per_topic,
                vocab_per_topic,
                queries_per_topic,
                drift_focus,
                seed,
                ..TopicWorld::default()
            };
            let world = simulate_world(&spec).map_err(|e| ExperimentError::Config(e.to_string()))?;
            std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
            let create = |name: &str| {
                let p = out.join(name);
                std::fs::File::create(&p)
                    .map(std::io::BufWriter::new)
                    .map_err(|e| io_err(&p, e))
            };
            let mut w = create("corpus.tsv")?;
            write_corpus_tsv(&mut w, &world.docs)?;
            w.flush()?;
            let queries: Vec<(String, String)> = world.queries.iter().map(|q| (q.id.clone(), q.text.clone())).collect();
            let mut w = create("queries.tsv")?;
            write_queries(&mut w, &queries)?;
            w.flush()?;
            let mut w = create("qrels.txt")?;
            world.qrels.write(&mut w)?;
            w.flush()?;
            if reformulations > 0 {
                let sets = world
                    .queries
                    .iter()
                    .map(|q| world.reformulate(&q.id, reformulations, drift, seed))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| ExperimentError::Config(e.to_string()))?;
                let mut w = create("reformulations.jsonl")?;
                write_reformulations(&mut w, &sets)?;
                w.flush()?;
            }
            log::info!(
                "wrote {} documents and {} queries to {}",
                world.docs.len(),
                queries.len(),
                out.display()
            );
        }
        Command::DumpWeights { path, query } => {
            let file = if path.is_dir() { path.join("weights.tsv") } else { path };
            let text = std::fs::read_to_string(&file).map_err(|e| io_err(&file, e))?;
            let mut current = String::new();
            for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
                let f: Vec<&str> = line.split('\t').collect();
                if f.len() != 3 {
                    return Err(ExperimentError::Io(format!("{}: malformed row `{line}`", file.display())));
                }
                if query.as_deref().is_some_and(|q| q != f[0]) {
                    continue;
                }
                if f[0] != current {
                    current = f[0].to_string();
                    println!("{current}");
                }
                let w: f64 = f[2].parse().map_err(|_| ExperimentError::Io(format!("bad weight `{}`", f[2])))?;
                println!("  {:<8} {w:>+10.4}", f[1]);
            }
        }
    }
    Ok(())
}
