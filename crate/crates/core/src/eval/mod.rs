//! Effectiveness metrics, significance testing, and reporting.

pub mod metrics;
pub mod qrels;
pub mod report;
pub mod stats;
pub mod trec;

use thiserror::Error;

pub use metrics::{ndcg_at, ndcg_ids, recall_at, recall_ids, Gain};
pub use qrels::Qrels;
pub use report::{report, MetricReport, ReportOptions, ReportTable, Significance};
pub use stats::{bonferroni, paired_ttest, TTest};
pub use trec::{read_run, write_run};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("duplicate judgment for query `{qid}`, document `{doc_id}`")]
    DuplicateJudgment { qid: String, doc_id: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("paired samples differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 paired samples, got {0}")]
    TooFewSamples(usize),
    #[error("runs cover different query sets: {0}")]
    QueryMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
