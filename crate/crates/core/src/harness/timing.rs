//! Per-query latency records.

use serde::{Deserialize, Serialize};

use crate::reformir::RunResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub query_id: String,
    pub pipeline: String,
    pub retrieval_ms: f64,
    pub features_ms: f64,
    pub teacher_ms: f64,
    pub surrogate_ms: f64,
    pub overhead_ms: f64,
    pub total_ms: f64,
}

impl From<&RunResult> for TimingRecord {
    fn from(r: &RunResult) -> Self {
        let t = &r.timings;
        Self {
            query_id: r.query_id.clone(),
            pipeline: r.pipeline.clone(),
            retrieval_ms: t.retrieval_ms,
            features_ms: t.features_ms,
            teacher_ms: t.teacher_ms,
            surrogate_ms: t.surrogate_ms,
            overhead_ms: t.overhead_ms,
            total_ms: t.total_ms,
        }
    }
}

impl TimingRecord {
    pub fn phase_sum(&self) -> f64 {
        self.retrieval_ms + self.features_ms + self.teacher_ms + self.surrogate_ms + self.overhead_ms
    }
}

/// Mean and population standard deviation of per-query totals.
pub fn latency_summary(records: &[TimingRecord]) -> (f64, f64) {
    if records.is_empty() {
        return (0.0, 0.0);
    }
    let n = records.len() as f64;
    let mean = records.iter().map(|r| r.total_ms).sum::<f64>() / n;
    let var = records.iter().map(|r| (r.total_ms - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
