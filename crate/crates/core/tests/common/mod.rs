#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use reformir::teacher::{Teacher, TeacherError, TeacherRequest};
use reformir::text::{AnalyzerConfig, Bm25Params, Document, Index};

/// Per-(query, doc) scores fixed by hashing, quantized to tenths so ties
/// occur and exercise the doc-id rule.
pub struct HashTeacher;

pub fn hash_score(qid: &str, doc: &str) -> f64 {
    let mut h = DefaultHasher::new();
    (qid, doc).hash(&mut h);
    (h.finish() % 11) as f64 / 10.0
}

impl Teacher for HashTeacher {
    fn score(&mut self, req: &TeacherRequest<'_>) -> Result<Vec<f64>, TeacherError> {
        Ok(req.docs.iter().map(|d| hash_score(req.query_id, d.id)).collect())
    }
}

pub fn three_doc_index() -> Index {
    Index::build(
        [
            Document::new("d1", "a b"),
            Document::new("d2", "a a c"),
            Document::new("d3", "c d"),
        ],
        AnalyzerConfig::plain(),
        Bm25Params::default(),
    )
    .unwrap()
}

/// BM25 straight from its closed form, Lucene idf.
pub fn bm25_closed_form(n: f64, df: f64, tf: f64, dl: f64, avgdl: f64) -> f64 {
    let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
    idf * tf * 2.2 / (tf + 1.2 * (1.0 - 0.75 + 0.75 * dl / avgdl))
}
