//! Reference pipelines under the same teacher budget as the main loop.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::prf::{expand_from_ranking, Rm3Params};
use crate::reform::ReformulationSet;
use crate::reformir::{sort_ranking, BatchTrace, PhaseTimings, RunResult, ScoredDoc};
use crate::teacher::{Teacher, TeacherDoc, TeacherError, TeacherRequest};
use crate::text::{Index, RankedList};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    BaseRerank,
    Rm3Rerank,
    RrfRerank,
    ConcatRerank,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::BaseRerank,
        BaselineKind::Rm3Rerank,
        BaselineKind::RrfRerank,
        BaselineKind::ConcatRerank,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::BaseRerank => "base_rerank",
            BaselineKind::Rm3Rerank => "rm3_rerank",
            BaselineKind::RrfRerank => "rrf_rerank",
            BaselineKind::ConcatRerank => "concat_rerank",
        }
    }

    /// Whether the pipeline reads reformulations at all.
    pub fn uses_reformulations(self) -> bool {
        matches!(self, BaselineKind::RrfRerank | BaselineKind::ConcatRerank)
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown baseline `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    pub budget: usize,
    pub k_rrf: f64,
    /// Retrieval depth for each list before fusion or truncation.
    pub depth: usize,
    /// Teacher calls are grouped into batches of this size.
    pub batch_size: usize,
    pub rm3: Rm3Params,
    /// Copies of the original query in the concatenated query.
    pub query_repetitions: usize,
}

impl Default for BaselineSpec {
    fn default() -> Self {
        Self {
            kind: BaselineKind::BaseRerank,
            budget: 100,
            k_rrf: 60.0,
            depth: 100,
            batch_size: 16,
            rm3: Rm3Params::default(),
            query_repetitions: 1,
        }
    }
}

impl BaselineSpec {
    pub fn new(kind: BaselineKind, budget: usize) -> Self {
        Self {
            kind,
            budget,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.k_rrf > 0.0) {
            return Err("k_rrf must be > 0".into());
        }
        if self.batch_size == 0 || self.depth == 0 {
            return Err("batch_size and depth must be at least 1".into());
        }
        if self.query_repetitions == 0 {
            return Err("query_repetitions must be at least 1".into());
        }
        Ok(())
    }
}

/// Reciprocal rank fusion. Each document's contributions are summed in a
/// fixed order so the result does not depend on the order of `lists`.
pub fn rrf_fuse(lists: &[RankedList], k_rrf: f64) -> RankedList {
    let query_id = lists.first().map(|l| l.query_id.clone()).unwrap_or_default();
    let mut parts: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for list in lists {
        for e in &list.entries {
            parts.entry(&e.doc_id).or_default().push(1.0 / (k_rrf + e.rank as f64));
        }
    }
    let scored = parts
        .into_iter()
        .map(|(d, mut v)| {
            v.sort_by(f64::total_cmp);
            (d.to_string(), v.iter().sum())
        })
        .collect();
    RankedList::from_scores(query_id, scored)
}

/// The candidate list a baseline hands to the teacher, before truncation.
pub fn candidate_list(index: &Index, original: &str, reforms: &ReformulationSet, spec: &BaselineSpec) -> RankedList {
    let qid = reforms.query_id.as_str();
    let depth = spec.depth.max(spec.budget);
    match spec.kind {
        BaselineKind::BaseRerank => index.search(qid, original, depth),
        BaselineKind::Rm3Rerank => {
            let terms = index.analyzer().tokenize(original);
            let first = index.search_terms(qid, &terms, spec.rm3.fb_docs);
            match expand_from_ranking(index, &terms, &first, spec.rm3.fb_docs, &spec.rm3) {
                Some(q) => index.search_weighted(qid, q.iter(), depth),
                None => index.search_terms(qid, &terms, depth),
            }
        }
        BaselineKind::RrfRerank => {
            let mut lists = vec![index.search(qid, original, spec.depth)];
            lists.extend(reforms.reformulations().iter().map(|q| index.search(qid, q, spec.depth)));
            let mut fused = rrf_fuse(&lists, spec.k_rrf);
            fused.query_id = qid.to_string();
            fused
        }
        BaselineKind::ConcatRerank => {
            let mut parts = vec![original; spec.query_repetitions];
            parts.extend(reforms.reformulations().iter().map(String::as_str));
            index.search(qid, &parts.join(" "), depth)
        }
    }
}

/// Teacher-scores `candidates` in order, `batch_size` at a time.
pub(crate) fn score_in_batches(
    query_id: &str,
    query: &str,
    candidates: &[&str],
    index: &Index,
    teacher: &mut dyn Teacher,
    batch_size: usize,
    timings: &mut PhaseTimings,
) -> (Vec<ScoredDoc>, Vec<BatchTrace>, Option<String>) {
    let mut scored = Vec::new();
    let mut trace = Vec::new();
    for (batch_no, chunk) in candidates.chunks(batch_size.max(1)).enumerate() {
        let t = Instant::now();
        let request = TeacherRequest {
            query_id,
            query,
            docs: chunk
                .iter()
                .map(|id| TeacherDoc {
                    id,
                    text: index.doc_text(id).unwrap_or(""),
                    features: &[],
                })
                .collect(),
        };
        let result = teacher.score(&request).and_then(|ys| {
            if ys.len() != chunk.len() {
                Err(TeacherError::CountMismatch {
                    expected: chunk.len(),
                    got: ys.len(),
                })
            } else {
                Ok(ys)
            }
        });
        let elapsed = t.elapsed().as_secs_f64() * 1e3;
        timings.teacher_ms += elapsed;
        let ys = match result {
            Ok(ys) => ys,
            Err(e) => return (scored, trace, Some(e.to_string())),
        };
        for (id, y) in chunk.iter().zip(ys) {
            scored.push(ScoredDoc {
                doc_id: id.to_string(),
                score: y,
                batch: batch_no,
            });
        }
        trace.push(BatchTrace {
            batch: batch_no,
            selected: chunk.iter().map(|s| s.to_string()).collect(),
            mean_error: None,
            solve: None,
            elapsed_ms: elapsed,
        });
    }
    (scored, trace, None)
}

pub fn run_baseline(
    index: &Index,
    original: &str,
    reforms: &ReformulationSet,
    teacher: &mut dyn Teacher,
    spec: &BaselineSpec,
) -> RunResult {
    let started = Instant::now();
    let mut timings = PhaseTimings::default();
    let t = Instant::now();
    let mut list = candidate_list(index, original, reforms, spec);
    list.truncate(spec.budget);
    timings.retrieval_ms = t.elapsed().as_secs_f64() * 1e3;
    let ids: Vec<&str> = list.doc_ids().collect();
    let (scored, trace, failure) = score_in_batches(
        &reforms.query_id,
        original,
        &ids,
        index,
        teacher,
        spec.batch_size,
        &mut timings,
    );
    let total = started.elapsed().as_secs_f64() * 1e3;
    timings.total_ms = total;
    timings.overhead_ms = (total - timings.retrieval_ms - timings.teacher_ms).max(0.0);
    RunResult {
        query_id: reforms.query_id.clone(),
        pipeline: spec.kind.name().to_string(),
        ranking: sort_ranking(&scored),
        scored,
        weights: Vec::new(),
        feature_labels: Vec::new(),
        trace,
        pool_size: list.len(),
        failure,
        timings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(ids: &[&str]) -> RankedList {
        let n = ids.len();
        RankedList::from_scores("q", ids.iter().enumerate().map(|(i, d)| (d.to_string(), (n - i) as f64)).collect())
    }

    #[test]
    fn rrf_tie_uses_doc_id() {
        let f = rrf_fuse(&[list(&["d1", "d2"]), list(&["d2", "d1"])], 60.0);
        assert_eq!(f.doc_ids().collect::<Vec<_>>(), ["d1", "d2"]);
        assert_eq!(f.entries[0].score, f.entries[1].score);
        assert!((f.entries[0].score - (1.0 / 61.0 + 1.0 / 62.0)).abs() < 1e-15);
    }

    #[test]
    fn rrf_single_list() {
        let f = rrf_fuse(&[list(&["b", "a", "c"])], 60.0);
        assert_eq!(f.doc_ids().collect::<Vec<_>>(), ["b", "a", "c"]);
        assert_eq!(f.entries[2].score, 1.0 / 63.0);
    }

    #[test]
    fn rrf_twice_retrieved_beats_single_top() {
        let mut a: Vec<String> = (0..60).map(|i| format!("x{i:02}")).collect();
        a[0] = "solo".into();
        a[49] = "twice".into();
        let mut b: Vec<String> = (0..60).map(|i| format!("y{i:02}")).collect();
        b[49] = "twice".into();
        let la = list(&a.iter().map(String::as_str).collect::<Vec<_>>());
        let lb = list(&b.iter().map(String::as_str).collect::<Vec<_>>());
        let f = rrf_fuse(&[la, lb], 60.0);
        assert_eq!(f.entries[0].doc_id, "twice");
        assert_eq!(f.entries[1].doc_id, "solo");
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in BaselineKind::ALL {
            assert_eq!(k.name().parse::<BaselineKind>().unwrap(), k);
        }
        assert!("nope".parse::<BaselineKind>().is_err());
    }
}
