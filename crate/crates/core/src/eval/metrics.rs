//! nDCG@c and Recall@c over a single query's ranking.
//!
//! Unjudged documents contribute zero gain. Both metrics return `None` when
//! the query has nothing to find, so callers can skip it.

use serde::{Deserialize, Serialize};

use super::Qrels;
use crate::text::RankedList;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gain {
    /// `grade`, as in trec_eval's ndcg_cut.
    #[default]
    Linear,
    /// `2^grade − 1`.
    Exponential,
}

impl Gain {
    fn of(self, grade: u32) -> f64 {
        match self {
            Gain::Linear => grade as f64,
            Gain::Exponential => 2f64.powi(grade as i32) - 1.0,
        }
    }
}

fn discount(rank: usize) -> f64 {
    ((rank + 1) as f64).log2()
}

/// Fraction of the query's relevant documents (grade >= `threshold`) found in
/// the first `c` ids.
pub fn recall_ids(ranked: &[&str], qrels: &Qrels, qid: &str, c: usize, threshold: u32) -> Option<f64> {
    let total = qrels.relevant_count(qid, threshold);
    if total == 0 {
        return None;
    }
    let found = ranked
        .iter()
        .take(c)
        .filter(|d| qrels.grade(qid, d).is_some_and(|g| g >= threshold))
        .count();
    Some(found as f64 / total as f64)
}

pub fn ndcg_ids(ranked: &[&str], qrels: &Qrels, qid: &str, c: usize, gain: Gain) -> Option<f64> {
    let judged = qrels.query(qid)?;
    let mut ideal: Vec<u32> = judged.values().copied().filter(|&g| g > 0).collect();
    if ideal.is_empty() {
        return None;
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(c)
        .enumerate()
        .map(|(i, &g)| gain.of(g) / discount(i + 1))
        .sum();
    let dcg: f64 = ranked
        .iter()
        .take(c)
        .enumerate()
        .map(|(i, d)| gain.of(qrels.grade(qid, d).unwrap_or(0)) / discount(i + 1))
        .sum();
    Some(if idcg > 0.0 { dcg / idcg } else { 0.0 })
}

pub fn recall_at(run: &RankedList, qrels: &Qrels, c: usize, threshold: u32) -> Option<f64> {
    let ids: Vec<&str> = run.doc_ids().collect();
    recall_ids(&ids, qrels, &run.query_id, c, threshold)
}

pub fn ndcg_at(run: &RankedList, qrels: &Qrels, c: usize, gain: Gain) -> Option<f64> {
    let ids: Vec<&str> = run.doc_ids().collect();
    ndcg_ids(&ids, qrels, &run.query_id, c, gain)
}
