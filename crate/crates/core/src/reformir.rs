//! The budgeted online loop.
//!
//! Every pool document is an arm that the teacher may score at most once.
//! Each round estimates the utility `wᵀx_d` of every unscored document, sends
//! the top batch (truncated to the remaining budget) to the teacher with the
//! original query, refits the surrogate on the feedback, optionally refreshes
//! the RM3 feature from the best-scored documents so far, and repeats until
//! the budget or the pool runs out.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::linalg::SolveKind;
use crate::pool::{build_pool, feature_matrix, standardize, ColumnStats, FeatureMatrix};
use crate::prf::{expand_from_ranking, relevance_model, rm3_expand, FeedbackSet, Rm3Params, WeightedQuery};
use crate::reform::ReformulationSet;
use crate::surrogate::{dot, estimation_error, Observation, SurrogateModel, UpdateScope};
use crate::teacher::{Teacher, TeacherDoc, TeacherError, TeacherRequest};
use crate::text::{Index, RankedList};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub batch_size: usize,
    /// Total teacher evaluations allowed per query.
    pub budget: usize,
    /// Number of top documents feeding the RM3 feature.
    pub feedback_size: usize,
    pub ridge: f64,
    /// Surrogate initialization seed. Experiment configs derive it per query
    /// from the run seed instead of reading it.
    #[serde(skip)]
    pub seed: u64,
    pub rm3_refresh: bool,
    pub standardize: bool,
    pub scope: UpdateScope,
    /// Retrieval depth per query and reformulation.
    pub depth: usize,
    pub rm3: Rm3Params,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            budget: 100,
            feedback_size: 15,
            ridge: 1e-3,
            seed: 0,
            rm3_refresh: true,
            standardize: true,
            scope: UpdateScope::Cumulative,
            depth: 100,
            rm3: Rm3Params::default(),
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.batch_size == 0 {
            return Err("batch_size must be at least 1".into());
        }
        if self.feedback_size == 0 {
            return Err("feedback_size must be at least 1".into());
        }
        if self.depth == 0 {
            return Err("depth must be at least 1".into());
        }
        if !(self.ridge >= 0.0) {
            return Err("ridge must be >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.rm3.original_query_weight) {
            return Err("original_query_weight must lie in [0, 1]".into());
        }
        if self.rm3.fb_terms == 0 || self.rm3.fb_docs == 0 {
            return Err("fb_terms and fb_docs must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
    pub batch: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchTrace {
    pub batch: usize,
    pub selected: Vec<String>,
    /// Mean ½(y − wᵀx)² over the batch using the weights that selected it.
    pub mean_error: Option<f64>,
    pub solve: Option<SolveKind>,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub retrieval_ms: f64,
    pub features_ms: f64,
    pub teacher_ms: f64,
    pub surrogate_ms: f64,
    pub overhead_ms: f64,
    pub total_ms: f64,
}

impl PhaseTimings {
    fn close(&mut self, total_ms: f64) {
        self.total_ms = total_ms;
        let phases = self.retrieval_ms + self.features_ms + self.teacher_ms + self.surrogate_ms;
        self.overhead_ms = (total_ms - phases).max(0.0);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub query_id: String,
    pub pipeline: String,
    /// Teacher-scored documents in scoring order.
    pub scored: Vec<ScoredDoc>,
    /// `scored` sorted by score descending, doc id ascending.
    pub ranking: Vec<ScoredDoc>,
    pub weights: Vec<f64>,
    pub feature_labels: Vec<String>,
    pub trace: Vec<BatchTrace>,
    pub pool_size: usize,
    pub failure: Option<String>,
    pub timings: PhaseTimings,
}

impl RunResult {
    /// A result for a query that failed before any teacher call.
    pub fn failed_early(query_id: &str, pipeline: &str, reason: impl Into<String>) -> Self {
        Self {
            query_id: query_id.to_string(),
            pipeline: pipeline.to_string(),
            scored: Vec::new(),
            ranking: Vec::new(),
            weights: Vec::new(),
            feature_labels: Vec::new(),
            trace: Vec::new(),
            pool_size: 0,
            failure: Some(reason.into()),
            timings: PhaseTimings::default(),
        }
    }

    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn teacher_evaluations(&self) -> usize {
        self.scored.len()
    }

    pub fn ranked_list(&self) -> RankedList {
        RankedList::from_scores(
            self.query_id.clone(),
            self.ranking.iter().map(|s| (s.doc_id.clone(), s.score)).collect(),
        )
    }

    /// Equality on everything except wall-clock measurements.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let strip = |r: &Self| {
            let mut r = r.clone();
            r.timings = PhaseTimings::default();
            r.trace.iter_mut().for_each(|t| t.elapsed_ms = 0.0);
            r
        };
        strip(self) == strip(other)
    }
}

pub(crate) fn sort_ranking(scored: &[ScoredDoc]) -> Vec<ScoredDoc> {
    let mut r = scored.to_vec();
    r.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
    r
}

/// Top `min(batch_size, remaining, |candidates|)` candidates by utility
/// descending, doc id ascending.
pub fn select_batch<'a>(candidates: &[(&'a str, f64)], batch_size: usize, remaining: usize) -> Vec<&'a str> {
    let n = batch_size.min(remaining).min(candidates.len());
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        candidates[b]
            .1
            .total_cmp(&candidates[a].1)
            .then_with(|| candidates[a].0.cmp(candidates[b].0))
    });
    order.into_iter().take(n).map(|i| candidates[i].0).collect()
}

/// Where teacher requests get document text from.
pub trait TextSource {
    fn text(&self, doc_id: &str) -> &str;
}

impl TextSource for Index {
    fn text(&self, doc_id: &str) -> &str {
        self.doc_text(doc_id).unwrap_or("")
    }
}

/// Supplies empty texts; for feature-only simulations.
pub struct NoText;

impl TextSource for NoText {
    fn text(&self, _doc_id: &str) -> &str {
        ""
    }
}

/// Recomputes the RM3 column from teacher feedback.
pub struct Rm3Refresher<'a> {
    pub index: &'a Index,
    pub original: WeightedQuery,
    pub params: Rm3Params,
    pub feedback_size: usize,
}

impl Rm3Refresher<'_> {
    /// Raw RM3 values for `docs` under the expansion built from the top
    /// `feedback_size` scored documents. `None` when no model can be built.
    fn recompute(&self, scored: &[ScoredDoc], docs: &[&str]) -> Option<Vec<f64>> {
        let top: Vec<(String, f64)> = sort_ranking(scored)
            .into_iter()
            .take(self.feedback_size)
            .map(|s| (s.doc_id, s.score))
            .collect();
        let feedback = FeedbackSet::new(top).ok()?;
        let model = relevance_model(self.index, &feedback, self.params.fb_terms).ok()?;
        let q_prime = rm3_expand(&self.original, &model, self.params.original_query_weight);
        Some(crate::pool::rm3_values(self.index, &q_prime, docs))
    }
}

/// Inputs for the loop on an already-built feature matrix.
pub struct LoopInputs<'a> {
    pub query_id: &'a str,
    /// Original query text sent to the teacher.
    pub query: &'a str,
    pub features: FeatureMatrix,
    pub texts: &'a dyn TextSource,
    pub refresher: Option<Rm3Refresher<'a>>,
}

/// Runs the budgeted loop over a fixed candidate set.
pub fn optimize(inputs: LoopInputs<'_>, teacher: &mut dyn Teacher, config: &LoopConfig) -> RunResult {
    let started = Instant::now();
    let LoopInputs {
        query_id,
        query,
        mut features,
        texts,
        refresher,
    } = inputs;
    let dim = features.dim();
    let mut model = SurrogateModel::new(dim, config.ridge, config.seed).with_scope(config.scope);
    let mut timings = PhaseTimings::default();
    let mut unscored: Vec<usize> = (0..features.len()).collect();
    let mut scored: Vec<ScoredDoc> = Vec::new();
    let mut trace = Vec::new();
    let mut failure = None;
    let target = config.budget.min(features.len());
    let rm3_col = features.rm3_column();

    let mut batch_no = 0;
    while scored.len() < target && !unscored.is_empty() {
        let batch_start = Instant::now();
        let t = Instant::now();
        let w = model.weights().to_vec();
        let candidates: Vec<(&str, f64)> = unscored
            .iter()
            .map(|&i| (features.doc_order[i].as_str(), dot(&w, &features.rows[i])))
            .collect();
        let chosen: Vec<String> = select_batch(&candidates, config.batch_size, target - scored.len())
            .into_iter()
            .map(str::to_string)
            .collect();
        let positions: std::collections::HashMap<&str, usize> = unscored
            .iter()
            .map(|&i| (features.doc_order[i].as_str(), i))
            .collect();
        let rows: Vec<usize> = chosen.iter().map(|d| positions[d.as_str()]).collect();
        timings.surrogate_ms += ms(t);

        let t = Instant::now();
        let request = TeacherRequest {
            query_id,
            query,
            docs: rows
                .iter()
                .map(|&i| TeacherDoc {
                    id: &features.doc_order[i],
                    text: texts.text(&features.doc_order[i]),
                    features: &features.rows[i],
                })
                .collect(),
        };
        let ys = teacher.score(&request).and_then(|ys| check_scores(ys, rows.len()));
        timings.teacher_ms += ms(t);
        let ys = match ys {
            Ok(ys) => ys,
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        };

        let t = Instant::now();
        let mean_error = ys
            .iter()
            .zip(&rows)
            .map(|(&y, &i)| estimation_error(&w, &features.rows[i], y))
            .sum::<f64>()
            / rows.len() as f64;
        let observations: Vec<Observation> = rows
            .iter()
            .zip(&ys)
            .map(|(&i, &y)| Observation {
                doc_id: features.doc_order[i].clone(),
                x: features.rows[i].clone(),
                y,
                batch: batch_no,
            })
            .collect();
        let solve = match model.update(observations) {
            Ok(s) => s,
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        };
        for (&i, &y) in rows.iter().zip(&ys) {
            scored.push(ScoredDoc {
                doc_id: features.doc_order[i].clone(),
                score: y,
                batch: batch_no,
            });
        }
        let picked: std::collections::HashSet<usize> = rows.iter().copied().collect();
        unscored.retain(|i| !picked.contains(i));

        if config.rm3_refresh && !unscored.is_empty() && scored.len() < target {
            if let Some(refresher) = &refresher {
                refresh_rm3(&mut features, refresher, &scored, &unscored, rm3_col);
            }
        }
        timings.surrogate_ms += ms(t);

        trace.push(BatchTrace {
            batch: batch_no,
            selected: chosen,
            mean_error: Some(mean_error),
            solve,
            elapsed_ms: ms(batch_start),
        });
        batch_no += 1;
    }

    timings.close(ms(started));
    RunResult {
        query_id: query_id.to_string(),
        pipeline: "reformir".into(),
        ranking: sort_ranking(&scored),
        scored,
        weights: model.weights().to_vec(),
        feature_labels: features.labels.clone(),
        trace,
        pool_size: features.len(),
        failure,
        timings,
    }
}

fn refresh_rm3(
    features: &mut FeatureMatrix,
    refresher: &Rm3Refresher<'_>,
    scored: &[ScoredDoc],
    unscored: &[usize],
    col: usize,
) {
    let docs: Vec<&str> = unscored.iter().map(|&i| features.doc_order[i].as_str()).collect();
    let Some(raw) = refresher.recompute(scored, &docs) else {
        return;
    };
    let stats = match &mut features.standardization {
        Some(stats) => {
            if stats[col].is_degenerate() {
                // no spread to reuse; take the refreshed column's own statistics
                stats[col] = ColumnStats::of(raw.iter().copied());
            }
            Some(stats[col])
        }
        None => None,
    };
    for (&i, v) in unscored.iter().zip(raw) {
        features.rows[i][col] = match stats {
            Some(s) => s.apply(v),
            None => v,
        };
    }
    features.rm3_missing = false;
}

fn check_scores(ys: Vec<f64>, expected: usize) -> Result<Vec<f64>, TeacherError> {
    if ys.len() != expected {
        return Err(TeacherError::CountMismatch {
            expected,
            got: ys.len(),
        });
    }
    if let Some(y) = ys.iter().find(|y| !y.is_finite()) {
        return Err(TeacherError::Parse(format!("non-finite teacher score {y}")));
    }
    Ok(ys)
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Builds the pool and features for a query, then runs the loop.
pub fn run_reformir(
    index: &Index,
    original: &str,
    reforms: &ReformulationSet,
    teacher: &mut dyn Teacher,
    config: &LoopConfig,
) -> RunResult {
    let started = Instant::now();
    let t = Instant::now();
    let pool = build_pool(index, original, reforms, config.depth);
    let retrieval_ms = ms(t);

    let t = Instant::now();
    let original_terms = index.analyzer().tokenize(original);
    let q_prime = expand_from_ranking(
        index,
        &original_terms,
        pool.original_ranking(),
        config.feedback_size,
        &config.rm3,
    );
    let raw = feature_matrix(index, &pool, original, reforms, q_prime.as_ref());
    let features = if config.standardize && !raw.is_empty() {
        standardize(&raw)
    } else {
        raw
    };
    let features_ms = ms(t);

    let refresher = Rm3Refresher {
        index,
        original: WeightedQuery::from_terms(&original_terms),
        params: config.rm3,
        feedback_size: config.feedback_size,
    };
    let mut result = optimize(
        LoopInputs {
            query_id: &reforms.query_id,
            query: original,
            features,
            texts: index,
            refresher: Some(refresher),
        },
        teacher,
        config,
    );
    result.timings.retrieval_ms = retrieval_ms;
    result.timings.features_ms = features_ms;
    result.timings.close(ms(started));
    result
}
