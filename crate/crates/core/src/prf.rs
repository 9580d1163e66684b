//! RM3 pseudo-relevance feedback.
//!
//! The relevance model weights each feedback document's normalized term
//! frequencies by a softmax over the feedback scores, keeps the heaviest
//! `fb_terms` terms and renormalizes. Expansion linearly interpolates the
//! original query with that model. Scoring an expanded query against a
//! document is the weighted sum of per-term BM25 contributions, so the
//! resulting feature shares the BM25 scale of the other features.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{Index, IndexError};

#[derive(Debug, Error)]
pub enum PrfError {
    #[error("feedback set is empty")]
    EmptyFeedback,
    #[error("fb_terms must be at least 1")]
    NoTerms,
    #[error("feedback documents contain no usable expansion terms")]
    EmptyModel,
    #[error("duplicate feedback document `{0}`")]
    DuplicateDoc(String),
    #[error("non-finite feedback score for `{0}`")]
    NonFiniteScore(String),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Expanded,
}

/// Normalized term weights. Entries are strictly positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedQuery {
    terms: BTreeMap<String, f64>,
    pub provenance: Provenance,
}

impl WeightedQuery {
    /// The original query as a distribution: each analyzed term weighted by
    /// its relative frequency.
    pub fn from_terms(terms: &[String]) -> Self {
        let mut map = BTreeMap::new();
        for t in terms {
            *map.entry(t.clone()).or_insert(0.0) += 1.0;
        }
        let total = terms.len() as f64;
        for v in map.values_mut() {
            *v /= total;
        }
        Self {
            terms: map,
            provenance: Provenance::Original,
        }
    }

    /// Builds a query from arbitrary non-negative weights, dropping zeros and
    /// rescaling to sum 1.
    pub fn normalized(weights: impl IntoIterator<Item = (String, f64)>, provenance: Provenance) -> Self {
        let mut terms: BTreeMap<String, f64> = BTreeMap::new();
        for (t, w) in weights {
            if w > 0.0 {
                *terms.entry(t).or_insert(0.0) += w;
            }
        }
        let total: f64 = terms.values().sum();
        if total > 0.0 {
            for v in terms.values_mut() {
                *v /= total;
            }
        }
        Self { terms, provenance }
    }

    pub fn weight(&self, term: &str) -> f64 {
        self.terms.get(term).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.terms.iter().map(|(t, &w)| (t.as_str(), w))
    }

    pub fn total_weight(&self) -> f64 {
        self.terms.values().sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSet {
    entries: Vec<(String, f64)>,
}

impl FeedbackSet {
    pub fn new(entries: Vec<(String, f64)>) -> Result<Self, PrfError> {
        let mut seen = HashSet::new();
        for (id, score) in &entries {
            if !seen.insert(id.as_str()) {
                return Err(PrfError::DuplicateDoc(id.clone()));
            }
            if !score.is_finite() {
                return Err(PrfError::NonFiniteScore(id.clone()));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rm3Params {
    pub fb_docs: usize,
    pub fb_terms: usize,
    pub original_query_weight: f64,
}

impl Default for Rm3Params {
    fn default() -> Self {
        Self {
            fb_docs: 5,
            fb_terms: 10,
            original_query_weight: 0.3,
        }
    }
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn relevance_model(index: &Index, feedback: &FeedbackSet, fb_terms: usize) -> Result<WeightedQuery, PrfError> {
    if feedback.is_empty() {
        return Err(PrfError::EmptyFeedback);
    }
    if fb_terms == 0 {
        return Err(PrfError::NoTerms);
    }
    let scores: Vec<f64> = feedback.entries.iter().map(|(_, s)| *s).collect();
    let doc_weights = softmax(&scores);

    let analyzer = index.analyzer();
    let mut candidates: BTreeMap<&str, f64> = BTreeMap::new();
    for ((doc_id, _), dw) in feedback.entries.iter().zip(doc_weights) {
        let dl = index.doc_length(doc_id)?;
        if dl == 0 {
            continue;
        }
        for (term, tf) in index.doc_terms(doc_id)? {
            if analyzer.is_stopword(term) {
                continue;
            }
            *candidates.entry(term).or_insert(0.0) += f64::from(tf) / f64::from(dl) * dw;
        }
    }

    let mut ranked: Vec<(&str, f64)> = candidates.into_iter().filter(|(_, w)| *w > 0.0).collect();
    if ranked.is_empty() {
        return Err(PrfError::EmptyModel);
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(fb_terms);
    Ok(WeightedQuery::normalized(
        ranked.into_iter().map(|(t, w)| (t.to_string(), w)),
        Provenance::Expanded,
    ))
}

/// weight(t) = α·original(t) + (1−α)·model(t).
pub fn rm3_expand(original: &WeightedQuery, model: &WeightedQuery, alpha: f64) -> WeightedQuery {
    assert!((0.0..=1.0).contains(&alpha), "interpolation weight must lie in [0, 1]");
    if original.is_empty() {
        return WeightedQuery {
            terms: model.terms.clone(),
            provenance: Provenance::Expanded,
        };
    }
    if model.is_empty() {
        return original.clone();
    }
    let mut terms = BTreeMap::new();
    let keys: std::collections::BTreeSet<&String> = original.terms.keys().chain(model.terms.keys()).collect();
    for t in keys {
        let w = alpha * original.weight(t) + (1.0 - alpha) * model.weight(t);
        if w > 0.0 {
            terms.insert(t.clone(), w);
        }
    }
    WeightedQuery {
        terms,
        provenance: if alpha == 1.0 {
            original.provenance
        } else {
            Provenance::Expanded
        },
    }
}

/// Σ_t q′(t) · BM25(t, d).
pub fn rm3_feature(index: &Index, q_prime: &WeightedQuery, doc_id: &str) -> Result<f64, IndexError> {
    index.weighted_score(q_prime.iter(), doc_id)
}

/// Expanded query for `original_terms` built from the top `fb_docs` of a
/// BM25 ranking. Returns `None` when no usable feedback exists.
pub fn expand_from_ranking(
    index: &Index,
    original_terms: &[String],
    ranking: &crate::text::RankedList,
    feedback_docs: usize,
    params: &Rm3Params,
) -> Option<WeightedQuery> {
    let entries: Vec<(String, f64)> = ranking
        .entries
        .iter()
        .take(feedback_docs)
        .map(|e| (e.doc_id.clone(), e.score))
        .collect();
    let feedback = FeedbackSet::new(entries).ok()?;
    let model = relevance_model(index, &feedback, params.fb_terms).ok()?;
    Some(rm3_expand(
        &WeightedQuery::from_terms(original_terms),
        &model,
        params.original_query_weight,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{AnalyzerConfig, Bm25Params, Document};

    fn index(docs: &[(&str, &str)]) -> Index {
        Index::build(
            docs.iter().map(|(i, t)| Document::new(*i, *t)),
            AnalyzerConfig::plain(),
            Bm25Params::default(),
        )
        .unwrap()
    }

    fn fb(entries: &[(&str, f64)]) -> FeedbackSet {
        FeedbackSet::new(entries.iter().map(|(d, s)| (d.to_string(), *s)).collect()).unwrap()
    }

    #[test]
    fn single_doc_model() {
        let idx = index(&[("d", "x x y"), ("e", "z")]);
        let m = relevance_model(&idx, &fb(&[("d", 3.7)]), 2).unwrap();
        assert_eq!(m.weight("x"), 2.0 / 3.0);
        assert_eq!(m.weight("y"), 1.0 / 3.0);
        assert_eq!(m.len(), 2);

        let m1 = relevance_model(&idx, &fb(&[("d", 3.7)]), 1).unwrap();
        assert_eq!(m1.weight("x"), 1.0);
        assert_eq!(m1.len(), 1);
    }

    #[test]
    fn identical_feedback_docs_collapse() {
        let idx = index(&[("d1", "x x y"), ("d2", "x x y")]);
        let one = relevance_model(&idx, &fb(&[("d1", 1.0)]), 5).unwrap();
        let two = relevance_model(&idx, &fb(&[("d1", 1.0), ("d2", 1.0)]), 5).unwrap();
        for t in ["x", "y"] {
            assert!((one.weight(t) - two.weight(t)).abs() < 1e-15);
        }
    }

    #[test]
    fn ties_broken_lexicographically() {
        let idx = index(&[("d", "b a c")]);
        let m = relevance_model(&idx, &fb(&[("d", 0.0)]), 2).unwrap();
        assert_eq!(m.iter().map(|(t, _)| t).collect::<Vec<_>>(), ["a", "b"]);
    }

    #[test]
    fn stopwords_never_expand() {
        let mut analyzer = AnalyzerConfig::plain();
        let idx = Index::build([Document::new("d", "the cat the")], analyzer.clone(), Bm25Params::default()).unwrap();
        // index analyzed without stopwords; scoring analyzer marks "the"
        analyzer.stopwords.insert("the".into());
        let idx2 = Index::build([Document::new("d", "the cat the")], analyzer, Bm25Params::default()).unwrap();
        assert_eq!(relevance_model(&idx, &fb(&[("d", 1.0)]), 5).unwrap().len(), 2);
        let m = relevance_model(&idx2, &fb(&[("d", 1.0)]), 5).unwrap();
        assert_eq!(m.weight("cat"), 1.0);
    }

    #[test]
    fn error_paths() {
        let idx = index(&[("d", "x")]);
        assert!(matches!(
            relevance_model(&idx, &FeedbackSet::default(), 3),
            Err(PrfError::EmptyFeedback)
        ));
        assert!(matches!(relevance_model(&idx, &fb(&[("d", 1.0)]), 0), Err(PrfError::NoTerms)));
        assert!(matches!(
            FeedbackSet::new(vec![("d".into(), 1.0), ("d".into(), 2.0)]),
            Err(PrfError::DuplicateDoc(_))
        ));
        assert!(FeedbackSet::new(vec![("d".into(), f64::NAN)]).is_err());
    }

    #[test]
    fn expansion_interpolates() {
        let original = WeightedQuery::from_terms(&["a".to_string()]);
        let model = WeightedQuery::normalized(
            [("x".to_string(), 2.0 / 3.0), ("y".to_string(), 1.0 / 3.0)],
            Provenance::Expanded,
        );
        let q = rm3_expand(&original, &model, 0.3);
        assert!((q.weight("a") - 0.3).abs() < 1e-12);
        assert!((q.weight("x") - 0.466_666_666_666_666_7).abs() < 1e-12);
        assert!((q.weight("y") - 0.23333333333333333).abs() < 1e-12);
        assert!((q.total_weight() - 1.0).abs() < 1e-12);

        assert_eq!(rm3_expand(&original, &model, 1.0).iter().collect::<Vec<_>>(), original.iter().collect::<Vec<_>>());
        assert_eq!(rm3_expand(&original, &model, 0.0).iter().collect::<Vec<_>>(), model.iter().collect::<Vec<_>>());
    }

    #[test]
    fn rm3_feature_is_weighted_bm25() {
        let idx = index(&[("d1", "a b"), ("d2", "a a c"), ("d3", "c d")]);
        let q = WeightedQuery::normalized([("zz".to_string(), 1.0)], Provenance::Expanded);
        assert_eq!(rm3_feature(&idx, &q, "d2").unwrap(), 0.0);

        let qa = WeightedQuery::normalized([("a".to_string(), 1.0)], Provenance::Expanded);
        assert_eq!(rm3_feature(&idx, &qa, "d2").unwrap(), idx.bm25_term("a", "d2").unwrap());

        let qac = WeightedQuery::normalized(
            [("a".to_string(), 0.5), ("c".to_string(), 0.5)],
            Provenance::Expanded,
        );
        let expected = 0.5 * idx.bm25_term("a", "d2").unwrap() + 0.5 * idx.bm25_term("c", "d2").unwrap();
        assert!((rm3_feature(&idx, &qac, "d2").unwrap() - expected).abs() < 1e-12);
        assert!(rm3_feature(&idx, &qac, "nope").is_err());
    }
}
