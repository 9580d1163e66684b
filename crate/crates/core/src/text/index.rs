//! In-memory inverted index with BM25 scoring.
//!
//! Documents are numbered in ascending id order, so ordinal order and doc-id
//! order coincide and every tie-break by ordinal is a tie-break by id.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::analyzer::AnalyzerConfig;

const FORMAT_MAGIC: &str = "REFORMIR-INDEX";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate document id `{0}`")]
    DuplicateDoc(String),
    #[error("unknown document id `{0}`")]
    UnknownDoc(String),
    #[error("index format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Clone, Debug, PartialEq)]
struct DocEntry {
    id: String,
    text: String,
    length: u32,
    /// (term ordinal, tf), sorted by term ordinal.
    terms: Vec<(u32, u32)>,
}

/// One retrieved document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub doc_id: String,
    pub score: f64,
    pub rank: usize,
}

/// Ranked retrieval output: scores non-increasing, ranks 1..=n, unique ids.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    /// Builds a list from (doc, score) pairs, sorting by score descending then
    /// doc id ascending and assigning ranks.
    pub fn from_scores(query_id: impl Into<String>, mut scored: Vec<(String, f64)>) -> Self {
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let entries = scored
            .into_iter()
            .enumerate()
            .map(|(i, (doc_id, score))| RankedEntry {
                doc_id,
                score,
                rank: i + 1,
            })
            .collect();
        Self {
            query_id: query_id.into(),
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }

    pub fn truncate(&mut self, k: usize) {
        self.entries.truncate(k);
    }
}

#[derive(Clone, Debug)]
pub struct Index {
    analyzer: AnalyzerConfig,
    params: Bm25Params,
    docs: Vec<DocEntry>,
    doc_lookup: HashMap<String, u32>,
    terms: Vec<String>,
    term_lookup: HashMap<String, u32>,
    postings: Vec<Vec<Posting>>,
    avg_doc_length: f64,
}

impl Index {
    /// Builds an index. Document ids must be unique.
    pub fn build<I>(docs: I, analyzer: AnalyzerConfig, params: Bm25Params) -> Result<Self, IndexError>
    where
        I: IntoIterator<Item = Document>,
    {
        let mut analyzed: BTreeMap<String, (String, BTreeMap<String, u32>, u32)> = BTreeMap::new();
        for doc in docs {
            if analyzed.contains_key(&doc.id) {
                return Err(IndexError::DuplicateDoc(doc.id));
            }
            let tokens = analyzer.tokenize(&doc.text);
            let length = tokens.len() as u32;
            let mut counts = BTreeMap::new();
            for t in tokens {
                *counts.entry(t).or_insert(0u32) += 1;
            }
            analyzed.insert(doc.id, (doc.text, counts, length));
        }
        Ok(Self::assemble(analyzer, params, analyzed))
    }

    fn assemble(
        analyzer: AnalyzerConfig,
        params: Bm25Params,
        analyzed: BTreeMap<String, (String, BTreeMap<String, u32>, u32)>,
    ) -> Self {
        let mut vocab: BTreeMap<&str, ()> = BTreeMap::new();
        for (_, counts, _) in analyzed.values() {
            for t in counts.keys() {
                vocab.insert(t.as_str(), ());
            }
        }
        let terms: Vec<String> = vocab.keys().map(|t| t.to_string()).collect();
        let term_lookup: HashMap<String, u32> = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();

        let mut postings = vec![Vec::new(); terms.len()];
        let mut docs = Vec::with_capacity(analyzed.len());
        let mut doc_lookup = HashMap::with_capacity(analyzed.len());
        let mut total_len: u64 = 0;
        for (ordinal, (id, (text, counts, length))) in analyzed.into_iter().enumerate() {
            let ordinal = ordinal as u32;
            let mut doc_terms = Vec::with_capacity(counts.len());
            for (t, tf) in counts {
                let tid = term_lookup[&t];
                postings[tid as usize].push(Posting { doc: ordinal, tf });
                doc_terms.push((tid, tf));
            }
            total_len += u64::from(length);
            doc_lookup.insert(id.clone(), ordinal);
            docs.push(DocEntry {
                id,
                text,
                length,
                terms: doc_terms,
            });
        }
        let avg_doc_length = if docs.is_empty() {
            0.0
        } else {
            total_len as f64 / docs.len() as f64
        };
        Self {
            analyzer,
            params,
            docs,
            doc_lookup,
            terms,
            term_lookup,
            postings,
            avg_doc_length,
        }
    }

    pub fn analyzer(&self) -> &AnalyzerConfig {
        &self.analyzer
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.term_lookup
            .get(term)
            .map_or(0, |&t| self.postings[t as usize].len())
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.term_lookup
            .get(term)
            .map_or(&[], |&t| self.postings[t as usize].as_slice())
    }

    pub fn doc_ordinal(&self, doc_id: &str) -> Result<u32, IndexError> {
        self.doc_lookup
            .get(doc_id)
            .copied()
            .ok_or_else(|| IndexError::UnknownDoc(doc_id.to_string()))
    }

    pub fn doc_id(&self, ordinal: u32) -> &str {
        &self.docs[ordinal as usize].id
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.docs.iter().map(|d| d.id.as_str())
    }

    pub fn contains_doc(&self, doc_id: &str) -> bool {
        self.doc_lookup.contains_key(doc_id)
    }

    pub fn doc_text(&self, doc_id: &str) -> Result<&str, IndexError> {
        Ok(&self.docs[self.doc_ordinal(doc_id)? as usize].text)
    }

    pub fn doc_length(&self, doc_id: &str) -> Result<u32, IndexError> {
        Ok(self.docs[self.doc_ordinal(doc_id)? as usize].length)
    }

    /// (term, tf) pairs of a document in term order.
    pub fn doc_terms(&self, doc_id: &str) -> Result<impl Iterator<Item = (&str, u32)>, IndexError> {
        let d = &self.docs[self.doc_ordinal(doc_id)? as usize];
        Ok(d.terms
            .iter()
            .map(|&(t, tf)| (self.terms[t as usize].as_str(), tf)))
    }

    pub fn term_freq(&self, term: &str, doc_id: &str) -> Result<u32, IndexError> {
        let ord = self.doc_ordinal(doc_id)?;
        Ok(self.tf_by_ordinal(term, ord))
    }

    fn tf_by_ordinal(&self, term: &str, ord: u32) -> u32 {
        let Some(&tid) = self.term_lookup.get(term) else {
            return 0;
        };
        let terms = &self.docs[ord as usize].terms;
        terms
            .binary_search_by_key(&tid, |&(t, _)| t)
            .map_or(0, |i| terms[i].1)
    }

    /// ln(1 + (N - df + 0.5) / (df + 0.5)); strictly positive for df <= N.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, idf: f64, tf: u32, dl: u32) -> f64 {
        if tf == 0 {
            return 0.0;
        }
        let Bm25Params { k1, b } = self.params;
        let tf = f64::from(tf);
        let norm = k1 * (1.0 - b + b * f64::from(dl) / self.avg_doc_length);
        idf * tf * (k1 + 1.0) / (tf + norm)
    }

    /// BM25 contribution of one analyzed term to one document.
    pub fn bm25_term(&self, term: &str, doc_id: &str) -> Result<f64, IndexError> {
        let ord = self.doc_ordinal(doc_id)?;
        Ok(self.bm25_term_by_ordinal(term, ord))
    }

    pub(crate) fn bm25_term_by_ordinal(&self, term: &str, ord: u32) -> f64 {
        let tf = self.tf_by_ordinal(term, ord);
        if tf == 0 {
            return 0.0;
        }
        self.term_weight(self.idf(term), tf, self.docs[ord as usize].length)
    }

    /// BM25 of an analyzed query (terms counted with multiplicity).
    pub fn bm25_score(&self, query_terms: &[String], doc_id: &str) -> Result<f64, IndexError> {
        let ord = self.doc_ordinal(doc_id)?;
        let mut score = 0.0;
        for (term, count) in group_terms(query_terms) {
            let s = self.bm25_term_by_ordinal(term, ord);
            if s != 0.0 {
                score += count as f64 * s;
            }
        }
        Ok(score)
    }

    /// Scores every document against weighted terms in one pass over the
    /// postings. Entry `i` is the score of the document with ordinal `i`; the
    /// accumulation order matches [`Index::bm25_score`] and
    /// [`Index::weighted_score`] so values are bit-identical to theirs.
    pub fn score_all_weighted<'a, I>(&self, weighted_terms: I) -> Vec<f64>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut acc = vec![0.0; self.docs.len()];
        for (term, weight) in weighted_terms {
            let idf = self.idf(term);
            for p in self.postings(term) {
                let s = self.term_weight(idf, p.tf, self.docs[p.doc as usize].length);
                acc[p.doc as usize] += weight * s;
            }
        }
        acc
    }

    /// Dense score vector for an analyzed query (multiplicity as weight).
    pub fn score_all(&self, query_terms: &[String]) -> Vec<f64> {
        self.score_all_weighted(
            group_terms(query_terms)
                .into_iter()
                .map(|(t, c)| (t, c as f64)),
        )
    }

    /// Σ weight(t) · bm25_term(t, d) over the given terms, in the given order.
    pub fn weighted_score<'a, I>(&self, weighted_terms: I, doc_id: &str) -> Result<f64, IndexError>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let ord = self.doc_ordinal(doc_id)?;
        let mut score = 0.0;
        for (term, weight) in weighted_terms {
            let s = self.bm25_term_by_ordinal(term, ord);
            if s != 0.0 {
                score += weight * s;
            }
        }
        Ok(score)
    }

    /// Top-k documents for a raw query string; zero-score documents omitted,
    /// ties broken by doc id ascending.
    pub fn search(&self, query_id: &str, query: &str, k: usize) -> RankedList {
        let terms = self.analyzer.tokenize(query);
        self.search_terms(query_id, &terms, k)
    }

    pub fn search_terms(&self, query_id: &str, terms: &[String], k: usize) -> RankedList {
        let scores = self.score_all(terms);
        self.top_k(query_id, &scores, k)
    }

    pub fn search_weighted<'a, I>(&self, query_id: &str, weighted_terms: I, k: usize) -> RankedList
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let scores = self.score_all_weighted(weighted_terms);
        self.top_k(query_id, &scores, k)
    }

    fn top_k(&self, query_id: &str, scores: &[f64], k: usize) -> RankedList {
        if k == 0 {
            return RankedList {
                query_id: query_id.to_string(),
                entries: Vec::new(),
            };
        }
        let mut hits: Vec<(u32, f64)> = scores
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0.0)
            .map(|(i, &s)| (i as u32, s))
            .collect();
        // ordinal order is id order
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        hits.truncate(k);
        RankedList {
            query_id: query_id.to_string(),
            entries: hits
                .into_iter()
                .enumerate()
                .map(|(i, (ord, score))| RankedEntry {
                    doc_id: self.docs[ord as usize].id.clone(),
                    score,
                    rank: i + 1,
                })
                .collect(),
        }
    }

    /// Writes the index as a version header line followed by one JSON body.
    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let body = IndexFile {
            analyzer: self.analyzer.clone(),
            params: self.params,
            docs: self
                .docs
                .iter()
                .map(|d| StoredDoc {
                    id: d.id.clone(),
                    text: d.text.clone(),
                    length: d.length,
                    terms: d
                        .terms
                        .iter()
                        .map(|&(t, tf)| (self.terms[t as usize].clone(), tf))
                        .collect(),
                })
                .collect(),
        };
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{FORMAT_MAGIC} {FORMAT_VERSION}")?;
        serde_json::to_writer(&mut w, &body).map_err(|e| IndexError::Format(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut header = String::new();
        r.read_line(&mut header)?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(FORMAT_MAGIC) {
            return Err(IndexError::Format("missing index header".into()));
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| IndexError::Format("unreadable version".into()))?;
        if version != FORMAT_VERSION {
            return Err(IndexError::Format(format!(
                "unsupported version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let body: IndexFile =
            serde_json::from_reader(r).map_err(|e| IndexError::Format(e.to_string()))?;
        let mut analyzed = BTreeMap::new();
        for d in body.docs {
            let counts: BTreeMap<String, u32> = d.terms.into_iter().collect();
            let total: u32 = counts.values().sum();
            if total != d.length {
                return Err(IndexError::Format(format!(
                    "document `{}` length {} disagrees with its term counts",
                    d.id, d.length
                )));
            }
            if analyzed.insert(d.id.clone(), (d.text, counts, d.length)).is_some() {
                return Err(IndexError::DuplicateDoc(d.id));
            }
        }
        Ok(Self::assemble(body.analyzer, body.params, analyzed))
    }
}

/// Distinct terms in first-occurrence order with their counts.
pub(crate) fn group_terms(terms: &[String]) -> Vec<(&str, usize)> {
    let mut out: Vec<(&str, usize)> = Vec::new();
    let mut pos: HashMap<&str, usize> = HashMap::new();
    for t in terms {
        match pos.get(t.as_str()) {
            Some(&i) => out[i].1 += 1,
            None => {
                pos.insert(t.as_str(), out.len());
                out.push((t.as_str(), 1));
            }
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    analyzer: AnalyzerConfig,
    params: Bm25Params,
    docs: Vec<StoredDoc>,
}

#[derive(Serialize, Deserialize)]
struct StoredDoc {
    id: String,
    text: String,
    length: u32,
    terms: Vec<(String, u32)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Index {
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

    /// Closed-form BM25 evaluated independently of the index.
    fn closed_form(n: f64, df: f64, tf: f64, dl: f64, avgdl: f64) -> f64 {
        let (k1, b) = (1.2, 0.75);
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl))
    }

    #[test]
    fn empty_index() {
        let idx = Index::build(Vec::new(), AnalyzerConfig::plain(), Bm25Params::default()).unwrap();
        assert_eq!(idx.doc_count(), 0);
        assert_eq!(idx.vocabulary_size(), 0);
        assert!(idx.search("q", "a", 10).is_empty());
    }

    #[test]
    fn statistics_of_three_doc_corpus() {
        let idx = tiny();
        assert_eq!(idx.doc_count(), 3);
        assert_eq!(idx.doc_freq("a"), 2);
        assert_eq!(idx.doc_freq("c"), 2);
        assert!((idx.avg_doc_length() - 7.0 / 3.0).abs() < 1e-15);
        // postings sorted by doc id
        let docs: Vec<_> = idx.postings("c").iter().map(|p| idx.doc_id(p.doc)).collect();
        assert_eq!(docs, ["d2", "d3"]);
    }

    #[test]
    fn duplicate_doc_rejected() {
        let err = Index::build(
            [Document::new("x", "a"), Document::new("x", "b")],
            AnalyzerConfig::plain(),
            Bm25Params::default(),
        )
        .unwrap_err();
        assert!(matches!(err, IndexError::DuplicateDoc(ref id) if id == "x"));
    }

    #[test]
    fn bm25_term_matches_closed_form() {
        let idx = tiny();
        let d1 = idx.bm25_term("a", "d1").unwrap();
        assert!((d1 - 0.4992).abs() < 1e-4, "{d1}");
        assert!((d1 - closed_form(3.0, 2.0, 1.0, 2.0, 7.0 / 3.0)).abs() < 1e-12);
        let d2 = idx.bm25_term("a", "d2").unwrap();
        assert!((d2 - closed_form(3.0, 2.0, 2.0, 3.0, 7.0 / 3.0)).abs() < 1e-12);
        assert!(d2 > d1);
        assert_eq!(idx.bm25_term("b", "d2").unwrap(), 0.0);
        assert_eq!(idx.bm25_term("zzz", "d2").unwrap(), 0.0);
        assert!(matches!(idx.bm25_term("a", "d9"), Err(IndexError::UnknownDoc(_))));
    }

    #[test]
    fn bm25_score_sums_terms() {
        let idx = tiny();
        let q: Vec<String> = vec!["a".into(), "c".into()];
        let expected = closed_form(3.0, 2.0, 2.0, 3.0, 7.0 / 3.0) + closed_form(3.0, 2.0, 1.0, 3.0, 7.0 / 3.0);
        assert!((idx.bm25_score(&q, "d2").unwrap() - expected).abs() < 1e-12);
        assert_eq!(idx.bm25_score(&["zz".to_string()], "d2").unwrap(), 0.0);
        assert_eq!(
            idx.bm25_score(&["a".to_string()], "d1").unwrap(),
            idx.bm25_term("a", "d1").unwrap()
        );
    }

    #[test]
    fn search_orders_and_omits_zero() {
        let idx = tiny();
        let r = idx.search("q", "a", 10);
        assert_eq!(r.doc_ids().collect::<Vec<_>>(), ["d2", "d1"]);
        assert_eq!(r.entries[0].rank, 1);
        assert!(idx.search("q", "a", 0).is_empty());
    }

    #[test]
    fn identical_texts_tie_by_id() {
        let idx = Index::build(
            [
                Document::new("z", "same words"),
                Document::new("m", "same words"),
                Document::new("q", "other"),
            ],
            AnalyzerConfig::plain(),
            Bm25Params::default(),
        )
        .unwrap();
        let r = idx.search("q", "same", 5);
        assert_eq!(r.doc_ids().collect::<Vec<_>>(), ["m", "z"]);
        assert_eq!(r.entries[0].score, r.entries[1].score);
    }

    #[test]
    fn dense_scores_match_pointwise_scores() {
        let idx = tiny();
        let q: Vec<String> = vec!["c".into(), "a".into(), "c".into()];
        let dense = idx.score_all(&q);
        for id in ["d1", "d2", "d3"] {
            let ord = idx.doc_ordinal(id).unwrap() as usize;
            assert_eq!(dense[ord].to_bits(), idx.bm25_score(&q, id).unwrap().to_bits());
        }
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx");
        let idx = tiny();
        idx.save(&path).unwrap();
        let back = Index::load(&path).unwrap();
        assert_eq!(idx.search("q", "a", 10), back.search("q", "a", 10));
        for t in ["a", "b", "c", "d"] {
            for d in ["d1", "d2", "d3"] {
                assert_eq!(
                    idx.bm25_term(t, d).unwrap().to_bits(),
                    back.bm25_term(t, d).unwrap().to_bits()
                );
            }
        }

        let empty = Index::build(Vec::new(), AnalyzerConfig::plain(), Bm25Params::default()).unwrap();
        empty.save(&path).unwrap();
        assert_eq!(Index::load(&path).unwrap().doc_count(), 0);
    }

    #[test]
    fn truncated_or_foreign_files_are_format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx");
        tiny().save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(Index::load(&path), Err(IndexError::Format(_))));

        std::fs::write(&path, "REFORMIR-INDEX 99\n{}").unwrap();
        assert!(matches!(Index::load(&path), Err(IndexError::Format(_))));
        std::fs::write(&path, "something else").unwrap();
        assert!(matches!(Index::load(&path), Err(IndexError::Format(_))));
    }
}
