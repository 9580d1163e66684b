//! Candidate pool construction and per-document feature vectors.
//!
//! A document's feature vector is
//! `[BM25(Q_1,d), …, BM25(Q_m,d), BM25(Q,d), RM3(Q′,d)]`. Every column is
//! computed for every pool member, including documents a given reformulation
//! did not retrieve.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::prf::WeightedQuery;
use crate::reform::ReformulationSet;
use crate::text::{Index, RankedList};

/// Union of the original query's ranking (source 0) and every
/// reformulation's ranking (source i).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub query_id: String,
    /// Members in doc id order.
    pub members: Vec<String>,
    pub provenance: BTreeMap<String, BTreeSet<usize>>,
    pub k_cap: usize,
    /// Ranking per source; index 0 is R_0.
    pub sources: Vec<RankedList>,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// R_0, the original query's ranking.
    pub fn original_ranking(&self) -> &RankedList {
        &self.sources[0]
    }

    pub fn from_sources(query_id: &str, sources: Vec<RankedList>, k_cap: usize) -> Self {
        let mut provenance: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
        for (i, list) in sources.iter().enumerate() {
            for id in list.doc_ids() {
                provenance.entry(id.to_string()).or_default().insert(i);
            }
        }
        Self {
            query_id: query_id.to_string(),
            members: provenance.keys().cloned().collect(),
            provenance,
            k_cap,
            sources,
        }
    }
}

pub fn build_pool(index: &Index, original: &str, reforms: &ReformulationSet, k: usize) -> CandidatePool {
    assert!(k >= 1, "retrieval depth must be at least 1");
    let qid = reforms.query_id.as_str();
    let mut sources = Vec::with_capacity(reforms.len() + 1);
    sources.push(index.search(qid, original, k));
    for q in reforms.reformulations() {
        sources.push(index.search(qid, q, k));
    }
    CandidatePool::from_sources(qid, sources, k)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
}

impl ColumnStats {
    pub const MIN_STD: f64 = 1e-12;

    pub fn is_degenerate(&self) -> bool {
        self.std < Self::MIN_STD
    }

    pub fn apply(&self, raw: f64) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            (raw - self.mean) / self.std
        }
    }

    /// Population mean and standard deviation.
    pub fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count() as f64;
        if n == 0.0 {
            return Self { mean: 0.0, std: 0.0 };
        }
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub doc_order: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// `Q_1..Q_m`, `Q`, `RM3`.
    pub labels: Vec<String>,
    pub standardization: Option<Vec<ColumnStats>>,
    /// True when no expanded query was available and the RM3 column is zero.
    pub rm3_missing: bool,
}

impl FeatureMatrix {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rm3_column(&self) -> usize {
        self.labels.len() - 1
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + Clone + '_ {
        self.rows.iter().map(move |r| r[j])
    }

    /// Writes `doc_id` then one column per feature, tab-separated, with a
    /// header row.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "doc_id")?;
        for l in &self.labels {
            write!(w, "\t{l}")?;
        }
        writeln!(w)?;
        for (id, row) in self.doc_order.iter().zip(&self.rows) {
            write!(w, "{id}")?;
            for v in row {
                write!(w, "\t{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn feature_labels(m: usize) -> Vec<String> {
    let mut labels: Vec<String> = (1..=m).map(|i| format!("Q_{i}")).collect();
    labels.push("Q".into());
    labels.push("RM3".into());
    labels
}

/// Raw RM3 column values for `docs`.
pub fn rm3_values(index: &Index, q_prime: &WeightedQuery, docs: &[&str]) -> Vec<f64> {
    let dense = index.score_all_weighted(q_prime.iter());
    docs.iter()
        .map(|d| dense[index.doc_ordinal(d).expect("pool members come from the index") as usize])
        .collect()
}

pub fn feature_matrix(
    index: &Index,
    pool: &CandidatePool,
    original: &str,
    reforms: &ReformulationSet,
    q_prime: Option<&WeightedQuery>,
) -> FeatureMatrix {
    let m = reforms.len();
    let ordinals: Vec<usize> = pool
        .members
        .iter()
        .map(|d| index.doc_ordinal(d).expect("pool members come from the index") as usize)
        .collect();
    let mut rows = vec![Vec::with_capacity(m + 2); pool.len()];
    let analyzer = index.analyzer();
    let queries = reforms
        .reformulations()
        .iter()
        .map(String::as_str)
        .chain(std::iter::once(original));
    for q in queries {
        let dense = index.score_all(&analyzer.tokenize(q));
        for (row, &o) in rows.iter_mut().zip(&ordinals) {
            row.push(dense[o]);
        }
    }
    match q_prime {
        Some(qp) => {
            let dense = index.score_all_weighted(qp.iter());
            for (row, &o) in rows.iter_mut().zip(&ordinals) {
                row.push(dense[o]);
            }
        }
        None => rows.iter_mut().for_each(|r| r.push(0.0)),
    }
    FeatureMatrix {
        doc_order: pool.members.clone(),
        rows,
        labels: feature_labels(m),
        standardization: None,
        rm3_missing: q_prime.is_none(),
    }
}

/// Per-column z-scores; columns with (near-)zero spread become zeros.
pub fn standardize(matrix: &FeatureMatrix) -> FeatureMatrix {
    let stats: Vec<ColumnStats> = (0..matrix.dim()).map(|j| ColumnStats::of(matrix.column(j))).collect();
    let rows = matrix
        .rows
        .iter()
        .map(|r| r.iter().zip(&stats).map(|(&v, s)| s.apply(v)).collect())
        .collect();
    FeatureMatrix {
        doc_order: matrix.doc_order.clone(),
        rows,
        labels: matrix.labels.clone(),
        standardization: Some(stats),
        rm3_missing: matrix.rm3_missing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{AnalyzerConfig, Bm25Params, Document};

    fn tiny() -> Index {
        Index::build(
            [
                Document::new("d1", "a b"),
                Document::new("d2", "a a c"),
                Document::new("d3", "c d"),
                Document::new("d4", "e f"),
            ],
            AnalyzerConfig::plain(),
            Bm25Params::default(),
        )
        .unwrap()
    }

    fn reforms(list: &[&str]) -> ReformulationSet {
        ReformulationSet::new("q", "a", list.iter().map(|s| s.to_string()), "test")
    }

    #[test]
    fn pool_without_reformulations_is_r0() {
        let idx = tiny();
        let p = build_pool(&idx, "a", &reforms(&[]), 10);
        assert_eq!(p.members, ["d1", "d2"]);
        assert!(p.provenance.values().all(|s| s == &BTreeSet::from([0])));
    }

    #[test]
    fn union_and_provenance() {
        let idx = tiny();
        let p = build_pool(&idx, "a", &reforms(&["c", "e"]), 10);
        assert_eq!(p.members, ["d1", "d2", "d3", "d4"]);
        assert_eq!(p.provenance["d2"], BTreeSet::from([0, 1]));
        assert_eq!(p.provenance["d4"], BTreeSet::from([2]));
        assert!(p.len() <= (2 + 1) * p.k_cap);
    }

    #[test]
    fn duplicate_reformulation_text_leaves_union_unchanged() {
        let idx = tiny();
        let one = build_pool(&idx, "a", &reforms(&["c"]), 10);
        // ReformulationSet dedups identical text; bypass via from_sources
        let list = idx.search("q", "c", 10);
        let two = CandidatePool::from_sources("q", vec![idx.search("q", "a", 10), list.clone(), list], 10);
        assert_eq!(one.members, two.members);
    }

    #[test]
    fn feature_rows_match_closed_form() {
        let idx = tiny();
        let r = reforms(&["c"]);
        let p = build_pool(&idx, "a", &r, 10);
        let fm = feature_matrix(&idx, &p, "a", &r, None);
        assert_eq!(fm.labels, ["Q_1", "Q", "RM3"]);
        let i = fm.doc_order.iter().position(|d| d == "d2").unwrap();
        assert_eq!(
            fm.rows[i],
            [idx.bm25_term("c", "d2").unwrap(), idx.bm25_term("a", "d2").unwrap(), 0.0]
        );
        assert!(fm.rm3_missing);
        // d3 was only retrieved by Q_1 but still gets a (zero) Q column
        let j = fm.doc_order.iter().position(|d| d == "d3").unwrap();
        assert_eq!(fm.rows[j][1], 0.0);
    }

    #[test]
    fn m_zero_rows_have_two_columns() {
        let idx = tiny();
        let r = reforms(&[]);
        let p = build_pool(&idx, "a", &r, 10);
        let fm = feature_matrix(&idx, &p, "a", &r, None);
        assert!(fm.rows.iter().all(|row| row.len() == 2));
    }

    #[test]
    fn standardization() {
        let fm = FeatureMatrix {
            doc_order: vec!["x".into(), "y".into()],
            rows: vec![vec![1.0, 5.0], vec![3.0, 5.0]],
            labels: vec!["Q".into(), "RM3".into()],
            standardization: None,
            rm3_missing: false,
        };
        let s = standardize(&fm);
        assert_eq!(s.rows, [[-1.0, 0.0], [1.0, 0.0]]);
        let again = standardize(&s);
        for (a, b) in again.rows.iter().flatten().zip(s.rows.iter().flatten()) {
            assert!((a - b).abs() < 1e-9);
        }

        let single = FeatureMatrix {
            rows: vec![vec![4.0, 2.0]],
            doc_order: vec!["x".into()],
            ..fm
        };
        assert_eq!(standardize(&single).rows, [[0.0, 0.0]]);
    }

    #[test]
    fn tsv_dump() {
        let idx = tiny();
        let r = reforms(&["c"]);
        let p = build_pool(&idx, "a", &r, 10);
        let fm = feature_matrix(&idx, &p, "a", &r, None);
        let mut out = Vec::new();
        fm.write_tsv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("doc_id\tQ_1\tQ\tRM3\n"));
        assert_eq!(text.lines().count(), 1 + fm.len());
    }
}
