use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Graded judgments keyed by query then document.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a judgment; a second judgment for the same pair is rejected.
    pub fn insert(&mut self, qid: &str, doc_id: &str, grade: u32) -> Result<(), EvalError> {
        let q = self.judgments.entry(qid.to_string()).or_default();
        if q.insert(doc_id.to_string(), grade).is_some() {
            return Err(EvalError::DuplicateJudgment {
                qid: qid.to_string(),
                doc_id: doc_id.to_string(),
            });
        }
        Ok(())
    }

    pub fn grade(&self, qid: &str, doc_id: &str) -> Option<u32> {
        self.judgments.get(qid)?.get(doc_id).copied()
    }

    pub fn query(&self, qid: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(qid)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    /// Number of documents with grade >= threshold.
    pub fn relevant_count(&self, qid: &str, threshold: u32) -> usize {
        self.query(qid)
            .map_or(0, |q| q.values().filter(|&&g| g >= threshold).count())
    }

    pub fn max_grade(&self) -> u32 {
        self.judgments
            .values()
            .flat_map(|q| q.values().copied())
            .max()
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parses TREC qrels: `qid iter docid grade` per line.
    pub fn read<R: BufRead>(reader: R) -> Result<Self, EvalError> {
        let mut qrels = Self::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let malformed = |message: &str| EvalError::Malformed {
                line: i + 1,
                message: message.to_string(),
            };
            if fields.len() != 4 {
                return Err(malformed("expected `qid iter docid grade`"));
            }
            let grade: i64 = fields[3].parse().map_err(|_| malformed("grade is not an integer"))?;
            // negative grades (e.g. -1 "junk") count as non-relevant
            let grade = grade.max(0) as u32;
            qrels.insert(fields[0], fields[2], grade)?;
        }
        Ok(qrels)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let f = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(f))
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (qid, docs) in &self.judgments {
            for (doc, grade) in docs {
                writeln!(w, "{qid} 0 {doc} {grade}")?;
            }
        }
        Ok(())
    }
}
