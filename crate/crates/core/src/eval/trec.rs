//! TREC run files: `qid Q0 docid rank score tag`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::EvalError;
use crate::text::RankedList;

pub fn write_run<W: Write>(mut w: W, lists: &[RankedList], tag: &str) -> std::io::Result<()> {
    for list in lists {
        for e in &list.entries {
            writeln!(w, "{} Q0 {} {} {} {}", list.query_id, e.doc_id, e.rank, e.score, tag)?;
        }
    }
    Ok(())
}

/// Reads a run, re-sorting each query by score descending then doc id.
pub fn read_run<R: BufRead>(reader: R) -> Result<BTreeMap<String, RankedList>, EvalError> {
    let mut raw: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let malformed = |message: &str| EvalError::Malformed {
            line: i + 1,
            message: message.to_string(),
        };
        if f.len() != 6 {
            return Err(malformed("expected `qid Q0 docid rank score tag`"));
        }
        let score: f64 = f[4].parse().map_err(|_| malformed("score is not a number"))?;
        let docs = raw.entry(f[0].to_string()).or_default();
        if docs.iter().any(|(d, _)| d == f[2]) {
            return Err(malformed("document listed twice for the same query"));
        }
        docs.push((f[2].to_string(), score));
    }
    Ok(raw
        .into_iter()
        .map(|(q, docs)| {
            let list = RankedList::from_scores(q.clone(), docs);
            (q, list)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let l = RankedList::from_scores("q1", vec![("b".into(), 0.5), ("a".into(), 0.5), ("c".into(), 0.9)]);
        let mut buf = Vec::new();
        write_run(&mut buf, std::slice::from_ref(&l), "t").unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), "q1 Q0 c 1 0.9 t");
        let back = read_run(&buf[..]).unwrap();
        assert_eq!(back["q1"], l);
    }

    #[test]
    fn malformed() {
        assert!(matches!(read_run(&b"q1 Q0 d 1\n"[..]), Err(EvalError::Malformed { line: 1, .. })));
    }
}
