//! Query files: `qid<TAB>text` per line.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

use super::ExperimentError;

pub fn read_queries<R: BufRead>(reader: R) -> Result<Vec<(String, String)>, ExperimentError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Some((qid, text)) = line.split_once('\t') else {
            return Err(ExperimentError::Config(format!(
                "queries line {}: expected `qid<TAB>text`",
                i + 1
            )));
        };
        let qid = qid.trim();
        if qid.is_empty() {
            return Err(ExperimentError::Config(format!("queries line {}: empty query id", i + 1)));
        }
        if !seen.insert(qid.to_string()) {
            return Err(ExperimentError::Config(format!(
                "queries line {}: duplicate query id `{qid}`",
                i + 1
            )));
        }
        out.push((qid.to_string(), text.trim().to_string()));
    }
    Ok(out)
}

pub fn load_queries(path: &Path) -> Result<Vec<(String, String)>, ExperimentError> {
    let f = std::fs::File::open(path).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
    read_queries(std::io::BufReader::new(f))
}

pub fn write_queries<W: Write>(mut w: W, queries: &[(String, String)]) -> std::io::Result<()> {
    for (q, t) in queries {
        writeln!(w, "{q}\t{t}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_in_order() {
        let q = read_queries(&b"q2\tsecond one\nq1\tfirst\n"[..]).unwrap();
        assert_eq!(q, [("q2".into(), "second one".into()), ("q1".into(), "first".into())]);
        assert!(read_queries(&b""[..]).unwrap().is_empty());
    }

    #[test]
    fn rejects_duplicates_and_malformed() {
        let e = read_queries(&b"q1\ta\nq1\tb\n"[..]).unwrap_err().to_string();
        assert!(e.contains("q1") && e.contains("line 2"));
        let e = read_queries(&b"q1 no tab\n"[..]).unwrap_err().to_string();
        assert!(e.contains("line 1"));
    }
}
