use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::index::Document;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    /// `id<TAB>text`, one document per line.
    #[default]
    Tsv,
    /// One JSON object per line with `id` and `text` fields.
    Jsonl,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(Self::Tsv),
            "jsonl" | "json" => Ok(Self::Jsonl),
            other => Err(format!("unknown corpus format `{other}`")),
        }
    }
}

#[derive(Deserialize)]
struct JsonDoc {
    id: serde_json::Value,
    text: String,
}

pub fn read_corpus<R: BufRead>(reader: R, format: CorpusFormat) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let doc = match format {
            CorpusFormat::Tsv => {
                let (id, text) = line.split_once('\t').ok_or(CorpusError::Malformed {
                    line: line_no,
                    message: "expected `id<TAB>text`".into(),
                })?;
                Document::new(id.trim(), text)
            }
            CorpusFormat::Jsonl => {
                let d: JsonDoc = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                    line: line_no,
                    message: e.to_string(),
                })?;
                let id = match d.id {
                    serde_json::Value::String(s) => s,
                    serde_json::Value::Number(n) => n.to_string(),
                    other => {
                        return Err(CorpusError::Malformed {
                            line: line_no,
                            message: format!("id must be a string or number, got {other}"),
                        })
                    }
                };
                Document::new(id, d.text)
            }
        };
        if doc.id.is_empty() {
            return Err(CorpusError::Malformed {
                line: line_no,
                message: "empty document id".into(),
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<Document>, CorpusError> {
    let file = std::fs::File::open(path)?;
    read_corpus(std::io::BufReader::new(file), format)
}

pub fn write_corpus_tsv<W: std::io::Write>(mut w: W, docs: &[Document]) -> std::io::Result<()> {
    for d in docs {
        writeln!(w, "{}\t{}", d.id, d.text.replace(['\t', '\n'], " "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsv_and_jsonl() {
        let tsv = "d1\thello world\n\nd2\tfoo\tbar\n";
        let docs = read_corpus(tsv.as_bytes(), CorpusFormat::Tsv).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[1].text, "foo\tbar");

        let jsonl = "{\"id\":\"a\",\"text\":\"x y\"}\n{\"id\":7,\"text\":\"z\"}\n";
        let docs = read_corpus(jsonl.as_bytes(), CorpusFormat::Jsonl).unwrap();
        assert_eq!(docs[1].id, "7");
    }

    #[test]
    fn malformed_line_reports_number() {
        let err = read_corpus("d1\tok\nbroken\n".as_bytes(), CorpusFormat::Tsv).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }));
        let err = read_corpus("{\"id\":\"a\"}".as_bytes(), CorpusFormat::Jsonl).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 1, .. }));
    }
}
