use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::porter;

const ENGLISH_STOPWORDS: &str = include_str!("stopwords_en.txt");

/// Text analysis chain: lowercase, split on non-alphanumeric runs, drop
/// stopwords, then optionally Porter-stem. The steps always run in that order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    pub lowercase: bool,
    pub stopwords: BTreeSet<String>,
    pub stemming: bool,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            stopwords: english_stopwords(),
            stemming: true,
        }
    }
}

impl AnalyzerConfig {
    /// Lowercasing and splitting only.
    pub fn plain() -> Self {
        Self {
            lowercase: true,
            stopwords: BTreeSet::new(),
            stemming: false,
        }
    }

    pub fn with_stopwords(mut self, stopwords: BTreeSet<String>) -> Self {
        self.stopwords = stopwords;
        self
    }

    pub fn with_stemming(mut self, stemming: bool) -> Self {
        self.stemming = stemming;
        self
    }

    pub fn is_stopword(&self, term: &str) -> bool {
        self.stopwords.contains(term)
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        tokenize(text, self)
    }
}

/// The built-in English stopword list.
pub fn english_stopwords() -> BTreeSet<String> {
    ENGLISH_STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

/// Reads a stopword file: one term per line, blank lines ignored.
pub fn load_stopwords(path: &Path) -> std::io::Result<BTreeSet<String>> {
    let file = std::fs::File::open(path)?;
    let mut out = BTreeSet::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        let term = line.trim();
        if !term.is_empty() {
            out.insert(term.to_lowercase());
        }
    }
    Ok(out)
}

pub fn tokenize(text: &str, config: &AnalyzerConfig) -> Vec<String> {
    let text = if config.lowercase {
        text.to_lowercase()
    } else {
        text.to_string()
    };
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .filter(|t| !config.stopwords.contains(*t))
        .map(|t| {
            if config.stemming {
                porter::stem(t)
            } else {
                t.to_string()
            }
        })
        .collect()
}
