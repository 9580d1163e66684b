//! Lexical layer: analysis, the inverted index, BM25, and corpus ingestion.

pub mod analyzer;
pub mod corpus;
pub mod index;
pub mod porter;

pub use analyzer::{english_stopwords, load_stopwords, tokenize, AnalyzerConfig};
pub use corpus::{load_corpus, read_corpus, write_corpus_tsv, CorpusError, CorpusFormat};
pub use index::{Bm25Params, Document, Index, IndexError, Posting, RankedEntry, RankedList};
