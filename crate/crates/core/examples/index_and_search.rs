//! Build a BM25 index over a handful of documents, search it, and save it.

use reformir::prelude::*;

fn main() {
    let docs = [
        ("d1", "Solar panels convert sunlight into electricity."),
        ("d2", "Wind turbines generate power from moving air."),
        ("d3", "Panel efficiency of photovoltaic solar cells keeps improving."),
        ("d4", "Hydroelectric dams store energy in reservoirs."),
    ];
    let index = Index::build(
        docs.iter().map(|(id, text)| Document::new(*id, *text)),
        AnalyzerConfig::default(),
        Bm25Params::default(),
    )
    .expect("index builds");
    println!("{} docs, {} terms, avgdl {:.2}", index.doc_count(), index.vocabulary_size(), index.avg_doc_length());

    for entry in &index.search("q1", "solar panel efficiency", 10).entries {
        println!("{:>2}  {:<3} {:.4}", entry.rank, entry.doc_id, entry.score);
    }

    let path = std::env::temp_dir().join("reformir-example.idx");
    index.save(&path).expect("index saves");
    let reloaded = Index::load(&path).expect("index loads");
    println!("reloaded {} docs from {}", reloaded.doc_count(), path.display());
}
