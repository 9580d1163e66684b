//! Pseudo-relevance feedback: build a relevance model from the top documents
//! of a first-pass ranking and interpolate it with the original query.

use reformir::prelude::*;

fn main() {
    let index = Index::build(
        [
            Document::new("d1", "jaguar speed cat predator jungle"),
            Document::new("d2", "jaguar cat habitat rainforest predator"),
            Document::new("d3", "jaguar car engine luxury sedan"),
            Document::new("d4", "big cat conservation in the rainforest"),
        ],
        AnalyzerConfig::default(),
        Bm25Params::default(),
    )
    .unwrap();
    let params = Rm3Params::default();
    let terms = index.analyzer().tokenize("jaguar predator");
    let first_pass = index.search_terms("q", &terms, params.fb_docs);
    let feedback = FeedbackSet::new(first_pass.entries.iter().map(|e| (e.doc_id.clone(), e.score)).collect()).unwrap();
    let model = relevance_model(&index, &feedback, params.fb_terms).unwrap();
    let expanded = rm3_expand(&WeightedQuery::from_terms(&terms), &model, params.original_query_weight);

    println!("expanded query:");
    for (term, w) in expanded.iter() {
        println!("  {term:<14} {w:.4}");
    }
    for e in &index.search_weighted("q", expanded.iter(), 4).entries {
        println!("{} {:.4}", e.doc_id, e.score);
    }
}
