//! The budgeted loop on a synthetic world: a qrels-backed teacher scores
//! batches chosen by the linear surrogate, and the trace shows how the
//! surrogate's error falls as feedback accumulates.

use std::sync::Arc;

use reformir::prelude::*;

fn main() {
    let world = simulate_world(&TopicWorld { seed: 3, ..TopicWorld::default() }).unwrap();
    let index = Index::build(world.docs.iter().cloned(), AnalyzerConfig::default(), Bm25Params::default()).unwrap();
    let query = &world.queries[0];
    let reforms = world.reformulate(&query.id, 5, 0.4, 3).unwrap();
    println!("query {}: {:?}", query.id, query.text);
    for r in reforms.reformulations() {
        println!("  reformulation: {r}");
    }

    let mut teacher = QrelsTeacher::new(Arc::new(world.qrels.clone()), 1);
    let config = LoopConfig { budget: 64, ..LoopConfig::default() };
    let result = run_reformir(&index, &query.text, &reforms, &mut teacher, &config);

    println!("pool {} docs, {} teacher calls", result.pool_size, result.teacher_evaluations());
    for t in &result.trace {
        let hits = t.selected.iter().filter(|d| world.qrels.grade(&query.id, d).unwrap_or(0) > 0).count();
        println!("batch {} size {:>2} relevant {:>2} error {:.4}", t.batch, t.selected.len(), hits, t.mean_error.unwrap_or(f64::NAN));
    }
    for (label, w) in result.feature_labels.iter().zip(&result.weights) {
        println!("w[{label}] = {w:+.3}");
    }
}
