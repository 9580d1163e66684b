//! Reciprocal rank fusion and the four rerank baselines on one query.

use std::sync::Arc;

use reformir::prelude::*;

fn main() {
    let a = RankedList::from_scores("q", vec![("d1".into(), 3.0), ("d2".into(), 2.0), ("d3".into(), 1.0)]);
    let b = RankedList::from_scores("q", vec![("d3".into(), 9.0), ("d1".into(), 8.0)]);
    for e in &rrf_fuse(&[a, b], 60.0).entries {
        println!("fused {} {:.5}", e.doc_id, e.score);
    }

    let world = simulate_world(&TopicWorld { seed: 8, drift_focus: 8, ..TopicWorld::default() }).unwrap();
    let index = Index::build(world.docs.iter().cloned(), AnalyzerConfig::default(), Bm25Params::default()).unwrap();
    let qrels = Arc::new(world.qrels.clone());
    let q = &world.queries[1];
    let reforms = world.reformulate(&q.id, 10, 0.4, 8).unwrap();
    for kind in BaselineKind::ALL {
        let mut teacher = QrelsTeacher::new(qrels.clone(), 1);
        let result = run_baseline(&index, &q.text, &reforms, &mut teacher, &BaselineSpec::new(kind, 100));
        let recall = recall_at(&result.ranked_list(), &world.qrels, 100, 1).unwrap_or(0.0);
        println!("{:<14} Recall@100 {recall:.3}", kind.name());
    }
}
