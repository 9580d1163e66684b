//! Sweep the number of reformulations on a world where 40% of them drift to
//! another topic, comparing the loop against RRF fusion.

use reformir::harness::{Experiment, ExperimentConfig, PipelineKind, ReformulationSource};
use reformir::sim::TopicWorld;

fn main() {
    let mut config = ExperimentConfig::default();
    config.world = Some(TopicWorld { drift_focus: 8, seed: 1, ..TopicWorld::default() });
    config.seed = 1;
    config.reformulations.source = ReformulationSource::Synthetic;
    config.reformulations.drift = 0.4;
    config.reformulations.count = 50;
    config.sweep.m = vec![3, 10, 25, 50];
    config.sweep.compare = vec![PipelineKind::RrfRerank];

    let sweep = Experiment::prepare(config).unwrap().sweep().unwrap();
    println!("{:>3} {:>9} {:>9}", "m", "reformir", "rrf");
    for m in [3, 10, 25, 50] {
        let get = |p| sweep.value(m, p, "Recall@100").unwrap();
        println!("{m:>3} {:>9.3} {:>9.3}", get("reformir"), get("rrf_rerank"));
    }
    sweep.write_csv(std::io::stdout(), None).unwrap();
}
