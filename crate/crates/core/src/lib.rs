//! Budget-aware multi-reformulation retrieval.
//!
//! A query and its reformulations each retrieve a BM25 ranking; the union of
//! those rankings forms a candidate pool. Every pool document gets a feature
//! vector holding its BM25 score under each reformulation, under the original
//! query, and under an RM3-expanded query. A linear surrogate over those
//! features decides which documents an expensive teacher reranker scores
//! next, and is refitted on the teacher's feedback after every batch, so
//! reformulations that pull in off-topic documents lose weight early.
//!
//! ```no_run
//! use reformir::prelude::*;
//!
//! let index = Index::build(
//!     [Document::new("d1", "solar panel efficiency"), Document::new("d2", "wind turbine noise")],
//!     AnalyzerConfig::default(),
//!     Bm25Params::default(),
//! ).unwrap();
//! let reforms = ReformulationSet::new("q1", "solar power", ["photovoltaic panel output".to_string()], "manual");
//! let mut teacher = reformir::teacher::FileTeacher::read("q1 d1 0.9\n".as_bytes()).unwrap();
//! let result = run_reformir(&index, "solar power", &reforms, &mut teacher, &LoopConfig::default());
//! println!("{:?}", result.ranking);
//! ```

pub mod baselines;
pub mod eval;
pub mod harness;
pub mod linalg;
pub mod pool;
pub mod prf;
pub mod reform;
pub mod reformir;
pub mod rng;
pub mod sim;
pub mod surrogate;
pub mod teacher;
pub mod text;

pub mod prelude {
    pub use crate::baselines::{rrf_fuse, run_baseline, BaselineKind, BaselineSpec};
    pub use crate::eval::{ndcg_at, paired_ttest, recall_at, Qrels};
    pub use crate::pool::{build_pool, feature_matrix, standardize, CandidatePool, FeatureMatrix};
    pub use crate::prf::{relevance_model, rm3_expand, FeedbackSet, Rm3Params, WeightedQuery};
    pub use crate::reform::ReformulationSet;
    pub use crate::reformir::{optimize, run_reformir, select_batch, LoopConfig, LoopInputs, RunResult};
    pub use crate::sim::{simulate_world, SimulatedWorld, TopicWorld};
    pub use crate::surrogate::SurrogateModel;
    pub use crate::teacher::{LinearTeacher, QrelsTeacher, RecordingTeacher, Teacher};
    pub use crate::text::{AnalyzerConfig, Bm25Params, Document, Index, RankedList};
}
