//! Synthetic topic worlds for drift experiments.
//!
//! Each topic owns a vocabulary of pseudo-words; vocabularies are disjoint
//! after analysis, so a query from one topic never lexically matches a
//! document from another. Documents are bags of words sampled from their
//! topic with a Zipf-shaped distribution, queries sample distinct words from
//! one topic, and every document of the query's topic is judged relevant.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::Qrels;
use crate::reform::ReformulationSet;
use crate::rng;
use crate::text::{AnalyzerConfig, Document};

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("a topic world needs at least {needed} topics, got {got}")]
    TooFewTopics { needed: usize, got: usize },
    #[error("invalid world parameter: {0}")]
    Invalid(String),
    #[error("unknown query `{0}`")]
    UnknownQuery(String),
}

/// Parameters of a synthetic world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicWorld {
    pub topics: usize,
    pub vocab_per_topic: usize,
    pub docs_per_topic: usize,
    pub doc_len_min: usize,
    pub doc_len_max: usize,
    pub queries_per_topic: usize,
    pub query_len: usize,
    pub reformulation_len: usize,
    /// Skew of within-topic term sampling (0 = uniform).
    pub zipf_exponent: f64,
    /// Drifted reformulations draw uniformly from this many head words of
    /// the off-topic vocabulary, so they agree with each other the way a
    /// consistent misreading would. 0 samples the whole vocabulary.
    pub drift_focus: usize,
    pub seed: u64,
}

impl Default for TopicWorld {
    fn default() -> Self {
        Self {
            topics: 4,
            vocab_per_topic: 200,
            docs_per_topic: 150,
            doc_len_min: 8,
            doc_len_max: 24,
            queries_per_topic: 3,
            query_len: 3,
            reformulation_len: 4,
            zipf_exponent: 1.0,
            drift_focus: 0,
            seed: 0,
        }
    }
}

impl TopicWorld {
    pub fn validate(&self) -> Result<(), WorldError> {
        if self.topics < 2 {
            return Err(WorldError::TooFewTopics {
                needed: 2,
                got: self.topics,
            });
        }
        if self.vocab_per_topic == 0 || self.docs_per_topic == 0 {
            return Err(WorldError::Invalid("empty vocabulary or topic".into()));
        }
        if self.doc_len_min == 0 || self.doc_len_min > self.doc_len_max {
            return Err(WorldError::Invalid("document length range is empty".into()));
        }
        if self.query_len == 0 || self.query_len > self.vocab_per_topic {
            return Err(WorldError::Invalid("query length must be in 1..=vocab_per_topic".into()));
        }
        if self.reformulation_len == 0 || self.reformulation_len > self.vocab_per_topic {
            return Err(WorldError::Invalid(
                "reformulation length must be in 1..=vocab_per_topic".into(),
            ));
        }
        if self.drift_focus > self.vocab_per_topic
            || (self.drift_focus > 0 && self.drift_focus < self.reformulation_len)
        {
            return Err(WorldError::Invalid(
                "drift_focus must be 0 or in reformulation_len..=vocab_per_topic".into(),
            ));
        }
        if !(self.zipf_exponent >= 0.0 && self.zipf_exponent.is_finite()) {
            return Err(WorldError::Invalid("zipf exponent must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimQuery {
    pub id: String,
    pub text: String,
    pub topic: usize,
}

/// A generated world: corpus, queries, judgments and the topic vocabularies
/// used to produce reformulations on demand.
#[derive(Clone, Debug)]
pub struct SimulatedWorld {
    pub spec: TopicWorld,
    pub vocabularies: Vec<Vec<String>>,
    pub docs: Vec<Document>,
    pub doc_topics: Vec<usize>,
    pub queries: Vec<SimQuery>,
    pub qrels: Qrels,
    zipf_cdf: Vec<f64>,
}

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "gr", "kl", "pl", "st", "tr",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

fn pseudo_word(rng: &mut rng::Rng) -> String {
    let syllables = rng.random_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
        w.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
    }
    // a closing consonant keeps most words clear of suffix stripping
    w.push_str(["k", "n", "m", "x"][rng.random_range(0..4)]);
    w
}

fn zipf_cdf(n: usize, s: f64) -> Vec<f64> {
    let weights: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-s)).collect();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect()
}

fn sample_rank(cdf: &[f64], rng: &mut rng::Rng) -> usize {
    let u: f64 = rng.random();
    cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
}

impl SimulatedWorld {
    /// Draws `len` distinct words from a topic vocabulary.
    fn sample_distinct(&self, topic: usize, len: usize, rng: &mut rng::Rng) -> Vec<String> {
        let vocab = &self.vocabularies[topic];
        let mut picked: Vec<usize> = Vec::with_capacity(len);
        while picked.len() < len {
            let r = sample_rank(&self.zipf_cdf, rng);
            if !picked.contains(&r) {
                picked.push(r);
            }
        }
        picked.into_iter().map(|r| vocab[r].clone()).collect()
    }

    /// Draws `len` distinct words uniformly from the `focus` most frequent
    /// words of a topic.
    fn sample_head(&self, topic: usize, len: usize, focus: usize, rng: &mut rng::Rng) -> Vec<String> {
        let vocab = &self.vocabularies[topic];
        rand::seq::index::sample(rng, focus, len)
            .into_iter()
            .map(|r| vocab[r].clone())
            .collect()
    }

    pub fn query(&self, qid: &str) -> Option<&SimQuery> {
        self.queries.iter().find(|q| q.id == qid)
    }

    /// The topic that drifted reformulations of `query` draw from, chosen
    /// from the seed among the other topics.
    pub fn drift_topic(&self, query_topic: usize, seed: u64, qid: &str) -> usize {
        let mut r = rng::derived(seed, &format!("drift-topic/{qid}"));
        let offset = r.random_range(1..self.vocabularies.len());
        (query_topic + offset) % self.vocabularies.len()
    }

    /// `n` reformulations of which ⌈(1−δ)·n⌉ stay on the query's topic. Drifted
    /// positions are spread evenly, so every prefix of length m carries
    /// ⌊m·δ⌋ drifted entries.
    pub fn reformulate(&self, qid: &str, n: usize, drift: f64, seed: u64) -> Result<ReformulationSet, WorldError> {
        let q = self.query(qid).ok_or_else(|| WorldError::UnknownQuery(qid.to_string()))?;
        reformulate_synthetic(self, q, n, drift, seed)
    }
}

/// Positions `i` (0-based) that carry a drifted reformulation.
pub fn is_drifted(i: usize, drift: f64) -> bool {
    let eps = 1e-9;
    ((i + 1) as f64 * drift + eps).floor() > (i as f64 * drift + eps).floor()
}

pub fn reformulate_synthetic(
    world: &SimulatedWorld,
    query: &SimQuery,
    n: usize,
    drift: f64,
    seed: u64,
) -> Result<ReformulationSet, WorldError> {
    if !(0.0..=1.0).contains(&drift) {
        return Err(WorldError::Invalid(format!("drift fraction {drift} outside [0, 1]")));
    }
    if drift > 0.0 && world.vocabularies.len() < 2 {
        return Err(WorldError::TooFewTopics {
            needed: 2,
            got: world.vocabularies.len(),
        });
    }
    let off_topic = if world.vocabularies.len() >= 2 {
        world.drift_topic(query.topic, seed, &query.id)
    } else {
        query.topic
    };
    let mut r = rng::derived(seed, &format!("reformulate/{}", query.id));
    let original = crate::reform::normalize_query(&query.text);
    let mut seen: HashSet<String> = HashSet::new();
    seen.insert(original.clone());
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let topic = if is_drifted(i, drift) { off_topic } else { query.topic };
        // bounded retries; vocabularies are far larger than any realistic n
        let mut text = String::new();
        for _ in 0..64 {
            let focus = world.spec.drift_focus;
            text = if topic != query.topic && focus > 0 {
                world.sample_head(topic, world.spec.reformulation_len, focus, &mut r)
            } else {
                world.sample_distinct(topic, world.spec.reformulation_len, &mut r)
            }
            .join(" ");
            if !seen.contains(&text) {
                break;
            }
        }
        seen.insert(text.clone());
        out.push(text);
    }
    Ok(ReformulationSet::new(query.id.clone(), query.text.clone(), out, "synthetic"))
}

pub fn simulate_world(spec: &TopicWorld) -> Result<SimulatedWorld, WorldError> {
    spec.validate()?;
    let analyzer = AnalyzerConfig::default();
    let mut r = rng::derived(spec.seed, "vocabulary");

    let mut used_terms: HashSet<String> = HashSet::new();
    let mut vocabularies = Vec::with_capacity(spec.topics);
    for _ in 0..spec.topics {
        let mut vocab = Vec::with_capacity(spec.vocab_per_topic);
        let mut attempts = 0usize;
        while vocab.len() < spec.vocab_per_topic {
            attempts += 1;
            if attempts > spec.vocab_per_topic * 1000 {
                return Err(WorldError::Invalid("could not generate enough distinct words".into()));
            }
            let w = pseudo_word(&mut r);
            let analyzed = analyzer.tokenize(&w);
            if analyzed.len() != 1 || !used_terms.insert(analyzed[0].clone()) {
                continue;
            }
            vocab.push(w);
        }
        vocabularies.push(vocab);
    }

    let mut world = SimulatedWorld {
        spec: spec.clone(),
        vocabularies,
        docs: Vec::new(),
        doc_topics: Vec::new(),
        queries: Vec::new(),
        qrels: Qrels::new(),
        zipf_cdf: zipf_cdf(spec.vocab_per_topic, spec.zipf_exponent),
    };

    let total_docs = spec.topics * spec.docs_per_topic;
    let width = total_docs.to_string().len().max(4);
    // ids are a random permutation so id order carries no topic signal
    let mut ids: Vec<usize> = (0..total_docs).collect();
    ids.shuffle(&mut rng::derived(spec.seed, "doc-ids"));
    let mut r = rng::derived(spec.seed, "documents");
    let mut generated = Vec::with_capacity(total_docs);
    for topic in 0..spec.topics {
        for j in 0..spec.docs_per_topic {
            let n = ids[topic * spec.docs_per_topic + j];
            let len = r.random_range(spec.doc_len_min..=spec.doc_len_max);
            let words: Vec<&str> = (0..len)
                .map(|_| world.vocabularies[topic][sample_rank(&world.zipf_cdf, &mut r)].as_str())
                .collect();
            generated.push((n, Document::new(format!("d{n:0width$}"), words.join(" ")), topic));
        }
    }
    generated.sort_by_key(|g| g.0);
    for (_, doc, topic) in generated {
        world.docs.push(doc);
        world.doc_topics.push(topic);
    }

    let mut r = rng::derived(spec.seed, "queries");
    let qwidth = (spec.topics * spec.queries_per_topic).to_string().len().max(3);
    let mut texts: BTreeSet<String> = BTreeSet::new();
    let mut n = 0;
    for topic in 0..spec.topics {
        for _ in 0..spec.queries_per_topic {
            let mut text;
            loop {
                text = world.sample_distinct(topic, spec.query_len, &mut r).join(" ");
                if texts.insert(text.clone()) {
                    break;
                }
            }
            let id = format!("q{n:0qwidth$}");
            n += 1;
            world.queries.push(SimQuery { id, text, topic });
        }
    }

    let mut qrels = Qrels::new();
    for q in &world.queries {
        for (doc, &t) in world.docs.iter().zip(&world.doc_topics) {
            if t == q.topic {
                qrels.insert(&q.id, &doc.id, 1).expect("fresh judgments");
            }
        }
    }
    world.qrels = qrels;
    Ok(world)
}
