//! Teacher rerankers. A teacher scores documents against the original query
//! and returns one score in [0, 1] per document.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::Qrels;
use crate::rng;

#[derive(Debug, Error)]
pub enum TeacherError {
    #[error("teacher transport error: {0}")]
    Transport(String),
    #[error("teacher endpoint returned status {0}")]
    Status(u16),
    #[error("malformed teacher response: {0}")]
    Parse(String),
    #[error("teacher returned {got} scores for {expected} documents")]
    CountMismatch { expected: usize, got: usize },
    #[error("teacher dimension mismatch: expected {expected} features, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("teacher configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A candidate handed to the teacher. `features` is the document's current
/// feature row; only simulated teachers look at it.
#[derive(Clone, Copy, Debug)]
pub struct TeacherDoc<'a> {
    pub id: &'a str,
    pub text: &'a str,
    pub features: &'a [f64],
}

#[derive(Clone, Debug)]
pub struct TeacherRequest<'a> {
    pub query_id: &'a str,
    /// Always the original query text.
    pub query: &'a str,
    pub docs: Vec<TeacherDoc<'a>>,
}

pub trait Teacher: Send {
    fn score(&mut self, request: &TeacherRequest<'_>) -> Result<Vec<f64>, TeacherError>;
}

impl<T: Teacher + ?Sized> Teacher for Box<T> {
    fn score(&mut self, request: &TeacherRequest<'_>) -> Result<Vec<f64>, TeacherError> {
        (**self).score(request)
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSemantics {
    Probability,
    Raw,
}

#[derive(Serialize)]
struct HttpDoc<'a> {
    id: &'a str,
    text: &'a str,
}

#[derive(Serialize)]
struct HttpRequest<'a> {
    query: &'a str,
    documents: Vec<HttpDoc<'a>>,
}

#[derive(Deserialize)]
struct HttpResponse {
    scores: Vec<f64>,
    score_semantics: ScoreSemantics,
}

/// Parses a teacher response body and maps scores into [0, 1].
pub fn parse_teacher_response(body: &str, expected: usize) -> Result<Vec<f64>, TeacherError> {
    let resp: HttpResponse = serde_json::from_str(body).map_err(|e| TeacherError::Parse(e.to_string()))?;
    if resp.scores.len() != expected {
        return Err(TeacherError::CountMismatch {
            expected,
            got: resp.scores.len(),
        });
    }
    if let Some(i) = resp.scores.iter().position(|s| !s.is_finite()) {
        return Err(TeacherError::Parse(format!("field `scores[{i}]` is not finite")));
    }
    Ok(resp
        .scores
        .into_iter()
        .map(|s| match resp.score_semantics {
            ScoreSemantics::Probability => s.clamp(0.0, 1.0),
            ScoreSemantics::Raw => logistic(s),
        })
        .collect())
}

/// Cross-encoder service client: one POST per batch carrying the query and
/// the document texts.
pub struct HttpTeacher {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpTeacher {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            agent,
        }
    }
}

impl Teacher for HttpTeacher {
    fn score(&mut self, request: &TeacherRequest<'_>) -> Result<Vec<f64>, TeacherError> {
        if request.docs.is_empty() {
            return Ok(Vec::new());
        }
        let body = HttpRequest {
            query: request.query,
            documents: request.docs.iter().map(|d| HttpDoc { id: d.id, text: d.text }).collect(),
        };
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(&body)
            .map_err(|e| TeacherError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(TeacherError::Status(status));
        }
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TeacherError::Transport(e.to_string()))?;
        parse_teacher_response(&text, request.docs.len())
    }
}

/// y = w*ᵀx + ε with ε ~ N(0, σ²), clamped to [0, 1] unless `clamp` is off.
pub struct LinearTeacher {
    weights: Vec<f64>,
    noise: Option<Normal<f64>>,
    rng: rng::Rng,
    clamp: bool,
}

impl LinearTeacher {
    pub fn new(weights: Vec<f64>, noise_std: f64, seed: u64) -> Self {
        assert!(noise_std >= 0.0 && noise_std.is_finite());
        Self {
            weights,
            noise: (noise_std > 0.0).then(|| Normal::new(0.0, noise_std).expect("valid std")),
            rng: rng::derived(seed, "linear-teacher"),
            clamp: true,
        }
    }

    /// Disables the [0, 1] clamp so rewards stay exactly linear. Used for
    /// realizability checks where the [0, 1] contract is not needed.
    pub fn unclamped(mut self) -> Self {
        self.clamp = false;
        self
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn score_rows<'a>(&mut self, rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Vec<f64>, TeacherError> {
        rows.into_iter()
            .map(|x| {
                if x.len() != self.weights.len() {
                    return Err(TeacherError::Dimension {
                        expected: self.weights.len(),
                        got: x.len(),
                    });
                }
                let mut y = crate::surrogate::dot(&self.weights, x);
                if let Some(n) = &self.noise {
                    y += n.sample(&mut self.rng);
                }
                Ok(if self.clamp { y.clamp(0.0, 1.0) } else { y })
            })
            .collect()
    }
}

impl Teacher for LinearTeacher {
    fn score(&mut self, request: &TeacherRequest<'_>) -> Result<Vec<f64>, TeacherError> {
        self.score_rows(request.docs.iter().map(|d| d.features))
    }
}

/// Relevance judgments as an idealized teacher: grade / max_grade, 0 when
/// unjudged, optionally perturbed by clamped Gaussian noise.
pub struct QrelsTeacher {
    qrels: Arc<Qrels>,
    max_grade: u32,
    noise: Option<Normal<f64>>,
    rng: rng::Rng,
}

impl QrelsTeacher {
    pub fn new(qrels: Arc<Qrels>, max_grade: u32) -> Self {
        assert!(max_grade > 0, "max grade must be positive");
        Self {
            qrels,
            max_grade,
            noise: None,
            rng: rng::seeded(0),
        }
    }

    pub fn with_noise(mut self, std: f64, seed: u64) -> Self {
        self.noise = (std > 0.0).then(|| Normal::new(0.0, std).expect("valid std"));
        self.rng = rng::derived(seed, "qrels-teacher");
        self
    }
}

impl Teacher for QrelsTeacher {
    fn score(&mut self, request: &TeacherRequest<'_>) -> Result<Vec<f64>, TeacherError> {
        Ok(request
            .docs
            .iter()
            .map(|d| {
                let g = self.qrels.grade(request.query_id, d.id).unwrap_or(0);
                let y = f64::from(g.min(self.max_grade)) / f64::from(self.max_grade);
                match &self.noise {
                    Some(n) => (y + n.sample(&mut self.rng)).clamp(0.0, 1.0),
                    None => y,
                }
            })
            .collect())
    }
}

/// Precomputed scores read from `qid<TAB>docid<TAB>score` lines; unknown
/// pairs score 0.
#[derive(Clone, Debug, Default)]
pub struct FileTeacher {
    scores: Arc<HashMap<(String, String), f64>>,
}

impl FileTeacher {
    pub fn read<R: BufRead>(reader: R) -> Result<Self, TeacherError> {
        let mut scores = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || TeacherError::Parse(format!("line {}: expected `qid docid score`", i + 1));
            if f.len() != 3 {
                return Err(bad());
            }
            let s: f64 = f[2].parse().map_err(|_| bad())?;
            if !(0.0..=1.0).contains(&s) {
                return Err(TeacherError::Parse(format!("line {}: score {s} outside [0, 1]", i + 1)));
            }
            scores.insert((f[0].to_string(), f[1].to_string()), s);
        }
        Ok(Self {
            scores: Arc::new(scores),
        })
    }

    pub fn load(path: &Path) -> Result<Self, TeacherError> {
        let f = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(f))
    }
}

impl Teacher for FileTeacher {
    fn score(&mut self, request: &TeacherRequest<'_>) -> Result<Vec<f64>, TeacherError> {
        Ok(request
            .docs
            .iter()
            .map(|d| {
                self.scores
                    .get(&(request.query_id.to_string(), d.id.to_string()))
                    .copied()
                    .unwrap_or(0.0)
            })
            .collect())
    }
}

/// One observed teacher invocation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TeacherCall {
    pub query_id: String,
    pub query: String,
    pub doc_ids: Vec<String>,
}

/// Wraps a teacher and records every call it receives.
pub struct RecordingTeacher<T> {
    inner: T,
    log: Arc<Mutex<Vec<TeacherCall>>>,
}

impl<T> RecordingTeacher<T> {
    pub fn new(inner: T) -> Self {
        Self {
            inner,
            log: Arc::default(),
        }
    }

    /// Shared handle to the call log; stays valid after the teacher is moved.
    pub fn log(&self) -> Arc<Mutex<Vec<TeacherCall>>> {
        Arc::clone(&self.log)
    }

    pub fn calls(&self) -> Vec<TeacherCall> {
        self.log.lock().expect("poisoned log").clone()
    }

    /// Total number of documents scored.
    pub fn scored_docs(&self) -> usize {
        self.calls().iter().map(|c| c.doc_ids.len()).sum()
    }
}

impl<T: Teacher> Teacher for RecordingTeacher<T> {
    fn score(&mut self, request: &TeacherRequest<'_>) -> Result<Vec<f64>, TeacherError> {
        self.log.lock().expect("poisoned log").push(TeacherCall {
            query_id: request.query_id.to_string(),
            query: request.query.to_string(),
            doc_ids: request.docs.iter().map(|d| d.id.to_string()).collect(),
        });
        self.inner.score(request)
    }
}

/// Adds a fixed per-document latency, standing in for model inference time.
pub struct DelayedTeacher<T> {
    inner: T,
    per_doc: Duration,
}

impl<T> DelayedTeacher<T> {
    pub fn new(inner: T, per_doc: Duration) -> Self {
        Self { inner, per_doc }
    }
}

impl<T: Teacher> Teacher for DelayedTeacher<T> {
    fn score(&mut self, request: &TeacherRequest<'_>) -> Result<Vec<f64>, TeacherError> {
        std::thread::sleep(self.per_doc * request.docs.len() as u32);
        self.inner.score(request)
    }
}
