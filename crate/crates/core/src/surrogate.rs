//! Linear surrogate `s(d; w) = wᵀx_d` fitted online to teacher scores.

use std::collections::HashSet;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{solve_ridge, SolveKind};
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum SurrogateError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("document `{0}` already has an observation")]
    DuplicateObservation(String),
    #[error("non-finite value in observation for `{0}`")]
    NonFinite(String),
}

/// Which observations a refit minimizes over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateScope {
    /// Every observation so far.
    #[default]
    Cumulative,
    /// Only the batch just scored.
    BatchOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub doc_id: String,
    pub x: Vec<f64>,
    pub y: f64,
    pub batch: usize,
}

/// `dim` independent standard-normal draws from a seeded stream.
pub fn init_weights(dim: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::derived(seed, "surrogate-init");
    (0..dim).map(|_| StandardNormal.sample(&mut r)).collect()
}

pub fn estimate_utility(w: &[f64], x: &[f64]) -> Result<f64, SurrogateError> {
    if w.len() != x.len() {
        return Err(SurrogateError::DimensionMismatch {
            expected: w.len(),
            got: x.len(),
        });
    }
    Ok(dot(w, x))
}

pub(crate) fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// ½ (y − wᵀx)².
pub fn estimation_error(w: &[f64], x: &[f64], y: f64) -> f64 {
    let r = y - dot(w, x);
    0.5 * r * r
}

#[derive(Clone, Debug)]
pub struct SurrogateModel {
    weights: Vec<f64>,
    observations: Vec<Observation>,
    ridge: f64,
    seed: u64,
    scope: UpdateScope,
    seen: HashSet<String>,
    last_solve: Option<SolveKind>,
}

impl SurrogateModel {
    pub fn new(dim: usize, ridge: f64, seed: u64) -> Self {
        assert!(dim >= 1, "surrogate needs at least one feature");
        assert!(ridge >= 0.0, "ridge must be non-negative");
        Self {
            weights: init_weights(dim, seed),
            observations: Vec::new(),
            ridge,
            seed,
            scope: UpdateScope::Cumulative,
            seen: HashSet::new(),
            last_solve: None,
        }
    }

    pub fn with_scope(mut self, scope: UpdateScope) -> Self {
        self.scope = scope;
        self
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), self.weights.len());
        self.weights = weights;
        self
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn last_solve(&self) -> Option<SolveKind> {
        self.last_solve
    }

    pub fn utility(&self, x: &[f64]) -> Result<f64, SurrogateError> {
        estimate_utility(&self.weights, x)
    }

    pub fn has_observed(&self, doc_id: &str) -> bool {
        self.seen.contains(doc_id)
    }

    /// Regularized squared loss over every accumulated observation.
    pub fn training_loss(&self, w: &[f64]) -> f64 {
        let data: f64 = self.observations.iter().map(|o| estimation_error(w, &o.x, o.y)).sum();
        data + 0.5 * self.ridge * dot(w, w)
    }

    /// Appends a batch of observations and refits. An empty batch leaves the
    /// weights unchanged. Rejects the whole batch if any observation is
    /// invalid or repeats a document.
    pub fn update(&mut self, batch: Vec<Observation>) -> Result<Option<SolveKind>, SurrogateError> {
        if batch.is_empty() {
            return Ok(None);
        }
        let mut fresh = HashSet::new();
        for o in &batch {
            if o.x.len() != self.dim() {
                return Err(SurrogateError::DimensionMismatch {
                    expected: self.dim(),
                    got: o.x.len(),
                });
            }
            if !o.y.is_finite() || o.x.iter().any(|v| !v.is_finite()) {
                return Err(SurrogateError::NonFinite(o.doc_id.clone()));
            }
            if self.seen.contains(&o.doc_id) || !fresh.insert(o.doc_id.as_str()) {
                return Err(SurrogateError::DuplicateObservation(o.doc_id.clone()));
            }
        }
        let start = self.observations.len();
        for o in batch {
            self.seen.insert(o.doc_id.clone());
            self.observations.push(o);
        }
        let fit_on = match self.scope {
            UpdateScope::Cumulative => &self.observations[..],
            UpdateScope::BatchOnly => &self.observations[start..],
        };
        let (w, kind) = fit(fit_on, self.dim(), self.ridge);
        self.weights = w;
        self.last_solve = Some(kind);
        if kind == SolveKind::PseudoInverse {
            log::debug!("surrogate normal equations singular; used minimum-norm solution");
        }
        Ok(Some(kind))
    }

    /// Recomputes the weights from the stored observations alone. Yields the
    /// same bits as the last cumulative update.
    pub fn refit(&self) -> Vec<f64> {
        fit(&self.observations, self.dim(), self.ridge).0
    }
}

/// argmin_w Σ ½(y − wᵀx)² + (λ/2)‖w‖² via the normal equations.
fn fit(observations: &[Observation], dim: usize, ridge: f64) -> (Vec<f64>, SolveKind) {
    let mut xtx = vec![0.0; dim * dim];
    let mut xty = vec![0.0; dim];
    for o in observations {
        for i in 0..dim {
            xty[i] += o.x[i] * o.y;
            for j in 0..dim {
                xtx[i * dim + j] += o.x[i] * o.x[j];
            }
        }
    }
    solve_ridge(&xtx, &xty, ridge)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(id: &str, x: &[f64], y: f64) -> Observation {
        Observation {
            doc_id: id.into(),
            x: x.to_vec(),
            y,
            batch: 0,
        }
    }

    #[test]
    fn init_is_seeded() {
        assert_eq!(init_weights(7, 3), init_weights(7, 3));
        assert_eq!(init_weights(7, 3).len(), 7);
        let (a, b) = (init_weights(7, 3), init_weights(7, 4));
        assert!(a.iter().zip(&b).any(|(x, y)| x != y));
    }

    #[test]
    fn utility_and_error() {
        assert_eq!(estimate_utility(&[0.0, 0.0], &[5.0, -1.0]).unwrap(), 0.0);
        assert_eq!(estimate_utility(&[2.0, 3.0], &[1.0, 1.0]).unwrap(), 5.0);
        assert_eq!(
            estimate_utility(&[1.0], &[1.0, 2.0]),
            Err(SurrogateError::DimensionMismatch { expected: 1, got: 2 })
        );
        assert_eq!(estimation_error(&[2.0, 3.0], &[1.0, 1.0], 5.0), 0.0);
        assert_eq!(estimation_error(&[0.0], &[1.0], 1.0), 0.5);
        assert_eq!(estimation_error(&[1.0], &[1.0], 0.0), estimation_error(&[0.0], &[1.0], 1.0));
    }

    #[test]
    fn hand_solved_update() {
        let mut m = SurrogateModel::new(2, 0.0, 1);
        let kind = m.update(vec![obs("a", &[1.0, 0.0], 2.0), obs("b", &[0.0, 1.0], 3.0)]).unwrap();
        assert_eq!(kind, Some(SolveKind::Cholesky));
        assert_eq!(m.weights(), [2.0, 3.0]);
    }

    #[test]
    fn empty_update_keeps_init() {
        let mut m = SurrogateModel::new(3, 1e-3, 11);
        let before = m.weights().to_vec();
        assert_eq!(m.update(Vec::new()).unwrap(), None);
        assert_eq!(m.weights(), before);
    }

    #[test]
    fn disposability() {
        let mut m = SurrogateModel::new(1, 1e-3, 0);
        m.update(vec![obs("a", &[1.0], 1.0)]).unwrap();
        assert_eq!(
            m.update(vec![obs("a", &[2.0], 0.0)]),
            Err(SurrogateError::DuplicateObservation("a".into()))
        );
        assert_eq!(
            m.update(vec![obs("b", &[2.0], 0.0), obs("b", &[1.0], 0.0)]),
            Err(SurrogateError::DuplicateObservation("b".into()))
        );
        // rejected batches leave no trace
        assert_eq!(m.observations().len(), 1);
    }

    #[test]
    fn singular_without_ridge_is_flagged() {
        let mut m = SurrogateModel::new(2, 0.0, 0);
        let kind = m.update(vec![obs("a", &[1.0, 1.0], 2.0)]).unwrap();
        assert_eq!(kind, Some(SolveKind::PseudoInverse));
        assert!((m.weights()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn batch_only_scope_forgets() {
        let mut m = SurrogateModel::new(1, 0.0, 0).with_scope(UpdateScope::BatchOnly);
        m.update(vec![obs("a", &[1.0], 10.0)]).unwrap();
        m.update(vec![obs("b", &[1.0], 2.0)]).unwrap();
        assert_eq!(m.weights(), [2.0]);
    }

    #[test]
    fn refit_is_bit_identical() {
        let mut m = SurrogateModel::new(3, 1e-3, 5);
        m.update(vec![obs("a", &[0.3, -1.2, 2.0], 0.4), obs("b", &[1.1, 0.2, -0.7], 0.9)])
            .unwrap();
        m.update(vec![obs("c", &[-0.5, 0.8, 0.1], 0.1)]).unwrap();
        let w: Vec<u64> = m.weights().iter().map(|v| v.to_bits()).collect();
        let r: Vec<u64> = m.refit().iter().map(|v| v.to_bits()).collect();
        assert_eq!(w, r);
    }
}
