use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::assignment::max_weight_assignment;
use super::similarity::{levenshtein_ratio, similarity_matrix};
use crate::scalar::{mean, Scalar};
use crate::triple::Triple;

/// Greedy matching cutoff used during training-time scoring.
pub const DEFAULT_GREEDY_DEADLINE: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMethod {
    Exact,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "(usize, usize, T)", from = "(usize, usize, T)")]
#[serde(bound(serialize = "T: Serialize + Copy", deserialize = "T: Deserialize<'de> + Copy"))]
pub struct MatchedPair<T> {
    pub gold_index: usize,
    pub pred_index: usize,
    pub similarity: T,
}

impl<T> From<MatchedPair<T>> for (usize, usize, T) {
    fn from(p: MatchedPair<T>) -> Self {
        (p.gold_index, p.pred_index, p.similarity)
    }
}

impl<T> From<(usize, usize, T)> for MatchedPair<T> {
    fn from((gold_index, pred_index, similarity): (usize, usize, T)) -> Self {
        MatchedPair {
            gold_index,
            pred_index,
            similarity,
        }
    }
}

/// One-to-one alignment between gold and predicted triples.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching<T> {
    pub pairs: Vec<MatchedPair<T>>,
    pub gold_size: usize,
    pub pred_size: usize,
    pub method: MatchMethod,
    pub extrapolated: bool,
    /// Projected similarity of the capacity left unmatched at the deadline.
    pub extrapolated_mass: T,
}

impl<T: Scalar> Matching<T> {
    pub fn capacity(&self) -> usize {
        self.gold_size.min(self.pred_size)
    }

    /// Sum of matched similarities, excluding any extrapolated mass.
    pub fn observed_mass(&self) -> T {
        self.pairs
            .iter()
            .fold(T::zero(), |acc, p| acc + p.similarity)
    }

    pub fn total_mass(&self) -> T {
        self.observed_mass() + self.extrapolated_mass
    }
}

/// Optimal assignment over the full similarity matrix.
pub fn match_exact<T: Scalar>(gold: &[Triple], pred: &[Triple]) -> Matching<T> {
    let weights = similarity_matrix::<T>(gold, pred);
    let pairs = max_weight_assignment(&weights, pred.len())
        .into_iter()
        .map(|(g, p)| MatchedPair {
            gold_index: g,
            pred_index: p,
            similarity: weights[g][p],
        })
        .collect();
    Matching {
        pairs,
        gold_size: gold.len(),
        pred_size: pred.len(),
        method: MatchMethod::Exact,
        extrapolated: false,
        extrapolated_mass: T::zero(),
    }
}

/// Where a greedy run was when its stop check fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreedyPhase {
    Scoring,
    Selecting,
}

/// Greedy matching that stops once `deadline` has elapsed.
pub fn match_greedy<T: Scalar>(gold: &[Triple], pred: &[Triple], deadline: Duration) -> Matching<T> {
    let until = Instant::now() + deadline;
    match_greedy_with(gold, pred, |_| Instant::now() >= until)
}

/// Greedy matching with a caller-supplied stop check, polled before each
/// candidate is scored and before each candidate is considered for selection.
pub fn match_greedy_with<T: Scalar>(
    gold: &[Triple],
    pred: &[Triple],
    mut should_stop: impl FnMut(GreedyPhase) -> bool,
) -> Matching<T> {
    let pred_joined: Vec<String> = pred.iter().map(Triple::joined).collect();
    let mut candidates: Vec<(T, usize, usize)> = Vec::with_capacity(gold.len() * pred.len());
    let mut timed_out = false;
    'score: for (gi, g) in gold.iter().enumerate() {
        let gj = g.joined();
        for (pi, pj) in pred_joined.iter().enumerate() {
            if should_stop(GreedyPhase::Scoring) {
                timed_out = true;
                break 'score;
            }
            candidates.push((levenshtein_ratio(&gj, pj), gi, pi));
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let capacity = gold.len().min(pred.len());
    let mut gold_used = vec![false; gold.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut pairs = Vec::with_capacity(capacity);
    for (sim, gi, pi) in candidates {
        if pairs.len() == capacity {
            break;
        }
        // Once scoring was cut short, the already-scored candidates are still
        // selected so extrapolation has observed matches to project from.
        if !timed_out && should_stop(GreedyPhase::Selecting) {
            timed_out = true;
            break;
        }
        if gold_used[gi] || pred_used[pi] {
            continue;
        }
        gold_used[gi] = true;
        pred_used[pi] = true;
        pairs.push(MatchedPair {
            gold_index: gi,
            pred_index: pi,
            similarity: sim,
        });
    }

    let extrapolated = timed_out && pairs.len() < capacity;
    let extrapolated_mass = if extrapolated {
        let sims: Vec<T> = pairs.iter().map(|p| p.similarity).collect();
        extrapolate_mass(&sims, capacity)
    } else {
        T::zero()
    };
    Matching {
        pairs,
        gold_size: gold.len(),
        pred_size: pred.len(),
        method: MatchMethod::Greedy,
        extrapolated,
        extrapolated_mass,
    }
}

/// Mean observed similarity times the unmatched capacity; 0 with no observations.
pub fn extrapolate_mass<T: Scalar>(observed: &[T], capacity: usize) -> T {
    match mean(observed) {
        Some(m) if capacity > observed.len() => m * T::from_count(capacity - observed.len()),
        _ => T::zero(),
    }
}
