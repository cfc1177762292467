use serde::{Deserialize, Serialize};

use super::matching::{MatchMethod, Matching};
use super::MetricsError;
use crate::gateway::parse::parse_binary;
use crate::scalar::{mean, Scalar};
use crate::triple::Triple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Fuzzy,
    Lm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfScores<T> {
    #[serde(rename = "p")]
    pub precision: T,
    #[serde(rename = "r")]
    pub recall: T,
    pub f1: T,
    #[serde(skip_serializing, default = "default_kind")]
    pub kind: ScoreKind,
}

fn default_kind() -> ScoreKind {
    ScoreKind::Fuzzy
}

impl<T: Scalar> PrfScores<T> {
    pub fn from_pr(precision: T, recall: T, kind: ScoreKind) -> Self {
        PrfScores {
            precision,
            recall,
            f1: harmonic_f1(precision, recall),
            kind,
        }
    }

    pub fn zero(kind: ScoreKind) -> Self {
        Self::from_pr(T::zero(), T::zero(), kind)
    }
}

/// `2PR / (P + R)`, 0 when both are 0.
pub fn harmonic_f1<T: Scalar>(precision: T, recall: T) -> T {
    let sum = precision + recall;
    if sum <= T::zero() {
        return T::zero();
    }
    (T::one() + T::one()) * precision * recall / sum
}

fn safe_div<T: Scalar>(num: T, den: usize) -> T {
    if den == 0 {
        T::zero()
    } else {
        num / T::from_count(den)
    }
}

/// Similarity-weighted precision, recall and F1 of a matching.
pub fn fuzzy_prf<T: Scalar>(m: &Matching<T>) -> PrfScores<T> {
    let mass = m.total_mass();
    PrfScores::from_pr(
        safe_div(mass, m.pred_size),
        safe_div(mass, m.gold_size),
        ScoreKind::Fuzzy,
    )
}

/// Something that can be asked whether two triples say the same thing. The
/// raw answer is parsed by [`lm_prf`].
pub trait TripleJudge: Sync {
    fn respond(&self, gold: &Triple, pred: &Triple) -> Result<String, JudgeUnavailable>;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("judge unavailable: {0}")]
pub struct JudgeUnavailable(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    #[serde(rename = "match")]
    pub matched: bool,
    pub raw_response: String,
}

impl JudgeVerdict {
    /// Leading "yes" matches, leading "no" does not, case-insensitively.
    pub fn parse(raw: &str) -> Result<JudgeVerdict, MetricsError> {
        parse_binary(raw, "yes", "no")
            .map(|matched| JudgeVerdict {
                matched,
                raw_response: raw.to_string(),
            })
            .map_err(|_| MetricsError::JudgeResponseUnparseable(raw.to_string()))
    }
}

/// Per-pair outcome of an LM-judged matching.
#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome<T> {
    pub scores: PrfScores<T>,
    /// One entry per matched pair, in matching order; `None` when the
    /// response could not be parsed (counted as no match).
    pub verdicts: Vec<Option<JudgeVerdict>>,
}

impl<T> LmOutcome<T> {
    pub fn unparseable(&self) -> usize {
        self.verdicts.iter().filter(|v| v.is_none()).count()
    }
}

/// Default bound on concurrent judge calls.
pub const DEFAULT_JUDGE_CONCURRENCY: usize = 8;

/// Judges every matched pair once and derives LM precision/recall/F1.
pub fn lm_prf<T: Scalar>(
    m: &Matching<T>,
    gold: &[Triple],
    pred: &[Triple],
    judge: &dyn TripleJudge,
    concurrency: usize,
) -> Result<LmOutcome<T>, MetricsError> {
    if m.method != MatchMethod::Exact {
        return Err(MetricsError::RequiresExactMatching);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency.max(1))
        .build()
        .map_err(|e| MetricsError::JudgeUnavailable(e.to_string()))?;
    let responses: Vec<Result<String, JudgeUnavailable>> = pool.install(|| {
        use rayon::prelude::*;
        m.pairs
            .par_iter()
            .map(|p| judge.respond(&gold[p.gold_index], &pred[p.pred_index]))
            .collect()
    });
    let mut verdicts = Vec::with_capacity(responses.len());
    let mut hits = 0usize;
    for resp in responses {
        let raw = resp.map_err(|e| MetricsError::JudgeUnavailable(e.0))?;
        match JudgeVerdict::parse(&raw) {
            Ok(v) => {
                hits += usize::from(v.matched);
                verdicts.push(Some(v));
            }
            Err(_) => {
                log::warn!("unparseable judge response counted as no match: {raw:?}");
                verdicts.push(None);
            }
        }
    }
    let hits = T::from_count(hits);
    Ok(LmOutcome {
        scores: PrfScores::from_pr(
            safe_div(hits, m.pred_size),
            safe_div(hits, m.gold_size),
            ScoreKind::Lm,
        ),
        verdicts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroAggregate<T> {
    pub mean_precision: T,
    pub mean_recall: T,
    /// Mean of per-example F1.
    pub macro_f1: T,
    /// Harmonic mean of the mean precision and mean recall.
    pub harmonic_f1: T,
    pub count: usize,
}

pub fn macro_aggregate<T: Scalar>(per_example: &[PrfScores<T>]) -> Result<MacroAggregate<T>, MetricsError> {
    let col = |f: fn(&PrfScores<T>) -> T| -> Vec<T> { per_example.iter().map(f).collect() };
    let mean_precision = mean(&col(|s| s.precision)).ok_or(MetricsError::EmptyInput)?;
    let mean_recall = mean(&col(|s| s.recall)).ok_or(MetricsError::EmptyInput)?;
    let macro_f1 = mean(&col(|s| s.f1)).ok_or(MetricsError::EmptyInput)?;
    Ok(MacroAggregate {
        mean_precision,
        mean_recall,
        macro_f1,
        harmonic_f1: harmonic_f1(mean_precision, mean_recall),
        count: per_example.len(),
    })
}
