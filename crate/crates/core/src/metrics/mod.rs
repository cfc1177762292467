//! Triple scoring: fuzzy similarity, optimal and greedy matching,
//! fuzzy and LM-judged precision/recall/F1, macro aggregation.

mod assignment;
pub mod matching;
pub mod prf;
pub mod similarity;

use thiserror::Error;

pub use assignment::max_weight_assignment;
pub use matching::{
    extrapolate_mass, match_exact, match_greedy, match_greedy_with, GreedyPhase, MatchMethod,
    MatchedPair, Matching, DEFAULT_GREEDY_DEADLINE,
};
pub use prf::{
    fuzzy_prf, harmonic_f1, lm_prf, macro_aggregate, JudgeUnavailable, JudgeVerdict, LmOutcome,
    MacroAggregate, PrfScores, ScoreKind, TripleJudge, DEFAULT_JUDGE_CONCURRENCY,
};
pub use similarity::{fuzzy_similarity, levenshtein_ratio, similarity_matrix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("empty input")]
    EmptyInput,
    #[error("LM metrics require an exact matching")]
    RequiresExactMatching,
    #[error("judge unavailable: {0}")]
    JudgeUnavailable(String),
    #[error("unparseable judge response: {0:?}")]
    JudgeResponseUnparseable(String),
}
