//! Group rewards for extraction scripts and the All/Example/Holdout
//! evaluation aggregates.
//!
//! A script generated from anchor page `p` is scored on every page `q` of its
//! group, giving `r(p→q)`. The training reward is the group mean of those
//! scores (or only the self score, for the ablation), and evaluation splits
//! the same mean into the anchor's own score and the mean over the rest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{fuzzy_prf, harmonic_f1, match_exact, match_greedy, PrfScores};
use crate::scalar::{mean, Scalar};
use crate::triple::Triple;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewardError {
    #[error("invalid group scores: {0}")]
    InvalidGroup(String),
    #[error("empty input")]
    EmptyInput,
    #[error("domain error: {0}")]
    Domain(String),
}

/// Which matcher backs [`score_pair`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Greedy matching under a deadline.
    Train,
    /// Optimal matching.
    Eval,
}

/// Fuzzy F1 of `pred` against `gold`.
pub fn score_pair<T: Scalar>(pred: &[Triple], gold: &[Triple], mode: ScoreMode, deadline: Duration) -> T {
    let m = match mode {
        ScoreMode::Train => match_greedy(gold, pred, deadline),
        ScoreMode::Eval => match_exact(gold, pred),
    };
    fuzzy_prf(&m).f1
}

/// Scores `r(p→q)` of one anchor's script over its group, keyed by page id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGroupScores<T>", bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct GroupScores<T> {
    pub anchor: String,
    pub scores: BTreeMap<String, T>,
}

#[derive(Deserialize)]
struct RawGroupScores<T> {
    anchor: String,
    scores: BTreeMap<String, T>,
}

impl<T: Scalar> TryFrom<RawGroupScores<T>> for GroupScores<T> {
    type Error = RewardError;

    fn try_from(raw: RawGroupScores<T>) -> Result<Self, Self::Error> {
        GroupScores::new(raw.anchor, raw.scores)
    }
}

impl<T: Scalar> GroupScores<T> {
    /// Checks that the anchor is scored and every score lies in `[0, 1]`.
    pub fn new(anchor: impl Into<String>, scores: BTreeMap<String, T>) -> Result<Self, RewardError> {
        let anchor = anchor.into();
        if !scores.contains_key(&anchor) {
            return Err(RewardError::InvalidGroup(format!("anchor {anchor} has no score")));
        }
        if let Some((q, v)) = scores.iter().find(|(_, v)| !(**v >= T::zero() && **v <= T::one())) {
            return Err(RewardError::InvalidGroup(format!("score for {q} outside [0, 1]: {v:?}")));
        }
        Ok(GroupScores { anchor, scores })
    }

    pub fn group_size(&self) -> usize {
        self.scores.len()
    }

    pub fn self_score(&self) -> T {
        self.scores[&self.anchor]
    }

    pub fn cross_scores(&self) -> Vec<T> {
        self.scores
            .iter()
            .filter(|(q, _)| **q != self.anchor)
            .map(|(_, v)| *v)
            .collect()
    }

    fn group_mean(&self) -> T {
        mean(&self.scores.values().copied().collect::<Vec<_>>()).expect("anchor is always scored")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardFormula {
    /// Mean over the whole group, self score included.
    Scribes,
    /// The anchor's own score only.
    SelfOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown<T> {
    #[serde(rename = "self")]
    pub self_score: T,
    /// Mean over non-anchor pages; 0 for a singleton group.
    pub cross_mean: T,
    pub total: T,
    pub formula: RewardFormula,
}

fn breakdown<T: Scalar>(gs: &GroupScores<T>, total: T, formula: RewardFormula) -> RewardBreakdown<T> {
    RewardBreakdown {
        self_score: gs.self_score(),
        cross_mean: mean(&gs.cross_scores()).unwrap_or_else(T::zero),
        total,
        formula,
    }
}

/// `total = (1/|G|) Σ_q r(p→q)`, which equals
/// `self/|G| + ((|G|-1)/|G|) · cross_mean`.
pub fn scribes_reward<T: Scalar>(gs: &GroupScores<T>) -> RewardBreakdown<T> {
    breakdown(gs, gs.group_mean(), RewardFormula::Scribes)
}

/// `total = r(p→p)`.
pub fn self_only_reward<T: Scalar>(gs: &GroupScores<T>) -> RewardBreakdown<T> {
    breakdown(gs, gs.self_score(), RewardFormula::SelfOnly)
}

pub fn reward<T: Scalar>(gs: &GroupScores<T>, formula: RewardFormula) -> RewardBreakdown<T> {
    match formula {
        RewardFormula::Scribes => scribes_reward(gs),
        RewardFormula::SelfOnly => self_only_reward(gs),
    }
}

/// The three evaluation views of one anchor's group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSplit<V> {
    pub all: V,
    pub example: V,
    /// Absent for singleton groups.
    pub holdout: Option<V>,
}

pub fn eval_split<T: Scalar>(gs: &GroupScores<T>) -> EvalSplit<T> {
    EvalSplit {
        all: gs.group_mean(),
        example: gs.self_score(),
        holdout: mean(&gs.cross_scores()),
    }
}

impl<T: Scalar> EvalSplit<T> {
    /// `example/|G| + ((|G|-1)/|G|) · holdout`, which should equal `all`.
    pub fn recombine(&self, group_size: usize) -> T {
        let g = T::from_count(group_size);
        let cross = self.holdout.unwrap_or_else(T::zero);
        self.example / g + T::from_count(group_size - 1) / g * cross
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    All,
    Example,
    Holdout,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::All, Split::Example, Split::Holdout];

    pub fn label(self) -> &'static str {
        match self {
            Split::All => "All",
            Split::Example => "Example",
            Split::Holdout => "Holdout",
        }
    }
}

/// Per-page scores of one anchor's script across its group. Pages where the
/// script crashed should be entered as zero scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleScores<T> {
    pub anchor: String,
    pub pages: BTreeMap<String, PrfScores<T>>,
}

/// Mean precision, recall and F1 over a set of pages or examples. `f1` is the
/// mean of the individual F1 values, not the harmonic mean of `p` and `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanPrf<T> {
    pub p: T,
    pub r: T,
    pub f1: T,
}

impl<T: Scalar> MeanPrf<T> {
    fn of(items: impl IntoIterator<Item = (T, T, T)>) -> Option<Self> {
        let (p, (r, f1)): (Vec<T>, (Vec<T>, Vec<T>)) = items.into_iter().map(|(p, r, f)| (p, (r, f))).unzip();
        Some(MeanPrf {
            p: mean(&p)?,
            r: mean(&r)?,
            f1: mean(&f1)?,
        })
    }
}

impl<T: Scalar> ExampleScores<T> {
    /// Averages each metric over the pages of each split.
    pub fn split(&self) -> Result<EvalSplit<MeanPrf<T>>, RewardError> {
        let anchor = self
            .pages
            .get(&self.anchor)
            .ok_or_else(|| RewardError::InvalidGroup(format!("anchor {} has no score", self.anchor)))?;
        let tuple = |s: &PrfScores<T>| (s.precision, s.recall, s.f1);
        Ok(EvalSplit {
            all: MeanPrf::of(self.pages.values().map(tuple)).expect("anchor present"),
            example: MeanPrf::of([tuple(anchor)]).expect("one item"),
            holdout: MeanPrf::of(
                self.pages
                    .iter()
                    .filter(|(q, _)| **q != self.anchor)
                    .map(|(_, s)| tuple(s)),
            ),
        })
    }
}

/// One split's column group: macro means over examples plus the harmonic F1
/// of the mean precision and recall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRow<T> {
    pub p: T,
    pub r: T,
    pub f1: T,
    pub f1_h: T,
    /// Number of examples contributing to this split.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport<T> {
    pub all: SplitRow<T>,
    pub example: SplitRow<T>,
    /// Absent when every group is a singleton.
    pub holdout: Option<SplitRow<T>>,
    pub examples: usize,
    /// How pages without a usable result were counted.
    pub failed_pages: String,
}

impl<T: Scalar> EvalReport<T> {
    pub fn row(&self, split: Split) -> Option<&SplitRow<T>> {
        match split {
            Split::All => Some(&self.all),
            Split::Example => Some(&self.example),
            Split::Holdout => self.holdout.as_ref(),
        }
    }

    /// Fixed-width table in percent, splits as column groups.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let mut head = String::new();
        let mut sub = String::new();
        let mut vals = String::new();
        for split in Split::ALL {
            let _ = write!(head, "| {:<27}", split.label());
            let _ = write!(sub, "| {:>6} {:>6} {:>6} {:>6} ", "R", "P", "F1", "F1_H");
            match self.row(split) {
                Some(r) => {
                    let pct = |v: T| v.to_f64_lossy() * 100.0;
                    let _ = write!(
                        vals,
                        "| {:>6.2} {:>6.2} {:>6.2} {:>6.2} ",
                        pct(r.r),
                        pct(r.p),
                        pct(r.f1),
                        pct(r.f1_h)
                    );
                }
                None => {
                    let _ = write!(vals, "| {:>6} {:>6} {:>6} {:>6} ", "-", "-", "-", "-");
                }
            }
        }
        for line in [head, sub, vals] {
            out.push_str(line.trim_end());
            out.push_str(" |\n");
        }
        out
    }
}

fn split_row<T: Scalar>(rows: &[MeanPrf<T>]) -> Option<SplitRow<T>> {
    let m = MeanPrf::of(rows.iter().map(|r| (r.p, r.r, r.f1)))?;
    Some(SplitRow {
        p: m.p,
        r: m.r,
        f1: m.f1,
        f1_h: harmonic_f1(m.p, m.r),
        n: rows.len(),
    })
}

/// Macro averages over examples for each split. Examples are aggregated in
/// input order; singleton groups contribute nothing to Holdout.
pub fn benchmark_report<T: Scalar>(examples: &[ExampleScores<T>]) -> Result<EvalReport<T>, RewardError> {
    if examples.is_empty() {
        return Err(RewardError::EmptyInput);
    }
    let splits = examples.iter().map(ExampleScores::split).collect::<Result<Vec<_>, _>>()?;
    let all: Vec<_> = splits.iter().map(|s| s.all).collect();
    let example: Vec<_> = splits.iter().map(|s| s.example).collect();
    let holdout: Vec<_> = splits.iter().filter_map(|s| s.holdout).collect();
    Ok(EvalReport {
        all: split_row(&all).expect("non-empty"),
        example: split_row(&example).expect("non-empty"),
        holdout: split_row(&holdout),
        examples: examples.len(),
        failed_pages: "counted_as_zero".into(),
    })
}

/// Per-page token ratio `rho = dedup / flat` and the script-reuse speedup
/// `k / rho` over direct extraction of `k` flattened pages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Speedup<T> {
    pub rho: T,
    pub speedup: T,
}

pub fn estimate_speedup<T: Scalar>(k: usize, tokens_per_dedup_page: T, tokens_per_flat_page: T) -> Result<Speedup<T>, RewardError> {
    if k == 0 {
        return Err(RewardError::Domain("k must be at least 1".into()));
    }
    if tokens_per_flat_page <= T::zero() || tokens_per_dedup_page <= T::zero() {
        return Err(RewardError::Domain("token counts must be positive".into()));
    }
    let rho = tokens_per_dedup_page / tokens_per_flat_page;
    Ok(Speedup {
        rho,
        speedup: T::from_count(k) / rho,
    })
}

/// Smallest `k` whose speedup reaches 1.
pub fn break_even_k<T: Scalar>(tokens_per_dedup_page: T, tokens_per_flat_page: T) -> Result<usize, RewardError> {
    let rho = estimate_speedup(1, tokens_per_dedup_page, tokens_per_flat_page)?.rho;
    let mut k = 1;
    while T::from_count(k) < rho {
        k += 1;
    }
    Ok(k)
}
