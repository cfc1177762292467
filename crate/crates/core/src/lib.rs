//! Extraction-script tooling for semi-structured web pages: keep-z HTML
//! deduplication, triple scoring, group rewards, sandboxed script execution,
//! crawl-group construction, prompt templates and model transports.
//!
//! The metric and reward code is generic over [`Scalar`]; the aliases below
//! fix it to `f64`, which the pipeline and CLI use throughout.

pub mod cli;
pub mod gateway;
pub mod html;
pub mod metrics;
pub mod pipeline;
pub mod qa;
pub mod reward;
pub mod runtime;
pub mod scalar;
pub mod triple;

pub use scalar::Scalar;
pub use triple::Triple;

pub type Matching = metrics::Matching<f64>;
pub type MatchedPair = metrics::MatchedPair<f64>;
pub type PrfScores = metrics::PrfScores<f64>;
pub type MacroAggregate = metrics::MacroAggregate<f64>;
pub type GroupScores = reward::GroupScores<f64>;
pub type RewardBreakdown = reward::RewardBreakdown<f64>;
pub type EvalSplit = reward::EvalSplit<f64>;
pub type ExampleScores = reward::ExampleScores<f64>;
pub type EvalReport = reward::EvalReport<f64>;
pub type Speedup = reward::Speedup<f64>;
