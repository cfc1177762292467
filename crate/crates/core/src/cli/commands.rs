use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::io::{jsonl, pretty, read_jsonl, read_text, write_file, Sink};
use super::{
    CliError, EvalArgs, FormulaArg, GenerateArgs, GlobalArgs, GroupingArg, HintArg, HtmlArgs, LanguageArg,
    MethodArg, PipelineArgs, QaArgs, QaModeArg, RewardArgs, RunConfig, RunScriptArgs, ScoreArgs, SpeedupArgs,
    SplitArg, StageArg,
};
use crate::gateway::{LlmJudge, TemplateSet};
use crate::html::{count_tokens, dedup_html, flatten_html, CounterRegistry, DedupConfig, RawHtmlDocument, TokenCount};
use crate::metrics::{
    fuzzy_prf, lm_prf, match_exact, match_greedy, MatchedPair, PrfScores, TripleJudge,
    DEFAULT_GREEDY_DEADLINE,
};
use crate::pipeline::{
    classify_groups, failure_case_subset, filter_and_group, mark_blacklisted, sample_examples, synthesize_gold,
    AcceptAll, Blacklist, GroupingMode, HeuristicEnglish, LanguageFilter, PageGroup, PageRecord, TrainingExample,
};
use crate::qa::{build_reference, run_qa, PreparedItem, QaItem, ReferenceMode};
use crate::reward::{
    benchmark_report, break_even_k, estimate_speedup, reward as group_reward, EvalReport, ExampleScores, GroupScores,
    RewardBreakdown, RewardFormula, Split, SplitRow,
};
use crate::runtime::{
    agentic_generate, apply_to_group, ExecutionLimits, ExecutionResult, ExtractionScript, GenerateConfig,
    RetryTranscript, Shot, TriplesHint,
};
use crate::triple::Triple;

pub(super) struct Context {
    pub cfg: RunConfig,
    pub sink: Sink,
    pub timings: bool,
}

impl Context {
    pub fn new(cfg: RunConfig, global: &GlobalArgs) -> Self {
        Context {
            cfg,
            sink: Sink(global.out.clone()),
            timings: global.timings,
        }
    }

    fn templates(&self) -> Result<TemplateSet, CliError> {
        match &self.cfg.templates_dir {
            Some(d) => TemplateSet::with_overrides(d).map_err(|e| CliError::Config(e.to_string())),
            None => Ok(TemplateSet::default()),
        }
    }

    fn result(&self, r: ExecutionResult) -> ExecutionResult {
        if self.timings {
            r
        } else {
            r.without_timing()
        }
    }
}

/// One script execution on one page, as written by `run-script` and read by
/// `eval`, `reward`, `qa` and the failures stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub anchor: String,
    pub page: String,
    #[serde(default)]
    pub script_id: String,
    #[serde(flatten)]
    pub result: ExecutionResult,
    #[serde(default)]
    pub gold: Option<Vec<Triple>>,
}

/// A page record that may carry its own gold triples.
#[derive(Debug, Clone, Deserialize)]
struct PageInput {
    url: String,
    html: String,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    gold: Option<Vec<Triple>>,
}

impl PageInput {
    fn document(&self) -> RawHtmlDocument {
        RawHtmlDocument {
            url: self.url.clone(),
            html: self.html.clone(),
            title: self.title.clone(),
        }
    }
}

fn is_jsonl(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl")
}

fn read_documents(path: &Path) -> Result<Vec<RawHtmlDocument>, CliError> {
    if is_jsonl(path) {
        read_jsonl(path)
    } else {
        Ok(vec![RawHtmlDocument::new(path.display().to_string(), read_text(path)?)])
    }
}

fn counted(registry: &CounterRegistry, counter: &Option<String>, text: &str) -> Result<Option<TokenCount>, CliError> {
    counter
        .as_deref()
        .map(|id| count_tokens(text, registry, id).map_err(|e| CliError::Usage(e.to_string())))
        .transpose()
}

fn html_command(ctx: &Context, a: HtmlArgs, field: &str, f: impl Fn(&RawHtmlDocument, &DedupConfig) -> String) -> Result<(), CliError> {
    let mut dedup = ctx.cfg.dedup.clone();
    if let Some(z) = a.z {
        dedup.z = z;
    }
    if a.no_normalize_whitespace {
        dedup.normalize_whitespace = false;
    }
    dedup.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let registry = CounterRegistry::default();
    let docs = read_documents(&a.input)?;
    if !is_jsonl(&a.input) && a.counter.is_none() {
        let mut text = f(&docs[0], &dedup);
        if !text.ends_with('\n') {
            text.push('\n');
        }
        return ctx.sink.emit(&text);
    }
    let mut lines = Vec::with_capacity(docs.len());
    for d in &docs {
        let text = f(d, &dedup);
        let mut line = serde_json::Map::new();
        line.insert("url".into(), json!(d.url));
        if let Some(t) = counted(&registry, &a.counter, &text)? {
            line.insert("tokens".into(), json!(t));
        }
        line.insert(field.into(), json!(text));
        lines.push(Value::Object(line));
    }
    ctx.sink.emit(&jsonl(&lines)?)
}

pub(super) fn dedup(ctx: &Context, a: HtmlArgs) -> Result<(), CliError> {
    html_command(ctx, a, "html", dedup_html)
}

pub(super) fn flatten(ctx: &Context, a: HtmlArgs) -> Result<(), CliError> {
    html_command(ctx, a, "text", |d, _| flatten_html(d))
}

#[derive(Debug, Serialize)]
struct ScoreReport {
    gold_size: usize,
    pred_size: usize,
    fuzzy: PrfScores<f64>,
    lm: Option<PrfScores<f64>>,
    matching: Vec<MatchedPair<f64>>,
    extrapolated: bool,
}

fn secs(v: f64, flag: &str) -> Result<Duration, CliError> {
    Duration::try_from_secs_f64(v).map_err(|_| CliError::Usage(format!("--{flag} must be a non-negative number")))
}

pub(super) fn score(ctx: &Context, a: ScoreArgs) -> Result<(), CliError> {
    let gold: Vec<Triple> = read_jsonl(&a.gold)?;
    let pred: Vec<Triple> = read_jsonl(&a.pred)?;
    let method = a.method.unwrap_or(if a.deadline_secs.is_some() { MethodArg::Greedy } else { MethodArg::Exact });
    if a.judge.is_some() && method == MethodArg::Greedy {
        return Err(CliError::Usage("--judge needs exact matching".into()));
    }
    let m = match method {
        MethodArg::Exact => match_exact::<f64>(&gold, &pred),
        MethodArg::Greedy => {
            let deadline = a.deadline_secs.map(|s| secs(s, "deadline-secs")).transpose()?;
            match_greedy::<f64>(&gold, &pred, deadline.unwrap_or(DEFAULT_GREEDY_DEADLINE))
        }
    };
    let lm = match &a.judge {
        Some(name) => {
            let judge = LlmJudge::with_templates(ctx.cfg.gateway(name)?, ctx.templates()?);
            Some(lm_prf(&m, &gold, &pred, &judge, ctx.cfg.concurrency).map_err(CliError::domain)?.scores)
        }
        None => None,
    };
    let report = ScoreReport {
        gold_size: m.gold_size,
        pred_size: m.pred_size,
        fuzzy: fuzzy_prf(&m),
        lm,
        matching: m.pairs.clone(),
        extrapolated: m.extrapolated,
    };
    ctx.sink.emit(&pretty(&report)?)
}

/// Run records grouped by anchor, anchors in order of first appearance.
fn group_runs(runs: Vec<RunRecord>) -> Result<Vec<(String, Vec<RunRecord>)>, CliError> {
    let mut order: Vec<(String, Vec<RunRecord>)> = Vec::new();
    for r in runs {
        match order.iter_mut().find(|(a, _)| *a == r.anchor) {
            Some((_, v)) => {
                if v.iter().any(|x| x.page == r.page) {
                    return Err(CliError::Domain(format!("duplicate run for page {} of anchor {}", r.page, r.anchor)));
                }
                v.push(r)
            }
            None => order.push((r.anchor.clone(), vec![r])),
        }
    }
    Ok(order)
}

fn run_gold(r: &RunRecord) -> Result<&[Triple], CliError> {
    r.gold
        .as_deref()
        .ok_or_else(|| CliError::Domain(format!("run for page {} has no gold triples", r.page)))
}

/// Predictions that count: the triples of a usable run, nothing otherwise.
fn run_pred(r: &RunRecord) -> &[Triple] {
    if r.result.status.is_ok() {
        &r.result.triples
    } else {
        &[]
    }
}

#[derive(Debug, Serialize)]
struct RewardLine {
    anchor: String,
    scores: BTreeMap<String, f64>,
    #[serde(flatten)]
    breakdown: RewardBreakdown<f64>,
}

pub(super) fn reward(ctx: &Context, a: RewardArgs) -> Result<(), CliError> {
    let formula = match a.formula {
        FormulaArg::Scribes => RewardFormula::Scribes,
        FormulaArg::SelfOnly => RewardFormula::SelfOnly,
    };
    let groups: Vec<GroupScores<f64>> = match (&a.scores, &a.runs) {
        (Some(p), _) => read_jsonl(p)?,
        (None, Some(p)) => group_runs(read_jsonl(p)?)?
            .into_iter()
            .map(|(anchor, runs)| {
                let scores = runs
                    .iter()
                    .map(|r| Ok((r.page.clone(), fuzzy_prf(&match_exact::<f64>(run_gold(r)?, run_pred(r))).f1)))
                    .collect::<Result<BTreeMap<_, _>, CliError>>()?;
                GroupScores::new(anchor, scores).map_err(CliError::domain)
            })
            .collect::<Result<_, _>>()?,
        (None, None) => return Err(CliError::Usage("--scores or --runs is required".into())),
    };
    let lines: Vec<RewardLine> = groups
        .into_iter()
        .map(|gs| RewardLine {
            breakdown: group_reward(&gs, formula),
            anchor: gs.anchor,
            scores: gs.scores,
        })
        .collect();
    ctx.sink.emit(&jsonl(&lines)?)
}

/// Fuzzy and, with a judge, LM reports over run records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub fuzzy: EvalReport<f64>,
    pub lm: Option<EvalReport<f64>>,
}

/// Scores every run against its gold with optimal matching; pages whose
/// script did not run cleanly score zero.
pub fn evaluate_runs(runs: Vec<RunRecord>, judge: Option<&dyn TripleJudge>, concurrency: usize) -> Result<EvalOutput, CliError> {
    let mut fuzzy = Vec::new();
    let mut lm = Vec::new();
    for (anchor, records) in group_runs(runs)? {
        let mut f_pages = BTreeMap::new();
        let mut l_pages = BTreeMap::new();
        for r in &records {
            let gold = run_gold(r)?;
            let pred = run_pred(r);
            let m = match_exact::<f64>(gold, pred);
            f_pages.insert(r.page.clone(), fuzzy_prf(&m));
            if let Some(j) = judge {
                let s = lm_prf(&m, gold, pred, j, concurrency).map_err(CliError::domain)?.scores;
                l_pages.insert(r.page.clone(), s);
            }
        }
        fuzzy.push(ExampleScores { anchor: anchor.clone(), pages: f_pages });
        lm.push(ExampleScores { anchor, pages: l_pages });
    }
    Ok(EvalOutput {
        fuzzy: benchmark_report(&fuzzy).map_err(CliError::domain)?,
        lm: judge.map(|_| benchmark_report(&lm)).transpose().map_err(CliError::domain)?,
    })
}

pub(super) fn eval(ctx: &Context, a: EvalArgs) -> Result<(), CliError> {
    let runs: Vec<RunRecord> = read_jsonl(&a.runs)?;
    let report = match &a.judge {
        Some(name) => {
            let judge = LlmJudge::with_templates(ctx.cfg.gateway(name)?, ctx.templates()?);
            evaluate_runs(runs, Some(&judge), ctx.cfg.concurrency)?
        }
        None => evaluate_runs(runs, None, ctx.cfg.concurrency)?,
    };
    if a.table {
        let mut out = String::from("Fuzzy\n");
        out.push_str(&report.fuzzy.to_table());
        if let Some(lm) = &report.lm {
            out.push_str("LM\n");
            out.push_str(&lm.to_table());
        }
        return ctx.sink.emit(&out);
    }
    match a.split {
        None => ctx.sink.emit(&pretty(&report)?),
        Some(s) => {
            let split = match s {
                SplitArg::All => Split::All,
                SplitArg::Example => Split::Example,
                SplitArg::Holdout => Split::Holdout,
            };
            #[derive(Serialize)]
            struct One<'a> {
                split: &'static str,
                fuzzy: Option<&'a SplitRow<f64>>,
                lm: Option<&'a SplitRow<f64>>,
            }
            let one = One {
                split: split.label(),
                fuzzy: report.fuzzy.row(split),
                lm: report.lm.as_ref().and_then(|r| r.row(split)),
            };
            ctx.sink.emit(&pretty(&one)?)
        }
    }
}

fn limits(cfg: &RunConfig, wall_timeout_secs: Option<f64>, workers: Option<usize>) -> Result<ExecutionLimits, CliError> {
    let mut l = cfg.limits.clone();
    if let Some(s) = wall_timeout_secs {
        l.wall_timeout_secs = s;
    }
    if let Some(w) = workers {
        l.workers = Some(w);
    }
    l.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(l)
}

fn apply_interpreter(cfg: &mut RunConfig, flag: Option<String>) {
    if let Some(i) = flag {
        cfg.runtime.interpreter_command = Some(i);
    }
}

/// A script line: a bare script or a `generate` transcript.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScriptLine {
    Transcript(Box<RetryTranscript>),
    Script(ExtractionScript),
}

impl ScriptLine {
    fn into_script(self) -> ExtractionScript {
        match self {
            ScriptLine::Transcript(t) => t.final_script,
            ScriptLine::Script(s) => s,
        }
    }
}

pub(super) fn run_script(mut ctx: Context, a: RunScriptArgs) -> Result<(), CliError> {
    apply_interpreter(&mut ctx.cfg, a.interpreter.clone());
    let limits = limits(&ctx.cfg, a.wall_timeout_secs, a.workers)?;
    let interpreter = ctx.cfg.interpreter()?;
    let mut records = Vec::new();
    let mut push = |anchor: &str, script: &ExtractionScript, pages: &[(RawHtmlDocument, Option<Vec<Triple>>)]| -> Result<(), CliError> {
        let docs: Vec<RawHtmlDocument> = pages.iter().map(|(d, _)| d.clone()).collect();
        let mut results = apply_to_group(script, &docs, &limits).map_err(CliError::domain)?;
        for (doc, gold) in pages {
            let result = results.remove(&doc.url).expect("one result per page");
            records.push(RunRecord {
                anchor: anchor.to_string(),
                page: doc.url.clone(),
                script_id: script.id.clone(),
                result: ctx.result(result),
                gold: gold.clone(),
            });
        }
        Ok(())
    };
    if let Some(path) = &a.script {
        let pages_path = a.pages.as_ref().ok_or_else(|| CliError::Usage("--script needs --pages".into()))?;
        let pages: Vec<PageInput> = read_jsonl(pages_path)?;
        let first = pages.first().ok_or_else(|| CliError::Domain("no pages".into()))?;
        let id = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let script = ExtractionScript::new(id, read_text(path)?, interpreter, first.url.clone()).map_err(CliError::domain)?;
        let pages: Vec<_> = pages.iter().map(|p| (p.document(), p.gold.clone())).collect();
        push(&first.url.clone(), &script, &pages)?;
    } else {
        let (Some(sp), Some(ep)) = (&a.scripts, &a.examples) else {
            return Err(CliError::Usage("--scripts needs --examples".into()));
        };
        let scripts: BTreeMap<String, ExtractionScript> = read_jsonl::<ScriptLine>(sp)?
            .into_iter()
            .map(|l| {
                let mut s = l.into_script();
                s.interpreter = interpreter.clone();
                (s.created_from.clone(), s)
            })
            .collect();
        let examples: Vec<TrainingExample> = read_jsonl(ep)?;
        for ex in &examples {
            let script = scripts
                .get(&ex.anchor.url)
                .ok_or_else(|| CliError::Domain(format!("no script generated from {}", ex.anchor.url)))?;
            let pages: Vec<_> = ex
                .reward_pages
                .iter()
                .map(|p| (p.document(), ex.synthetic_gold.get(&p.url).cloned()))
                .collect();
            push(&ex.anchor.url, script, &pages)?;
        }
    }
    ctx.sink.emit(&jsonl(&records)?)
}

pub(super) fn generate(mut ctx: Context, a: GenerateArgs) -> Result<(), CliError> {
    apply_interpreter(&mut ctx.cfg, a.interpreter.clone());
    let mut config = GenerateConfig::new(ctx.cfg.interpreter()?);
    config.limits = limits(&ctx.cfg, a.wall_timeout_secs, None)?;
    config.dedup = (!a.no_dedup).then(|| ctx.cfg.dedup.clone());
    config.templates = ctx.templates()?;
    if a.iters == 0 {
        return Err(CliError::Usage("--iters must be at least 1".into()));
    }
    let generator = ctx.cfg.gateway(&a.generator)?;
    let shots: Vec<Shot> = a.shots.as_deref().map(read_jsonl).transpose()?.unwrap_or_default();
    let jobs: Vec<(RawHtmlDocument, Option<Vec<Triple>>)> = match (&a.page, &a.examples) {
        (Some(p), _) => {
            let url = a.url.clone().unwrap_or_else(|| p.display().to_string());
            vec![(RawHtmlDocument::new(url, read_text(p)?), None)]
        }
        (None, Some(e)) => read_jsonl::<TrainingExample>(e)?
            .into_iter()
            .map(|ex| {
                let gold = ex.synthetic_gold.get(&ex.anchor.url).cloned();
                (ex.anchor.document(), gold)
            })
            .collect(),
        (None, None) => return Err(CliError::Usage("--page or --examples is required".into())),
    };
    let hint = |gold: &Option<Vec<Triple>>| -> Option<TriplesHint> {
        let g = gold.clone()?;
        match a.hint {
            HintArg::None => None,
            HintArg::Sample => Some(TriplesHint::Sample(g.into_iter().take(a.hint_size).collect())),
            HintArg::All => Some(TriplesHint::All(g)),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.cfg.concurrency)
        .build()
        .map_err(CliError::domain)?;
    let transcripts: Vec<Result<RetryTranscript, CliError>> = pool.install(|| {
        jobs.par_iter()
            .map(|(doc, gold)| {
                let mut cfg = config.clone();
                cfg.hint = hint(gold);
                let mut t = agentic_generate(&generator, doc, a.iters, &shots, &cfg).map_err(CliError::domain)?;
                for att in &mut t.attempts {
                    att.result = ctx.result(att.result.clone());
                }
                Ok(t)
            })
            .collect()
    });
    let transcripts = transcripts.into_iter().collect::<Result<Vec<_>, _>>()?;
    ctx.sink.emit(&jsonl(&transcripts)?)
}

pub const GROUPS_FILE: &str = "groups.jsonl";
pub const CLASSIFIED_FILE: &str = "classified_groups.jsonl";
pub const SAMPLED_FILE: &str = "sampled.jsonl";
pub const EXAMPLES_FILE: &str = "examples.jsonl";
pub const SYNTHETIC_GOLD_FILE: &str = "synthetic_gold.jsonl";
pub const FAILURES_FILE: &str = "failures.jsonl";
pub const STATS_FILE: &str = "stats.json";

#[derive(Debug, Serialize)]
struct GoldLine<'a> {
    group_key: &'a str,
    anchor: &'a str,
    url: &'a str,
    triples: &'a [Triple],
}

struct Stages {
    dir: PathBuf,
    resume: bool,
    stats: serde_json::Map<String, Value>,
}

impl Stages {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn cached<T: serde::de::DeserializeOwned>(&self, name: &str) -> Result<Option<Vec<T>>, CliError> {
        let p = self.path(name);
        if self.resume && p.exists() {
            log::info!("resuming from {}", p.display());
            return Ok(Some(read_jsonl(&p)?));
        }
        Ok(None)
    }

    fn load<T: serde::de::DeserializeOwned>(&self, name: &str) -> Result<Vec<T>, CliError> {
        read_jsonl(&self.path(name))
    }

    fn save<T: Serialize>(&self, name: &str, records: &[T]) -> Result<(), CliError> {
        write_file(&self.path(name), jsonl(records)?.as_bytes())
    }

    fn record(&mut self, stage: &str, stats: impl Serialize) -> Result<(), CliError> {
        self.stats.insert(stage.into(), serde_json::to_value(stats).map_err(CliError::domain)?);
        write_file(&self.path(STATS_FILE), pretty(&self.stats)?.as_bytes())
    }
}

pub(super) fn pipeline(mut ctx: Context, a: PipelineArgs) -> Result<(), CliError> {
    let cfg = &mut ctx.cfg;
    if let Some(n) = a.n {
        cfg.thresholds.n = n;
    }
    if let Some(m) = a.m {
        cfg.thresholds.m = m;
    }
    if let Some(k) = a.k {
        cfg.thresholds.k = k;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(d) = &a.output_dir {
        cfg.output_dir = d.clone();
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let cfg = &ctx.cfg;
    let templates = ctx.templates()?;
    let mut st = Stages {
        dir: cfg.output_dir.clone(),
        resume: a.resume,
        stats: serde_json::Map::new(),
    };
    if a.resume && st.path(STATS_FILE).exists() {
        if let Value::Object(m) = serde_json::from_str(&read_text(&st.path(STATS_FILE))?).map_err(CliError::domain)? {
            st.stats = m;
        }
    }
    let stage = a.stage;
    let runs = |s: StageArg| stage == s || stage == StageArg::All;

    let mut groups: Option<Vec<PageGroup>> = None;
    if runs(StageArg::Group) {
        groups = match st.cached(GROUPS_FILE)? {
            Some(g) => Some(g),
            None => {
                let input = a.input.as_ref().ok_or_else(|| CliError::Usage("--in is required for grouping".into()))?;
                let mut records: Vec<PageRecord> = read_jsonl(input)?;
                if let Some(b) = &a.blacklist {
                    mark_blacklisted(&mut records, &Blacklist::load(b).map_err(CliError::domain)?);
                }
                let mode = match a.grouping {
                    GroupingArg::Prefix => GroupingMode::Prefix,
                    GroupingArg::Domain => GroupingMode::Domain,
                };
                let lang: Box<dyn LanguageFilter> = match a.language {
                    LanguageArg::Heuristic => Box::new(HeuristicEnglish::default()),
                    LanguageArg::Any => Box::new(AcceptAll),
                };
                let (g, stats) = filter_and_group(records, &cfg.thresholds, mode, lang.as_ref());
                st.save(GROUPS_FILE, &g)?;
                st.record("group", stats)?;
                Some(g)
            }
        };
    }

    let mut classified: Option<Vec<PageGroup>> = None;
    if runs(StageArg::Classify) {
        classified = match st.cached(CLASSIFIED_FILE)? {
            Some(g) => Some(g),
            None => {
                let groups = match groups.take() {
                    Some(g) => g,
                    None => st.load(GROUPS_FILE)?,
                };
                let name = a.classifier.as_deref().ok_or_else(|| CliError::Usage("--classifier is required".into()))?;
                let classifier = cfg.gateway(name)?;
                let (g, stats) = classify_groups(groups, &classifier, &cfg.thresholds, &cfg.dedup, &templates, cfg.concurrency)
                    .map_err(CliError::domain)?;
                st.save(CLASSIFIED_FILE, &g)?;
                st.record("classify", stats)?;
                Some(g)
            }
        };
    }

    let mut sampled: Option<Vec<TrainingExample>> = None;
    if runs(StageArg::Sample) {
        sampled = match st.cached(SAMPLED_FILE)? {
            Some(s) => Some(s),
            None => {
                let groups = match classified.take() {
                    Some(g) => g,
                    None => st.load(CLASSIFIED_FILE)?,
                };
                let s = sample_examples(&groups, &cfg.thresholds, cfg.seed);
                st.save(SAMPLED_FILE, &s)?;
                st.record("sample", json!({"examples": s.len(), "seed": cfg.seed}))?;
                Some(s)
            }
        };
    }

    let mut examples: Option<Vec<TrainingExample>> = None;
    if runs(StageArg::Synthesize) {
        examples = match st.cached(EXAMPLES_FILE)? {
            Some(e) => Some(e),
            None => {
                let sampled = match sampled.take() {
                    Some(s) => s,
                    None => st.load(SAMPLED_FILE)?,
                };
                let name = a.extractor.as_deref().ok_or_else(|| CliError::Usage("--extractor is required".into()))?;
                let extractor = cfg.gateway(name)?;
                let (ex, stats) = synthesize_gold(sampled, &extractor, &templates, cfg.concurrency).map_err(CliError::domain)?;
                let gold: Vec<GoldLine> = ex
                    .iter()
                    .flat_map(|e| {
                        e.reward_pages.iter().map(move |p| GoldLine {
                            group_key: &e.group_key,
                            anchor: &e.anchor.url,
                            url: &p.url,
                            triples: &e.synthetic_gold[&p.url],
                        })
                    })
                    .collect();
                st.save(SYNTHETIC_GOLD_FILE, &gold)?;
                st.save(EXAMPLES_FILE, &ex)?;
                st.record("synthesize", stats)?;
                Some(ex)
            }
        };
    }

    if stage == StageArg::Failures || (stage == StageArg::All && a.runs.is_some()) {
        let examples = match examples.take() {
            Some(e) => e,
            None => st.load(EXAMPLES_FILE)?,
        };
        let runs_path = a.runs.as_ref().ok_or_else(|| CliError::Usage("--runs is required for failures".into()))?;
        let anchor_runs: BTreeMap<String, ExecutionResult> = read_jsonl::<RunRecord>(runs_path)?
            .into_iter()
            .filter(|r| r.page == r.anchor)
            .map(|r| (r.anchor, r.result))
            .collect();
        let failures = failure_case_subset(&examples, &anchor_runs).map_err(CliError::domain)?;
        st.save(FAILURES_FILE, &failures)?;
        st.record("failures", json!({"examples": examples.len(), "failures": failures.len()}))?;
    }
    ctx.sink.emit(&pretty(&st.stats)?)
}

/// Triples for a page, from `{url, triples}` lines or run records.
#[derive(Debug, Deserialize)]
struct TriplesLine {
    #[serde(alias = "page")]
    url: String,
    #[serde(default)]
    triples: Vec<Triple>,
    #[serde(default)]
    gold: Option<Vec<Triple>>,
}

pub(super) fn qa(ctx: &Context, a: QaArgs) -> Result<(), CliError> {
    let mode = match a.mode {
        QaModeArg::Flatten => ReferenceMode::FlattenOnly,
        QaModeArg::Predicted => ReferenceMode::FlattenPlusPredicted,
        QaModeArg::Gold => ReferenceMode::FlattenPlusGold,
    };
    let items: Vec<QaItem> = read_jsonl(&a.items)?;
    let pages: BTreeMap<String, RawHtmlDocument> =
        read_jsonl::<RawHtmlDocument>(&a.pages)?.into_iter().map(|d| (d.url.clone(), d)).collect();
    let triples: BTreeMap<String, Vec<Triple>> = match &a.triples {
        Some(p) => read_jsonl::<TriplesLine>(p)?
            .into_iter()
            .map(|l| {
                let t = match (mode, l.gold) {
                    (ReferenceMode::FlattenPlusGold, Some(g)) => g,
                    _ => l.triples,
                };
                (l.url, t)
            })
            .collect(),
        None if mode.needs_triples() => return Err(CliError::Usage("--triples is required for this mode".into())),
        None => BTreeMap::new(),
    };
    let prepared = items
        .into_iter()
        .map(|mut item| {
            item.reference_mode = mode;
            let page = pages
                .get(&item.page_url)
                .ok_or_else(|| CliError::Domain(format!("no page for {}", item.page_url)))?;
            let t = if mode.needs_triples() {
                Some(
                    triples
                        .get(&item.page_url)
                        .ok_or_else(|| CliError::Domain(format!("no triples for {}", item.page_url)))?
                        .as_slice(),
                )
            } else {
                None
            };
            let reference = build_reference(&item, page, t).map_err(CliError::domain)?;
            Ok(PreparedItem { item, reference })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let backbone = ctx.cfg.gateway(&a.backbone)?;
    let judge = ctx.cfg.gateway(&a.judge)?;
    let report = run_qa(&prepared, mode, &backbone, &judge, &a.judge, &ctx.templates()?, ctx.cfg.concurrency)
        .map_err(CliError::domain)?;
    ctx.sink.emit(&pretty(&report)?)
}

#[derive(Debug, Serialize)]
struct SpeedupReport {
    k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    counter: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pages: Option<usize>,
    tokens_per_dedup_page: f64,
    tokens_per_flat_page: f64,
    rho: f64,
    speedup: f64,
    break_even_k: usize,
}

pub(super) fn speedup(ctx: &Context, a: SpeedupArgs) -> Result<(), CliError> {
    let (dedup_t, flat_t, counter, pages) = match (a.dedup_tokens, a.flat_tokens, &a.pages) {
        (Some(d), Some(f), _) => (d, f, None, None),
        (_, _, Some(p)) => {
            let registry = CounterRegistry::default();
            let docs: Vec<RawHtmlDocument> = read_jsonl(p)?;
            if docs.is_empty() {
                return Err(CliError::Domain("no pages".into()));
            }
            let count = |text: &str| count_tokens(text, &registry, &a.counter).map(|t| t.count as f64);
            let mut d_sum = 0.0;
            let mut f_sum = 0.0;
            for d in &docs {
                d_sum += count(&dedup_html(d, &ctx.cfg.dedup)).map_err(|e| CliError::Usage(e.to_string()))?;
                f_sum += count(&flatten_html(d)).map_err(|e| CliError::Usage(e.to_string()))?;
            }
            let n = docs.len() as f64;
            (d_sum / n, f_sum / n, Some(a.counter.clone()), Some(docs.len()))
        }
        _ => return Err(CliError::Usage("give --dedup-tokens and --flat-tokens, or --pages".into())),
    };
    let s = estimate_speedup(a.k, dedup_t, flat_t).map_err(CliError::domain)?;
    let report = SpeedupReport {
        k: a.k,
        counter,
        pages,
        tokens_per_dedup_page: dedup_t,
        tokens_per_flat_page: flat_t,
        rho: s.rho,
        speedup: s.speedup,
        break_even_k: break_even_k(dedup_t, flat_t).map_err(CliError::domain)?,
    };
    ctx.sink.emit(&pretty(&report)?)
}
