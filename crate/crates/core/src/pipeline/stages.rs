use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ExampleSource, PageGroup, PageRecord, PipelineError, PipelineThresholds, TrainingExample};
use crate::gateway::{
    classifier_example_vars, parse_classifier, parse_triples_literal, vars, ChatModel, Decision, TemplateName,
    TemplateSet,
};
use crate::html::{dedup_html, flatten_html, DedupConfig};
use crate::runtime::ExecutionResult;
use crate::triple::Triple;

/// Default bound on concurrent model requests per stage.
pub const DEFAULT_CONCURRENCY: usize = 8;

fn pool(concurrency: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency.max(1))
        .build()
        .map_err(|e| PipelineError::Io(e.to_string()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifyStats {
    pub pages: usize,
    pub yes: usize,
    pub no: usize,
    pub excluded: usize,
    pub unparseable: usize,
    pub groups_kept: usize,
    pub groups_dropped: usize,
}

/// Classifies every page from its deduplicated HTML. Excluded pages leave
/// their group; unparseable verdicts count as No. A group survives when its
/// Yes share among the remaining pages is at least `m` percent.
pub fn classify_groups(
    groups: Vec<PageGroup>,
    classifier: &dyn ChatModel,
    thresholds: &PipelineThresholds,
    dedup: &DedupConfig,
    templates: &TemplateSet,
    concurrency: usize,
) -> Result<(Vec<PageGroup>, ClassifyStats), PipelineError> {
    let examples = classifier_example_vars();
    let jobs: Vec<(usize, &PageRecord)> = groups
        .iter()
        .enumerate()
        .flat_map(|(gi, g)| g.pages.iter().map(move |p| (gi, p)))
        .collect();
    let verdicts: Vec<Result<Option<Decision>, PipelineError>> = pool(concurrency)?.install(|| {
        jobs.par_iter()
            .map(|(_, page)| {
                let mut v = vars([("html", json!(dedup_html(&page.document(), dedup)))]);
                for (k, ex) in examples {
                    v.insert(k.into(), json!(ex));
                }
                let prompt = templates
                    .render(TemplateName::Classifier, &v)
                    .map_err(|e| PipelineError::ClassifierUnavailable(e.to_string()))?;
                let resp = classifier
                    .complete(&prompt)
                    .map_err(|e| PipelineError::ClassifierUnavailable(e.to_string()))?;
                Ok(match parse_classifier(&resp.response_text) {
                    Ok(v) => Some(v.decision),
                    Err(e) => {
                        log::warn!("{}: {e}; counted as No", page.url);
                        None
                    }
                })
            })
            .collect()
    });

    let mut stats = ClassifyStats::default();
    let mut decisions: Vec<BTreeMap<String, Option<Decision>>> = vec![BTreeMap::new(); groups.len()];
    for ((gi, page), verdict) in jobs.iter().zip(verdicts) {
        decisions[*gi].insert(page.url.clone(), verdict?);
    }
    let mut kept = Vec::new();
    for (mut group, decided) in groups.into_iter().zip(decisions) {
        stats.pages += group.pages.len();
        group.pages.retain(|p| decided[&p.url] != Some(Decision::Exclude));
        group.classified_semi_structured.clear();
        for p in &group.pages {
            let d = decided[&p.url];
            match d {
                Some(Decision::Yes) => stats.yes += 1,
                Some(Decision::No) => stats.no += 1,
                None => stats.unparseable += 1,
                Some(Decision::Exclude) => unreachable!("excluded pages were removed"),
            }
            group.classified_semi_structured.insert(p.url.clone(), d == Some(Decision::Yes));
        }
        stats.excluded += decided.len() - group.pages.len();
        let yes = group.classified_semi_structured.values().filter(|v| **v).count();
        let remaining = group.pages.len();
        if remaining > 0 && yes * 100 >= thresholds.m as usize * remaining {
            stats.groups_kept += 1;
            kept.push(group);
        } else {
            log::info!("dropping group {}: {yes}/{remaining} semi-structured", group.key);
            stats.groups_dropped += 1;
        }
    }
    Ok((kept, stats))
}

/// Per-group seed: the run seed mixed with an FNV-1a hash of the key, so a
/// group's sample does not depend on which other groups are present.
pub fn group_seed(seed: u64, key: &str) -> u64 {
    let hash = key.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    });
    seed ^ hash
}

/// Picks one anchor uniformly per group, plus up to `k - 1` other pages
/// uniformly without replacement. Reward pages list the anchor first, then
/// the others in URL order.
pub fn sample_examples(groups: &[PageGroup], thresholds: &PipelineThresholds, seed: u64) -> Vec<TrainingExample> {
    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        if g.pages.is_empty() {
            continue;
        }
        let mut pages: Vec<&PageRecord> = g.pages.iter().collect();
        pages.sort_by(|a, b| a.url.cmp(&b.url));
        let mut rng = ChaCha8Rng::seed_from_u64(group_seed(seed, &g.key));
        let anchor_idx = rng.gen_range(0..pages.len());
        let anchor = pages[anchor_idx].clone();
        let others: Vec<&PageRecord> = pages
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != anchor_idx)
            .map(|(_, p)| *p)
            .collect();
        let take = thresholds.k.saturating_sub(1).min(others.len());
        let mut chosen: Vec<usize> = sample(&mut rng, others.len(), take).into_vec();
        chosen.sort_unstable();
        let mut reward_pages = vec![anchor.clone()];
        reward_pages.extend(chosen.into_iter().map(|i| others[i].clone()));
        out.push(TrainingExample {
            group_key: g.key.clone(),
            anchor,
            reward_pages,
            synthetic_gold: BTreeMap::new(),
            source: ExampleSource::Synthetic,
        });
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisStats {
    pub pages_requested: usize,
    pub pages_dropped: usize,
    pub examples_dropped: usize,
    pub triples: usize,
}

fn extract_page(
    page: &PageRecord,
    extractor: &dyn ChatModel,
    templates: &TemplateSet,
) -> Result<Option<Vec<Triple>>, PipelineError> {
    let doc = page.document();
    let title = doc.resolved_title().unwrap_or_default();
    let prompt = templates
        .render(
            TemplateName::DirectExtract,
            &vars([("html", json!(flatten_html(&doc))), ("html_title", json!(title))]),
        )
        .map_err(|e| PipelineError::ExtractorUnavailable(e.to_string()))?;
    let resp = extractor
        .complete(&prompt)
        .map_err(|e| PipelineError::ExtractorUnavailable(e.to_string()))?;
    Ok(match parse_triples_literal(&resp.response_text) {
        Ok(lit) if !lit.triples.is_empty() => Some(lit.triples),
        Ok(_) => {
            log::warn!("{}: extractor returned no triples; page dropped", page.url);
            None
        }
        Err(e) => {
            log::warn!("{}: {e}; page dropped", page.url);
            None
        }
    })
}

/// Annotates every reward page by direct extraction from its flattened
/// text. Pages without a usable answer leave the example; examples whose
/// anchor fails are dropped.
pub fn synthesize_gold(
    examples: Vec<TrainingExample>,
    extractor: &dyn ChatModel,
    templates: &TemplateSet,
    concurrency: usize,
) -> Result<(Vec<TrainingExample>, SynthesisStats), PipelineError> {
    let jobs: Vec<(usize, &PageRecord)> = examples
        .iter()
        .enumerate()
        .flat_map(|(ei, ex)| ex.reward_pages.iter().map(move |p| (ei, p)))
        .collect();
    let results: Vec<Result<Option<Vec<Triple>>, PipelineError>> = pool(concurrency)?
        .install(|| jobs.par_iter().map(|(_, p)| extract_page(p, extractor, templates)).collect());

    let mut gold: Vec<BTreeMap<String, Vec<Triple>>> = vec![BTreeMap::new(); examples.len()];
    let mut stats = SynthesisStats {
        pages_requested: jobs.len(),
        ..Default::default()
    };
    for ((ei, page), res) in jobs.iter().zip(results) {
        match res? {
            Some(t) => {
                stats.triples += t.len();
                gold[*ei].insert(page.url.clone(), t);
            }
            None => stats.pages_dropped += 1,
        }
    }
    let mut out = Vec::with_capacity(examples.len());
    for (mut ex, g) in examples.into_iter().zip(gold) {
        if !g.contains_key(&ex.anchor.url) {
            log::warn!("{}: anchor has no synthetic gold; example dropped", ex.anchor.url);
            stats.examples_dropped += 1;
            continue;
        }
        ex.reward_pages.retain(|p| g.contains_key(&p.url));
        ex.synthetic_gold = g;
        ex.source = ExampleSource::Synthetic;
        out.push(ex);
    }
    Ok((out, stats))
}

/// Examples whose anchor script produced no valid triples. `runs` is keyed
/// by anchor URL.
pub fn failure_case_subset(
    examples: &[TrainingExample],
    runs: &BTreeMap<String, ExecutionResult>,
) -> Result<Vec<TrainingExample>, PipelineError> {
    let mut out = Vec::new();
    for ex in examples {
        let run = runs
            .get(&ex.anchor.url)
            .ok_or_else(|| PipelineError::MissingRun(ex.anchor.url.clone()))?;
        if !run.status.is_ok() {
            out.push(ex.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Gateway, MockRule, ScriptedModel};
    use crate::runtime::ExecutionStatus;

    fn group(key: &str, n: usize) -> PageGroup {
        PageGroup {
            key: key.into(),
            pages: (0..n)
                .map(|i| PageRecord::new(format!("https://{key}/p{i:02}"), format!("<p>page P{i:02}X</p>")))
                .collect(),
            classified_semi_structured: BTreeMap::new(),
        }
    }

    fn classifier_for(yes: usize, total: usize) -> Gateway {
        let mut rules: Vec<MockRule> = (0..total)
            .map(|i| {
                let d = if i < yes { "Yes" } else { "No" };
                MockRule::new(format!("P{i:02}X"), format!("{{\"reason\": \"r\", \"decision\": \"{d}\"}}"))
            })
            .collect();
        rules.push(MockRule::new("", "???"));
        Gateway::mock(rules)
    }

    #[test]
    fn share_gate() {
        let t = PipelineThresholds::default();
        let d = DedupConfig::default();
        let ts = TemplateSet::default();
        let (kept, stats) = classify_groups(vec![group("a.com/x", 30)], &classifier_for(28, 30), &t, &d, &ts, 4).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!((stats.yes, stats.no), (28, 2));
        let (kept, _) = classify_groups(vec![group("a.com/x", 30)], &classifier_for(26, 30), &t, &d, &ts, 4).unwrap();
        assert!(kept.is_empty());
    }

    #[test]
    fn exclude_and_unparseable() {
        let gw = Gateway::mock(vec![
            MockRule::new("P00X", r#"{"reason": "login", "decision": "Exclude"}"#),
            MockRule::new("P01X", "no json"),
            MockRule::new("", r#"{"reason": "list", "decision": "Yes"}"#),
        ]);
        let t = PipelineThresholds { n: 1, m: 50, k: 1 };
        let (kept, stats) = classify_groups(
            vec![group("a.com/x", 4)],
            &gw,
            &t,
            &DedupConfig::default(),
            &TemplateSet::default(),
            2,
        )
        .unwrap();
        assert_eq!(kept[0].pages.len(), 3);
        assert!(kept[0].pages.iter().all(|p| !p.url.ends_with("p00")));
        assert!(!kept[0].classified_semi_structured["https://a.com/x/p01"]);
        assert_eq!((stats.excluded, stats.unparseable, stats.yes), (1, 1, 2));
    }

    #[test]
    fn classifier_outage_is_an_error() {
        let m = ScriptedModel::new(Vec::<String>::new());
        let r = classify_groups(
            vec![group("a.com/x", 1)],
            &m,
            &PipelineThresholds { n: 1, m: 90, k: 1 },
            &DedupConfig::default(),
            &TemplateSet::default(),
            1,
        );
        assert!(matches!(r, Err(PipelineError::ClassifierUnavailable(_))));
    }

    #[test]
    fn sampling_sizes_and_determinism() {
        let t = PipelineThresholds::default();
        let groups = vec![group("a.com/x", 30), group("b.com/y", 5)];
        let a = sample_examples(&groups, &t, 7);
        assert_eq!(a[0].reward_pages.len(), 13);
        assert_eq!(a[1].reward_pages.len(), 5);
        assert_eq!(a[0].reward_pages[0], a[0].anchor);
        assert_eq!(a, sample_examples(&groups, &t, 7));
        let alone = sample_examples(&groups[1..], &t, 7);
        assert_eq!(alone[0], a[1]);
        let mut urls: Vec<&str> = a[0].reward_pages.iter().map(|p| p.url.as_str()).collect();
        urls.sort_unstable();
        urls.dedup();
        assert_eq!(urls.len(), 13);
    }

    fn example(key: &str, n: usize) -> TrainingExample {
        sample_examples(&[group(key, n)], &PipelineThresholds { n, m: 90, k: n }, 1).remove(0)
    }

    #[test]
    fn synthesis_keeps_and_drops() {
        let ex = example("a.com/x", 3);
        let anchor = ex.anchor.url.clone();
        let anchor_tag = format!("P{}X", &anchor[anchor.len() - 2..]);
        let other = ex.reward_pages[1].url.clone();
        let other_tag = format!("P{}X", &other[other.len() - 2..]);
        let gw = Gateway::mock(vec![
            MockRule::new(anchor_tag.as_str(), r#"[["a","b","c"]]"#),
            MockRule::new(other_tag.as_str(), "Sorry, I cannot help."),
            MockRule::new("", r#"[["d","e","f"],["g","h","i"]]"#),
        ]);
        let (out, stats) = synthesize_gold(vec![ex], &gw, &TemplateSet::default(), 2).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].synthetic_gold[&anchor], vec![Triple::new("a", "b", "c")]);
        assert_eq!(out[0].reward_pages.len(), 2);
        assert!(!out[0].synthetic_gold.contains_key(&other));
        assert_eq!((stats.pages_dropped, stats.triples), (1, 3));
    }

    #[test]
    fn synthesis_drops_example_with_failed_anchor() {
        let ex = example("a.com/x", 2);
        let anchor = ex.anchor.url.clone();
        let tag = format!("P{}X", &anchor[anchor.len() - 2..]);
        let gw = Gateway::mock(vec![MockRule::new(tag.as_str(), "[]"), MockRule::new("", r#"[["a","b","c"]]"#)]);
        let (out, stats) = synthesize_gold(vec![ex], &gw, &TemplateSet::default(), 1).unwrap();
        assert!(out.is_empty());
        assert_eq!(stats.examples_dropped, 1);
    }

    #[test]
    fn failure_subset() {
        let exs = vec![example("a.com/x", 1), example("b.com/x", 1), example("c.com/x", 1)];
        let status = [ExecutionStatus::Ok, ExecutionStatus::Empty, ExecutionStatus::Error];
        let mut runs: BTreeMap<String, ExecutionResult> = exs
            .iter()
            .zip(status)
            .map(|(e, s)| (e.anchor.url.clone(), ExecutionResult::failed(s, "")))
            .collect();
        let sub = failure_case_subset(&exs, &runs).unwrap();
        assert_eq!(sub.len(), 2);
        assert_eq!(sub[0].group_key, "b.com/x");
        runs.remove(&exs[0].anchor.url);
        assert!(matches!(failure_case_subset(&exs, &runs), Err(PipelineError::MissingRun(_))));
    }
}
