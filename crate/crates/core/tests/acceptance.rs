//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the summary is printed even when a criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scribe_forge::gateway::{parse_triples_literal, ScriptedModel};
use scribe_forge::html::dom::NodeKind;
use scribe_forge::html::{dedup_html, parse_html, parse_marker, DedupConfig, DomTree, RawHtmlDocument};
use scribe_forge::metrics::{harmonic_f1, match_exact, match_greedy};
use scribe_forge::pipeline::{failure_case_subset, group_key, ExampleSource, PageRecord, TrainingExample};
use scribe_forge::reward::{break_even_k, estimate_speedup, eval_split, scribes_reward, GroupScores};
use scribe_forge::runtime::{
    agentic_generate, execute_script, ExecutionResult, ExecutionStatus, GenerateConfig,
};
use scribe_forge::Triple;
use serde_json::Value;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- 1

fn random_triples(rng: &mut ChaCha8Rng, n: usize) -> Vec<Triple> {
    const WORDS: &[&str] = &["Dune", "Dun", "author", "auth", "Herbert", "Frank", "1965", "1966", "year", "", "pages", "412"];
    let w = |rng: &mut ChaCha8Rng| WORDS.choose(rng).unwrap().to_string();
    (0..n).map(|_| Triple::new(w(rng), w(rng), w(rng))).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let (gn, pn) = (rng.gen_range(0..=7), rng.gen_range(0..=7));
        let gold = random_triples(&mut rng, gn);
        let pred = random_triples(&mut rng, pn);
        let w: Vec<Vec<f64>> = gold.iter().map(|g| pred.iter().map(|p| oracle_similarity(g, p)).collect()).collect();
        let want = brute_force_max(&w);
        let exact = match_exact::<f64>(&gold, &pred).total_mass();
        let greedy = match_greedy::<f64>(&gold, &pred, Duration::from_secs(60)).total_mass();
        worst = worst.max((exact - want).abs());
        ensure((exact - want).abs() <= 1e-9, || format!("case {case}: exact {exact} vs brute force {want}"))?;
        ensure(greedy <= exact + 1e-9, || format!("case {case}: greedy {greedy} above exact {exact}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("200 instances, max |exact - oracle| = {worst:.1e}, {:.2}s", elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    // (mean recall, mean precision, reported harmonic F1), in percent.
    const ROWS: &[(f64, f64, f64)] = &[
        (30.46, 36.46, 33.19),
        (28.73, 37.44, 32.51),
        (36.94, 37.88, 37.40),
        (33.18, 47.10, 38.93),
        (36.43, 34.59, 35.49),
        (42.27, 46.26, 44.18),
        (8.11, 8.26, 8.18),
    ];
    let mut hits = 0;
    let mut misses = Vec::new();
    for &(r, p, f) in ROWS {
        let got: f64 = harmonic_f1(p, r);
        if (got - f).abs() <= 0.02 {
            hits += 1;
        } else {
            misses.push(format!("({r}, {p}) -> {got:.4}, table says {f}"));
        }
    }
    for (r, p, f) in [(42.27, 46.26, 44.18), (36.94, 37.88, 37.40)] {
        let got: f64 = harmonic_f1(p, r);
        ensure((got - f).abs() <= 0.02, || format!("required row ({r}, {p}) -> {got:.4}, want {f}"))?;
    }
    ensure(hits >= 5, || format!("only {hits} rows reproduced: {misses:?}"))?;
    Ok(format!("{hits}/{} rows within 0.02", ROWS.len()))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let size = rng.gen_range(1..=13);
        let scores: BTreeMap<String, f64> = (0..size).map(|i| (format!("https://g.test/p{i:02}"), rng.gen::<f64>())).collect();
        let anchor = format!("https://g.test/p{:02}", rng.gen_range(0..size));
        let gs = GroupScores::new(anchor.clone(), scores.clone()).map_err(|e| e.to_string())?;
        let own = scores[&anchor];
        let others: Vec<f64> = scores.iter().filter(|(k, _)| **k != anchor).map(|(_, v)| *v).collect();
        let cross_mean = if others.is_empty() { 0.0 } else { others.iter().sum::<f64>() / others.len() as f64 };
        let g = size as f64;
        let want = own / g + (g - 1.0) / g * cross_mean;
        let total = scribes_reward(&gs).total;
        worst = worst.max((total - want).abs());
        ensure((total - want).abs() <= 1e-12, || format!("case {case}: total {total} vs {want}"))?;
        let split = eval_split(&gs);
        let all = scores.values().sum::<f64>() / g;
        ensure((split.all - all).abs() <= 1e-12, || format!("case {case}: All {} vs group mean {all}", split.all))?;
        ensure((split.recombine(size) - split.all).abs() <= 1e-12, || {
            format!("case {case}: recombined {} vs All {}", split.recombine(size), split.all)
        })?;
        ensure(split.holdout.is_none() == (size == 1), || format!("case {case}: holdout presence"))?;
    }
    Ok(format!("1000 groups, max identity error {worst:.1e}"))
}

// ---------------------------------------------------------------- 4

struct Block {
    container: &'static str,
    child: &'static str,
    class: &'static str,
    r: usize,
}

fn dedup_page(rng: &mut ChaCha8Rng) -> (String, Vec<Block>) {
    let shapes = [("ul", "li", "item"), ("ol", "li", ""), ("div", "div", "card wide"), ("tbody", "tr", "row")];
    let mut html = String::from("<html><head><title>Catalog</title></head><body><h1>Catalog</h1>");
    let mut blocks = Vec::new();
    for (container, child, class) in shapes {
        let r = rng.gen_range(4..=100);
        let (open, close) = if container == "tbody" { ("<table><tbody>", "</tbody></table>") } else { ("", "") };
        html.push_str(open);
        if container != "tbody" {
            html.push_str(&format!("<{container}>"));
        }
        for i in 0..r {
            let attr = if class.is_empty() { String::new() } else { format!(" class=\"{class}\"") };
            let body = if child == "tr" {
                format!("<td>Entry number {i} with a long descriptive label</td><td>{}</td>", rng.gen_range(1..999))
            } else {
                format!("Entry number {i} with a long descriptive label and price {}", rng.gen_range(1..999))
            };
            html.push_str(&format!("<{child}{attr}>{body}</{child}>"));
        }
        if container != "tbody" {
            html.push_str(&format!("</{container}>"));
        }
        html.push_str(close);
        blocks.push(Block { container, child, class, r });
    }
    html.push_str("<p>Footer</p></body></html>");
    (html, blocks)
}

/// For each container element: element children per (tag, class) and the
/// markers it holds.
type Census = (String, BTreeMap<(String, String), usize>, Vec<(usize, String, String)>);

fn container_census(tree: &DomTree) -> Vec<Census> {
    let mut out = Vec::new();
    for id in tree.descendants(DomTree::ROOT) {
        let Some(el) = tree.element(id) else { continue };
        let mut kids = BTreeMap::new();
        let mut markers = Vec::new();
        for &c in tree.children(id) {
            match &tree.node(c).kind {
                NodeKind::Element(e) => {
                    let class = e.attr("class").unwrap_or("").to_string();
                    *kids.entry((e.name.clone(), class)).or_insert(0) += 1;
                }
                NodeKind::Comment(body) => {
                    if let Some((n, sig)) = parse_marker(body) {
                        markers.push((n, sig.tag.clone(), sig.classes.join(" ")));
                    }
                }
                _ => {}
            }
        }
        out.push((el.name.clone(), kids, markers));
    }
    out
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let config = DedupConfig::with_z(3);
    let (mut before, mut after) = (0usize, 0usize);
    let mut pages = 0;
    for page in 0..40 {
        let (html, blocks) = dedup_page(&mut rng);
        let raw = RawHtmlDocument::new(format!("https://d.test/{page}"), html.clone());
        let once = dedup_html(&raw, &config);
        let twice = dedup_html(&RawHtmlDocument::new(raw.url.clone(), once.clone()), &config);
        ensure(once == twice, || format!("page {page}: second pass changed the output"))?;
        let tree = parse_html(&RawHtmlDocument::new("u", once.clone())).map_err(|e| e.to_string())?;
        let census = container_census(&tree);
        for b in &blocks {
            let (_, kids, markers) = census
                .iter()
                .find(|(name, kids, _)| name == b.container && kids.keys().any(|(t, _)| t == b.child))
                .ok_or_else(|| format!("page {page}: no {} container left", b.container))?;
            let kept = kids.get(&(b.child.to_string(), b.class.to_string())).copied().unwrap_or(0);
            ensure(kept == 3, || format!("page {page}: {} kept {kept} <{}> of {}", b.container, b.child, b.r))?;
            ensure(markers.len() == 1, || format!("page {page}: {} has {} markers", b.container, markers.len()))?;
            let (hidden, tag, class) = &markers[0];
            ensure(*hidden == b.r - 3 && tag == b.child && class == b.class, || {
                format!("page {page}: marker ({hidden}, {tag}, {class}) for r = {}", b.r)
            })?;
        }
        let repeated: usize = blocks.iter().map(|b| b.r).sum();
        ensure(repeated > 0, || "empty page".into())?;
        before += html.len();
        after += once.len();
        pages += 1;
    }
    let reduction = 1.0 - after as f64 / before as f64;
    ensure(reduction >= 0.70, || format!("reduction {:.1}%", reduction * 100.0))?;
    Ok(format!("{pages} pages, idempotent, {:.1}% character reduction", reduction * 100.0))
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let page = RawHtmlDocument::new("https://fixture.test/page", "<p>x</p>");
    let cases = [
        ("emit_triples.py", ExecutionStatus::Ok),
        ("emit_empty.py", ExecutionStatus::Empty),
        ("crash.py", ExecutionStatus::Error),
        ("hang.py", ExecutionStatus::Timeout),
    ];
    let mut orphans = Vec::new();
    for (name, want) in cases {
        let r = execute_script(&fixture_script(name), &page, &limits(2.0)).map_err(|e| format!("{name}: {e}"))?;
        ensure(r.status == want, || format!("{name}: {:?}, want {want:?}", r.status))?;
        if name == "hang.py" {
            let pids = reported_pids(&r.stderr_tail);
            ensure(pids.len() == 2, || format!("hang fixture reported {pids:?}"))?;
            std::thread::sleep(Duration::from_millis(200));
            orphans.extend(pids.into_iter().filter(|p| !process_gone(*p)));
        }
    }
    ensure(orphans.is_empty(), || format!("surviving processes {orphans:?}"))?;

    let fenced = |code: &str| format!("```python\n{code}\n```");
    let generator = ScriptedModel::new([
        fenced("def main(html):\n    return []"),
        fenced("def main(html):\n    return []"),
        fenced("def main(html):\n    return [('x', 'is', 'found')]"),
    ]);
    let mut cfg = GenerateConfig::new(INTERPRETER);
    cfg.limits = limits(20.0);
    let t = agentic_generate(&generator, &page, 3, &[], &cfg).map_err(|e| e.to_string())?;
    ensure(t.iterations_used == 3 && t.final_result().status == ExecutionStatus::Ok, || {
        format!("{} iterations, final {:?}", t.iterations_used, t.final_result().status)
    })?;
    Ok("ok/empty/error/timeout, no orphans, agentic loop used 3 iterations".into())
}

// ---------------------------------------------------------------- 6

const NO_MARKER: &str = "layout-free-prose";

/// Seeded crawl: prefixes with sizes straddling n and No-shares straddling
/// m, plus duplicates, query strings, fragments and mixed-case hosts.
fn pipeline_corpus(rng: &mut ChaCha8Rng) -> Vec<PageRecord> {
    let prefixes = [
        "https://Shop.Example.com/items", "https://shop.example.com/deals", "https://news.example.org/2024/world",
        "https://news.example.org/2024/sport", "https://wiki.example.net:8080/w", "https://wiki.example.net:8080/talk",
        "https://blog.example.io", "https://blog.example.io/tags/rust", "https://docs.example.dev/api/v1",
        "https://docs.example.dev/api/v2",
    ];
    let mut records = Vec::new();
    for prefix in prefixes {
        let size = rng.gen_range(24..=44);
        let no = [0, 0, 1, 2, 3, 4, 6][rng.gen_range(0..7)];
        for i in 0..size {
            let mut url = format!("{prefix}/page-{i}");
            match rng.gen_range(0..10) {
                0 => url.push_str("?ref=feed"),
                1 => url.push_str("#top"),
                _ => {}
            }
            let prose = if i < no { format!("<p>{NO_MARKER}</p>") } else { String::new() };
            let html = format!(
                "<html><body><h1>Entry {i}</h1>{prose}<table><tr><th>kind</th><td>v{i}</td></tr></table></body></html>"
            );
            records.push(PageRecord::new(url.clone(), html.clone()));
            if rng.gen_range(0..8) == 0 {
                records.push(PageRecord::new(url, html));
            }
        }
    }
    records.shuffle(rng);
    records
}

/// Independent recount: string-level keys, distinct URLs, size and share gates.
fn recount(records: &[PageRecord], n: usize, m: usize) -> BTreeMap<String, BTreeSet<String>> {
    let key_of = |url: &str| {
        let rest = url.split_once("://").map_or(url, |(_, r)| r);
        let (host, path) = match rest.find('/') {
            Some(i) => (&rest[..i], &rest[i..]),
            None => (rest, ""),
        };
        let path = path.split(['?', '#']).next().unwrap_or("");
        let dir = path.rsplit_once('/').map_or("", |(d, _)| d).trim_end_matches('/');
        format!("{}{dir}", host.to_ascii_lowercase())
    };
    let mut groups: BTreeMap<String, BTreeMap<String, bool>> = BTreeMap::new();
    for r in records {
        let yes = !r.html.contains(NO_MARKER);
        groups.entry(key_of(&r.url)).or_default().insert(r.url.clone(), yes);
    }
    groups
        .into_iter()
        .filter(|(_, pages)| pages.len() >= n)
        .filter(|(_, pages)| pages.values().filter(|y| **y).count() * 100 >= m * pages.len())
        .map(|(k, pages)| (k, pages.into_keys().collect()))
        .collect()
}

fn criterion_6() -> Outcome {
    let (n, m, k) = (30, 90, 13);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let records = pipeline_corpus(&mut rng);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let write = |name: &str, text: String| fs::write(d.join(name), text).map_err(|e| e.to_string());
    write("pages.jsonl", records.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect())?;
    write(
        "classifier.jsonl",
        [(NO_MARKER, "No"), ("", "Yes")]
            .iter()
            .map(|(pat, d)| {
                let verdict = serde_json::json!({"reason": "mock", "decision": d}).to_string();
                serde_json::json!({"match": pat, "response": verdict}).to_string() + "\n"
            })
            .collect(),
    )?;
    write("run.toml", "[profiles.cls]\ntransport = \"mock\"\nmock_file = \"classifier.jsonl\"\n".into())?;
    let s = |p: &Path| p.to_string_lossy().into_owned();
    let (config, input, out) = (s(&d.join("run.toml")), s(&d.join("pages.jsonl")), s(&d.join("out")));
    for stage in ["group", "classify", "sample"] {
        let (code, _, err) = run_cli([
            "pipeline", "--config", &config, "--in", &input, "--n", "30", "--m", "90", "--k", "13", "--seed", "6",
            "--classifier", "cls", "--language", "any", "--stage", stage, "--output-dir", &out,
        ]);
        ensure(code == 0, || format!("{stage} stage exited {code}: {err}"))?;
    }

    let read = |name: &str| -> Vec<Value> {
        fs::read_to_string(d.join("out").join(name))
            .unwrap_or_default()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect()
    };
    let got: BTreeMap<String, BTreeSet<String>> = read("classified_groups.jsonl")
        .iter()
        .map(|g| {
            let urls = g["pages"].as_array().unwrap().iter().map(|p| p["url"].as_str().unwrap().to_string()).collect();
            (g["key"].as_str().unwrap().to_string(), urls)
        })
        .collect();
    let want = recount(&records, n, m);
    ensure(got == want, || {
        format!("groups {:?} vs recount {:?}", got.keys().collect::<Vec<_>>(), want.keys().collect::<Vec<_>>())
    })?;
    ensure(!want.is_empty() && want.len() < 10, || format!("degenerate corpus: {} groups kept", want.len()))?;
    for ex in read("sampled.jsonl") {
        let key = ex["group_key"].as_str().unwrap();
        let pages: Vec<&str> = ex["reward_pages"].as_array().unwrap().iter().map(|p| p["url"].as_str().unwrap()).collect();
        let expect = want[key].len().min(k);
        ensure(pages.len() == expect, || format!("{key}: {} reward pages, want {expect}", pages.len()))?;
        ensure(pages[0] == ex["anchor"]["url"].as_str().unwrap(), || format!("{key}: anchor not first"))?;
    }

    let a = group_key("https://example.com/mid1/sub1").map_err(|e| e.to_string())?;
    let b = group_key("https://example.com/mid1/sub2").map_err(|e| e.to_string())?;
    let c = group_key("https://example.com/mid2").map_err(|e| e.to_string())?;
    ensure(a == b && a != c, || format!("group keys {a}, {b}, {c}"))?;

    let examples: Vec<TrainingExample> = ["a", "b", "c", "d"]
        .iter()
        .map(|name| {
            let anchor = PageRecord::new(format!("https://f.test/{name}"), "<p/>");
            TrainingExample {
                group_key: "f.test".into(),
                anchor: anchor.clone(),
                reward_pages: vec![anchor],
                synthetic_gold: BTreeMap::new(),
                source: ExampleSource::Synthetic,
            }
        })
        .collect();
    let statuses = [ExecutionStatus::Ok, ExecutionStatus::Empty, ExecutionStatus::Timeout, ExecutionStatus::Ok];
    let runs: BTreeMap<String, ExecutionResult> = examples
        .iter()
        .zip(statuses)
        .map(|(e, status)| {
            let r = ExecutionResult {
                status,
                triples: Vec::new(),
                exit_code: None,
                stderr_tail: String::new(),
                wall_time: Duration::ZERO,
            };
            (e.anchor.url.clone(), r)
        })
        .collect();
    let failed: Vec<String> = failure_case_subset(&examples, &runs)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|e| e.anchor.url)
        .collect();
    ensure(failed == ["https://f.test/b", "https://f.test/c"], || format!("failure subset {failed:?}"))?;
    Ok(format!("{} groups match the recount; group_key and failure subset as expected", want.len()))
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let s = estimate_speedup(13, 8879.0f64, 2399.0).map_err(|e| e.to_string())?;
    ensure((s.rho - 3.7011).abs() <= 0.001, || format!("rho {}", s.rho))?;
    let first = (1..=20)
        .find(|&k| estimate_speedup(k, 8879.0, 2399.0).unwrap().speedup >= 1.0)
        .ok_or("never breaks even")?;
    ensure(first == 4, || format!("speedup first reaches 1 at k = {first}"))?;
    let be = break_even_k(8879.0, 2399.0).map_err(|e| e.to_string())?;
    ensure(be == 4, || format!("break_even_k {be}"))?;
    Ok(format!("rho = {:.4}, break-even at k = {first}", s.rho))
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = e2e_chain(work.path());
    let elapsed = start.elapsed();
    ensure(report == golden_report(), || format!("report differs from golden:\n{report}"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    let v: Value = serde_json::from_str(&report).map_err(|e| e.to_string())?;
    Ok(format!(
        "byte-identical, fuzzy All F1 {:.4}, {:.2}s",
        v["fuzzy"]["all"]["f1"].as_f64().unwrap_or(f64::NAN),
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let sentinel = std::env::temp_dir().join(format!("scribe-forge-pwned-{}", std::process::id()));
    let s = sentinel.display().to_string();
    let payloads: Vec<String> = vec![
        format!(r#"[["a", "b", __import__("os").system("touch {s}")]]"#),
        r#"[["a", "b", "c"]].__class__.__base__.__subclasses__()"#.into(),
        r#"eval('[["a", "b", "c"]]')"#.into(),
        r#"[[open("/etc/passwd").read(), "b", "c"]]"#.into(),
        r#"[["a", "b", "c"], exec("import os")]"#.into(),
        r#"[[f"{x}", "b", "c"]]"#.into(),
        r#"[["a" + "b", "c", "d"]]"#.into(),
        r#"lambda: [["a", "b", "c"]]"#.into(),
        r#"[[x for x in "abc"]]"#.into(),
        format!(r#"[["Dune", "author", "Frank Herbert"]] if os.system("touch {s}") else []"#),
    ];
    let wrappers: [fn(&str) -> String; 10] = [
        |p| p.to_string(),
        |p| format!("Here are the triples:\n{p}"),
        |p| format!("```python\n{p}\n```"),
        |p| format!("{p}\nI hope this helps."),
        |p| format!("[[\"Dune\", \"author\", \"Frank Herbert\"]]\n{p}"),
        |p| format!("{p}\n[[\"a\", \"b\", \"c\"]]"),
        |p| format!("print({p})"),
        |p| format!("getattr({p}, '__len__')()"),
        |p| format!("{p}; import subprocess; subprocess.run(['sh'])"),
        |p| format!("[{p}]"),
    ];
    let literal: BTreeSet<Triple> = [Triple::new("a", "b", "c"), Triple::new("Dune", "author", "Frank Herbert")].into();
    let (mut failed, mut parsed) = (0, 0);
    for (i, payload) in payloads.iter().enumerate() {
        for (j, wrap) in wrappers.iter().enumerate() {
            let response = wrap(payload);
            let result = catch_unwind(|| parse_triples_literal(&response)).map_err(|_| format!("case {i}/{j} panicked"))?;
            match result {
                Err(_) => failed += 1,
                Ok(t) => {
                    let stray: Vec<_> = t.triples.iter().filter(|t| !literal.contains(t)).collect();
                    ensure(stray.is_empty(), || format!("case {i}/{j}: non-literal triples {stray:?} from {response:?}"))?;
                    parsed += 1;
                }
            }
        }
    }
    ensure(!sentinel.exists(), || format!("{} was created", sentinel.display()))?;
    ensure(failed + parsed == 100, || format!("{} cases", failed + parsed))?;
    Ok(format!("100 responses: {failed} rejected, {parsed} reduced to literal triples, nothing executed"))
}

fn main() {
    type Check = (&'static str, fn() -> Outcome);
    let criteria: [Check; 9] = [
        ("assignment oracle equivalence", criterion_1),
        ("harmonic F1 reproduction", criterion_2),
        ("group reward identity", criterion_3),
        ("dedup keep-z", criterion_4),
        ("script runtime statuses", criterion_5),
        ("pipeline gates", criterion_6),
        ("efficiency accounting", criterion_7),
        ("end-to-end golden run", criterion_8),
        ("restricted literal parser safety", criterion_9),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name} ({detail})", i + 1),
            Err(why) => {
                failures += 1;
                println!("FAIL criterion {}: {name} ({why})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
