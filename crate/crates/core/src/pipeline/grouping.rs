use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use url::Url;

use super::filters::{Blacklist, LanguageFilter};
use super::{PageGroup, PageRecord, PipelineError, PipelineThresholds};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingMode {
    /// Host plus the path with its final segment removed.
    #[default]
    Prefix,
    /// Host only.
    Domain,
}

/// Host (lowercased, with any non-default port) followed by the path minus
/// its final segment. Scheme, query and fragment never take part, and the key
/// never ends in a slash: `https://Example.com/mid1/sub1?x=1` gives
/// `example.com/mid1`, `https://example.com/mid2` and `https://example.com/`
/// both give `example.com`.
pub fn group_key(url: &str) -> Result<String, PipelineError> {
    group_key_with(url, GroupingMode::Prefix)
}

pub fn group_key_with(url: &str, mode: GroupingMode) -> Result<String, PipelineError> {
    let parsed = Url::parse(url).map_err(|e| PipelineError::MalformedUrl(format!("{url}: {e}")))?;
    let host = parsed
        .host_str()
        .filter(|h| !h.is_empty())
        .ok_or_else(|| PipelineError::MalformedUrl(format!("{url}: no host")))?
        .to_ascii_lowercase();
    let mut key = match parsed.port() {
        Some(port) => format!("{host}:{port}"),
        None => host,
    };
    if mode == GroupingMode::Prefix {
        let path = parsed.path();
        if let Some((prefix, _last)) = path.rsplit_once('/') {
            let prefix = prefix.trim_end_matches('/');
            if !prefix.is_empty() {
                key.push_str(prefix);
            }
        }
    }
    Ok(key)
}

/// Counts of records removed before grouping.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub input: usize,
    pub malformed: usize,
    pub duplicate: usize,
    pub blacklisted: usize,
    pub non_english: usize,
    pub small_groups: usize,
    pub groups: usize,
}

/// Sets `blacklist_flag` on every record the blacklist matches.
pub fn mark_blacklisted(records: &mut [PageRecord], blacklist: &Blacklist) {
    for r in records {
        r.blacklist_flag |= blacklist.matches(&r.url);
    }
}

/// Drops flagged and non-English pages, groups the rest by key and keeps
/// groups with at least `n` distinct URLs. Groups come out sorted by key,
/// pages by URL.
pub fn filter_and_group(
    records: impl IntoIterator<Item = PageRecord>,
    thresholds: &PipelineThresholds,
    mode: GroupingMode,
    language: &dyn LanguageFilter,
) -> (Vec<PageGroup>, FilterStats) {
    let mut stats = FilterStats::default();
    let mut seen = BTreeSet::new();
    let mut by_key: BTreeMap<String, BTreeMap<String, PageRecord>> = BTreeMap::new();
    for rec in records {
        stats.input += 1;
        let key = match group_key_with(&rec.url, mode) {
            Ok(k) => k,
            Err(e) => {
                log::warn!("skipping record: {e}");
                stats.malformed += 1;
                continue;
            }
        };
        if !seen.insert(rec.url.clone()) {
            stats.duplicate += 1;
            continue;
        }
        if rec.blacklist_flag {
            stats.blacklisted += 1;
            continue;
        }
        if !language.accepts(&rec) {
            stats.non_english += 1;
            continue;
        }
        by_key.entry(key).or_default().insert(rec.url.clone(), rec);
    }
    let mut groups = Vec::new();
    for (key, pages) in by_key {
        if pages.len() < thresholds.n {
            stats.small_groups += 1;
            continue;
        }
        groups.push(PageGroup {
            key,
            pages: pages.into_values().collect(),
            classified_semi_structured: BTreeMap::new(),
        });
    }
    stats.groups = groups.len();
    (groups, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::filters::AcceptAll;

    #[test]
    fn prefix_examples() {
        let a = group_key("https://example.com/mid1/sub1").unwrap();
        assert_eq!(a, "example.com/mid1");
        assert_eq!(group_key("https://example.com/mid1/sub2").unwrap(), a);
        assert_eq!(group_key("https://example.com/mid2").unwrap(), "example.com");
        assert_eq!(group_key("https://example.com/").unwrap(), "example.com");
        assert_eq!(group_key("https://example.com").unwrap(), "example.com");
        assert_eq!(group_key("http://EXAMPLE.com/a/b/c?q=1#f").unwrap(), "example.com/a/b");
        assert_eq!(group_key("http://example.com:8080/a/b").unwrap(), "example.com:8080/a");
        assert_eq!(group_key("https://example.com//a").unwrap(), "example.com");
    }

    #[test]
    fn trailing_slash_is_an_empty_final_segment() {
        assert_eq!(group_key("https://example.com/mid1/").unwrap(), "example.com/mid1");
        assert_eq!(group_key("https://example.com/mid1//").unwrap(), "example.com/mid1");
    }

    #[test]
    fn domain_mode_and_errors() {
        assert_eq!(
            group_key_with("https://example.com/a/b", GroupingMode::Domain).unwrap(),
            "example.com"
        );
        assert!(matches!(group_key("not a url"), Err(PipelineError::MalformedUrl(_))));
        assert!(group_key("mailto:a@b.c").is_err());
    }

    fn rec(url: &str) -> PageRecord {
        PageRecord::new(url, "<p>the page</p>")
    }

    #[test]
    fn thresholds_gate_groups() {
        let t = PipelineThresholds {
            n: 30,
            ..Default::default()
        };
        let big = (0..35).map(|i| rec(&format!("https://a.com/x/{i}")));
        let small = (0..29).map(|i| rec(&format!("https://b.com/y/{i}")));
        let (groups, stats) = filter_and_group(big.chain(small), &t, GroupingMode::Prefix, &AcceptAll);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].key, "a.com/x");
        assert_eq!(groups[0].pages.len(), 35);
        assert_eq!(stats.small_groups, 1);
    }

    #[test]
    fn flags_and_duplicates() {
        let t = PipelineThresholds {
            n: 1,
            k: 1,
            ..Default::default()
        };
        let mut recs = vec![rec("https://a.com/x/1"), rec("https://a.com/x/1"), rec("https://bad.com/x/1"), rec("::")];
        mark_blacklisted(&mut recs, &Blacklist::parse("bad.com\n"));
        let (groups, stats) = filter_and_group(recs, &t, GroupingMode::Prefix, &AcceptAll);
        assert_eq!(groups.len(), 1);
        assert_eq!((stats.duplicate, stats.blacklisted, stats.malformed), (1, 1, 1));
    }
}
