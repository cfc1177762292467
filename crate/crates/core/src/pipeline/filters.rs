use std::collections::BTreeSet;
use std::path::Path;

use url::Url;

use super::{PageRecord, PipelineError};
use crate::html::flatten_html;

/// Blocked domains and URL keywords, one per line. Lines starting with
/// `keyword:` hold a case-insensitive substring of the URL; any other
/// non-blank line not starting with `#` is a domain that blocks itself and
/// all of its subdomains.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Blacklist {
    domains: BTreeSet<String>,
    keywords: Vec<String>,
}

impl Blacklist {
    pub fn parse(text: &str) -> Self {
        let mut list = Blacklist::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            match line.strip_prefix("keyword:") {
                Some(k) if !k.trim().is_empty() => list.keywords.push(k.trim().to_lowercase()),
                Some(_) => {}
                None => {
                    list.domains.insert(line.trim_start_matches("*.").trim_end_matches('.').to_ascii_lowercase());
                }
            }
        }
        list
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        std::fs::read_to_string(path)
            .map(|t| Self::parse(&t))
            .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty() && self.keywords.is_empty()
    }

    pub fn matches(&self, url: &str) -> bool {
        let lower = url.to_lowercase();
        if self.keywords.iter().any(|k| lower.contains(k)) {
            return true;
        }
        let Some(host) = Url::parse(url).ok().and_then(|u| u.host_str().map(str::to_ascii_lowercase)) else {
            return false;
        };
        let mut rest = host.as_str();
        loop {
            if self.domains.contains(rest) {
                return true;
            }
            match rest.split_once('.') {
                Some((_, tail)) => rest = tail,
                None => return false,
            }
        }
    }
}

/// Decides whether a page is in the target language.
pub trait LanguageFilter: Sync {
    fn accepts(&self, page: &PageRecord) -> bool;
}

/// Keeps everything.
#[derive(Debug, Clone, Copy, Default)]
pub struct AcceptAll;

impl LanguageFilter for AcceptAll {
    fn accepts(&self, _: &PageRecord) -> bool {
        true
    }
}

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been", "but", "by", "can",
    "for", "from", "had", "has", "have", "he", "her", "his", "how", "if", "in", "into", "is", "it", "its", "more",
    "my", "new", "no", "not", "of", "on", "one", "or", "our", "out", "she", "so", "than", "that", "the", "their",
    "them", "then", "there", "these", "they", "this", "to", "up", "was", "we", "were", "what", "when", "which",
    "who", "will", "with", "you", "your",
];

/// English detector used when no language model is plugged in. A declared
/// `detected_language` wins; otherwise the flattened text must be mostly
/// ASCII letters and, once long enough, hit common English function words.
#[derive(Debug, Clone, Copy)]
pub struct HeuristicEnglish {
    pub min_ascii_letter_ratio: f64,
    pub min_stopword_rate: f64,
    /// Below this many words only the letter ratio is checked.
    pub min_words_for_stopwords: usize,
}

impl Default for HeuristicEnglish {
    fn default() -> Self {
        HeuristicEnglish {
            min_ascii_letter_ratio: 0.8,
            min_stopword_rate: 0.05,
            min_words_for_stopwords: 40,
        }
    }
}

impl HeuristicEnglish {
    pub fn accepts_text(&self, text: &str) -> bool {
        let (letters, ascii) = text
            .chars()
            .filter(|c| c.is_alphabetic())
            .fold((0usize, 0usize), |(l, a), c| (l + 1, a + usize::from(c.is_ascii())));
        if letters == 0 {
            return true;
        }
        if (ascii as f64) < self.min_ascii_letter_ratio * letters as f64 {
            return false;
        }
        let words: Vec<String> = text
            .split(|c: char| !c.is_alphanumeric() && c != '\'')
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect();
        if words.len() < self.min_words_for_stopwords {
            return true;
        }
        let hits = words.iter().filter(|w| STOPWORDS.binary_search(&w.as_str()).is_ok()).count();
        hits as f64 >= self.min_stopword_rate * words.len() as f64
    }
}

impl LanguageFilter for HeuristicEnglish {
    fn accepts(&self, page: &PageRecord) -> bool {
        if let Some(lang) = &page.detected_language {
            let lang = lang.to_ascii_lowercase();
            return lang == "en" || lang.starts_with("en-") || lang.starts_with("en_") || lang == "eng";
        }
        self.accepts_text(&flatten_html(&page.document()))
    }
}
