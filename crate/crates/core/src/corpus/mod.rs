//! Fact-check and article corpora: ClaimReview extraction, page text,
//! normalization, deduplication and line-delimited persistence.

mod fetch;
mod markup;
mod store;
mod text;

use std::collections::{BTreeMap, HashSet};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use url::Url;

use crate::error::{Error, Result};

pub use fetch::{fetch_one, fetch_pages, FetchError, FetchReport};
pub use markup::{extract_claim_reviews, ExtractDiagnostics, Extraction};
pub use store::{load_corpus, save_corpus, LoadMode, Loaded, Record};
pub use text::{declared_url, extract_body_text, extract_page_title};

/// One reviewed claim taken from ClaimReview markup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactCheck {
    pub id: String,
    pub url: String,
    pub publisher: String,
    pub title: String,
    pub claim_reviewed: String,
    #[serde(default)]
    pub review_date: Option<NaiveDate>,
    #[serde(default)]
    pub rating_label: Option<String>,
    #[serde(default)]
    pub rating_value: Option<i64>,
    #[serde(default)]
    pub body_text: Option<String>,
}

impl FactCheck {
    /// Build a fact check with a derived id and publisher. Fails when the
    /// url is not absolute or the claim is blank.
    pub fn new(url: &str, title: &str, claim_reviewed: &str) -> Result<Self> {
        let parsed = Url::parse(url)
            .map_err(|e| Error::InvalidInput(format!("fact-check url {url:?}: {e}")))?;
        let claim = collapse_whitespace(claim_reviewed);
        if claim.is_empty() {
            return Err(Error::InvalidInput("empty claim_reviewed".into()));
        }
        Ok(Self {
            id: factcheck_id(url, &claim),
            url: url.to_string(),
            publisher: host_of(&parsed),
            title: collapse_whitespace(title),
            claim_reviewed: claim,
            review_date: None,
            rating_label: None,
            rating_value: None,
            body_text: None,
        })
    }

    /// Title, claim and page text joined; the text the shared vocabulary and
    /// topic model are built from.
    pub fn full_text(&self) -> String {
        format!(
            "{}\n{}\n{}",
            self.title,
            self.claim_reviewed,
            self.body_text.as_deref().unwrap_or("")
        )
    }
}

/// A news page to be checked against the fact-check corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub url: String,
    pub site: String,
    pub title: String,
    pub body_text: String,
    #[serde(default)]
    pub fetched_at: Option<DateTime<Utc>>,
}

impl Article {
    pub fn new(url: &str, title: &str, body_text: &str) -> Result<Self> {
        let parsed = Url::parse(url)
            .map_err(|e| Error::InvalidInput(format!("article url {url:?}: {e}")))?;
        if title.trim().is_empty() && body_text.trim().is_empty() {
            return Err(Error::InvalidInput(format!("article {url} has no text")));
        }
        Ok(Self {
            id: article_id(url),
            url: url.to_string(),
            site: host_of(&parsed),
            title: collapse_whitespace(title),
            body_text: body_text.trim().to_string(),
            fetched_at: None,
        })
    }

    /// Title from `<title>`/`og:title`, body from visible block text.
    pub fn from_html(html: &str, url: &str, fetched_at: Option<DateTime<Utc>>) -> Result<Self> {
        let mut article = Self::new(url, &extract_page_title(html), &extract_body_text(html))?;
        article.fetched_at = fetched_at;
        Ok(article)
    }
}

/// Per-site counts of a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub n_factchecks: usize,
    pub n_sites: usize,
    pub n_articles: usize,
    pub per_site_counts: BTreeMap<String, usize>,
}

impl CorpusStats {
    pub fn compute(factchecks: &[FactCheck], articles: &[Article]) -> Self {
        let mut per_site_counts = BTreeMap::new();
        for fc in factchecks {
            *per_site_counts.entry(fc.publisher.clone()).or_insert(0) += 1;
        }
        Self {
            n_factchecks: factchecks.len(),
            n_sites: per_site_counts.len(),
            n_articles: articles.len(),
            per_site_counts,
        }
    }
}

/// Collapse fact checks that share a normalized (url, claim) key, keeping
/// the first occurrence and the input order.
pub fn dedupe(records: Vec<FactCheck>) -> Vec<FactCheck> {
    let mut seen = HashSet::new();
    records
        .into_iter()
        .filter(|fc| seen.insert(dedupe_key(fc)))
        .collect()
}

fn dedupe_key(fc: &FactCheck) -> (String, String) {
    (normalize_url(&fc.url), normalize_claim(&fc.claim_reviewed))
}

const TRACKING_PARAMS: &[&str] = &[
    "fbclid", "gclid", "dclid", "msclkid", "mc_cid", "mc_eid", "igshid", "_ga", "ref_src",
];

fn is_tracking_param(name: &str) -> bool {
    let name = name.to_ascii_lowercase();
    name.starts_with("utm_") || TRACKING_PARAMS.contains(&name.as_str())
}

/// Lowercased url without tracking query parameters or fragment.
pub fn normalize_url(raw: &str) -> String {
    let Ok(mut url) = Url::parse(raw.trim()) else {
        return raw.trim().to_lowercase();
    };
    url.set_fragment(None);
    let kept: Vec<(String, String)> = url
        .query_pairs()
        .filter(|(k, _)| !is_tracking_param(k))
        .map(|(k, v)| (k.into_owned(), v.into_owned()))
        .collect();
    if kept.is_empty() {
        url.set_query(None);
    } else {
        url.query_pairs_mut().clear().extend_pairs(kept);
    }
    url.as_str().to_lowercase()
}

/// Casefolded claim text with whitespace runs collapsed.
pub fn normalize_claim(claim: &str) -> String {
    collapse_whitespace(&claim.to_lowercase())
}

pub(crate) fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Hostname without a leading `www.`.
pub fn host_of(url: &Url) -> String {
    let host = url.host_str().unwrap_or_default().to_lowercase();
    host.strip_prefix("www.").map(str::to_string).unwrap_or(host)
}

pub fn site_of(raw: &str) -> Option<String> {
    Url::parse(raw).ok().map(|u| host_of(&u)).filter(|h| !h.is_empty())
}

fn short_hash(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    hex::encode(&h.finalize()[..8])
}

pub fn factcheck_id(url: &str, claim: &str) -> String {
    format!("fc-{}", short_hash(&[&normalize_url(url), &normalize_claim(claim)]))
}

pub fn article_id(url: &str) -> String {
    format!("art-{}", short_hash(&[&normalize_url(url)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fc(url: &str, claim: &str) -> FactCheck {
        FactCheck::new(url, "t", claim).unwrap()
    }

    #[test]
    fn exact_duplicate_collapses() {
        let a = fc("https://example.org/fc/1", "The moon is cheese.");
        let out = dedupe(vec![a.clone(), a.clone()]);
        assert_eq!(out, vec![a]);
    }

    #[test]
    fn same_url_different_claim_kept() {
        let a = fc("https://example.org/fc/1", "The moon is cheese.");
        let b = fc("https://example.org/fc/1", "The sun is cold.");
        assert_eq!(dedupe(vec![a.clone(), b.clone()]), vec![a, b]);
    }

    #[test]
    fn normalization_ignores_tracking_case_and_spacing() {
        let a = fc("https://Example.org/fc/1?utm_source=x&id=3", "The  Moon is\ncheese.");
        let b = fc("https://example.org/fc/1?id=3#top", "the moon is cheese.");
        let out = dedupe(vec![a.clone(), b]);
        assert_eq!(out, vec![a]);
        assert_eq!(normalize_url("https://x.org/a?utm_medium=m"), "https://x.org/a");
    }

    #[test]
    fn many_unique_records_survive() {
        let records: Vec<_> = (0..5350)
            .map(|i| fc(&format!("https://site{}.org/fc/{i}", i % 45), &format!("claim {i}")))
            .collect();
        let out = dedupe(records.clone());
        assert_eq!(out.len(), 5350);
        assert_eq!(out, records);
        let stats = CorpusStats::compute(&out, &[]);
        assert_eq!(stats.n_factchecks, 5350);
        assert_eq!(stats.n_sites, 45);
        assert_eq!(stats.per_site_counts.values().sum::<usize>(), 5350);
    }

    #[test]
    fn constructor_invariants() {
        assert!(FactCheck::new("/relative", "t", "claim").is_err());
        assert!(FactCheck::new("https://x.org/a", "t", "  \n ").is_err());
        assert!(Article::new("https://x.org/a", " ", "").is_err());
        let a = Article::new("https://www.news.example/a", "Title", "").unwrap();
        assert_eq!(a.site, "news.example");
    }
}
