//! Request and response types of the related-fact-checks endpoint and the
//! transport-independent handlers behind it.

use std::collections::HashSet;
use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use rfc_core::corpus::{extract_body_text, extract_page_title, fetch_one, normalize_url, site_of};

use crate::snapshot::{Snapshot, SnapshotIdentity};

pub const DEFAULT_MAX_RESULTS: usize = 5;
pub const MAX_RESULTS_LIMIT: usize = 50;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfcRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_results: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactCheckResult {
    pub url: String,
    pub publisher: String,
    pub title: String,
    pub claim_reviewed: String,
    pub rating_label: Option<String>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelatedStory {
    pub url: String,
    pub site: String,
    pub title: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_scored: usize,
    pub threshold: f64,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfcResponse {
    pub fact_checks: Vec<FactCheckResult>,
    pub related_articles: Vec<RelatedStory>,
    pub diagnostics: Diagnostics,
}

/// Structured error body; `status` is the HTTP status it maps to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: u16, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn empty_input() -> Self {
        Self::new(400, "empty_input", "request has no usable title, body or url")
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(500, "internal", message)
    }

    pub fn not_ready() -> Self {
        Self::new(503, "not_ready", "no snapshot loaded")
    }
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}): {}", self.code, self.status, self.message)
    }
}

impl std::error::Error for ApiError {}

/// Source of page HTML for url-only requests.
pub trait PageFetcher: Send + Sync {
    fn fetch(&self, url: &str) -> Result<String, String>;
}

pub struct HttpFetcher {
    pub timeout: Duration,
}

impl Default for HttpFetcher {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(10),
        }
    }
}

impl PageFetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<String, String> {
        fetch_one(url, self.timeout).map_err(|e| e.to_string())
    }
}

/// Refuses every fetch; for contexts that must stay offline.
pub struct NoFetch;

impl PageFetcher for NoFetch {
    fn fetch(&self, _: &str) -> Result<String, String> {
        Err("fetching is disabled".into())
    }
}

pub fn parse_request(bytes: &[u8]) -> Result<RfcRequest, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::new(400, "invalid_json", e.to_string()))
}

fn non_blank(s: &Option<String>) -> Option<&str> {
    s.as_deref().map(str::trim).filter(|s| !s.is_empty())
}

/// Title and body the request is scored on, fetching the page when only a
/// url was given.
fn article_text(request: &RfcRequest, fetcher: &dyn PageFetcher) -> Result<(String, String), ApiError> {
    let title = non_blank(&request.title);
    let body = non_blank(&request.body);
    if title.is_some() || body.is_some() {
        return Ok((title.unwrap_or("").to_string(), body.unwrap_or("").to_string()));
    }
    let Some(url) = non_blank(&request.url) else {
        return Err(ApiError::empty_input());
    };
    let html = fetcher
        .fetch(url)
        .map_err(|e| ApiError::new(502, "fetch_failed", format!("could not fetch the page: {e}")))?;
    let (title, body) = (extract_page_title(&html), extract_body_text(&html));
    if title.trim().is_empty() && body.trim().is_empty() {
        return Err(ApiError::new(422, "empty_input", "the fetched page has no text"));
    }
    Ok((title, body))
}

/// Retrieve fact checks for one article. The response depends only on the
/// snapshot and the request, apart from `elapsed_ms`.
pub fn handle_related(
    snapshot: &Snapshot,
    request: &RfcRequest,
    fetcher: &dyn PageFetcher,
) -> Result<RfcResponse, ApiError> {
    let started = Instant::now();
    let max_results = request.max_results.unwrap_or(DEFAULT_MAX_RESULTS);
    if max_results == 0 || max_results > MAX_RESULTS_LIMIT {
        return Err(ApiError::new(
            400,
            "invalid_max_results",
            format!("max_results must be between 1 and {MAX_RESULTS_LIMIT}"),
        ));
    }
    let url = non_blank(&request.url);
    let site = match url {
        Some(u) => {
            let lower = u.to_ascii_lowercase();
            if !(lower.starts_with("http://") || lower.starts_with("https://")) {
                return Err(ApiError::new(400, "invalid_url", "url must be an absolute http(s) url"));
            }
            Some(site_of(u).ok_or_else(|| ApiError::new(400, "invalid_url", "url has no host"))?)
        }
        None => None,
    };
    let (title, body) = article_text(request, fetcher)?;

    let features = snapshot.featurizer.article(&title, &body);
    let ranked = snapshot.index.retrieve(&features, &snapshot.weights, max_results);

    let mut fact_checks = Vec::with_capacity(ranked.len());
    for r in &ranked {
        let fc = snapshot
            .factcheck(&r.factcheck_id)
            .ok_or_else(|| ApiError::internal(format!("index refers to unknown fact check {}", r.factcheck_id)))?;
        fact_checks.push(FactCheckResult {
            url: fc.url.clone(),
            publisher: fc.publisher.clone(),
            title: fc.title.clone(),
            claim_reviewed: fc.claim_reviewed.clone(),
            rating_label: fc.rating_label.clone(),
            score: r.total,
        });
    }

    let own_url = url.map(normalize_url);
    let mut seen = HashSet::new();
    let mut related_articles = Vec::new();
    for r in &ranked {
        for (article_id, _) in snapshot.related.get(&r.factcheck_id) {
            let Some(a) = snapshot.articles.get(article_id) else {
                continue;
            };
            if site.as_ref().is_some_and(|s| *s != a.site)
                || own_url.as_ref().is_some_and(|u| *u == normalize_url(&a.url))
                || !seen.insert(article_id.as_str())
            {
                continue;
            }
            related_articles.push(RelatedStory {
                url: a.url.clone(),
                site: a.site.clone(),
                title: a.title.clone(),
            });
        }
    }

    Ok(RfcResponse {
        fact_checks,
        related_articles,
        diagnostics: Diagnostics {
            n_scored: snapshot.index.len(),
            threshold: snapshot.weights.t_l,
            elapsed_ms: started.elapsed().as_millis() as u64,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub ready: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<SnapshotIdentity>,
}

pub fn handle_health(snapshot: Option<&Snapshot>) -> Health {
    match snapshot {
        Some(s) => Health {
            status: "ok".into(),
            ready: true,
            snapshot: Some(s.identity.clone()),
        },
        None => Health {
            status: "not_ready".into(),
            ready: false,
            snapshot: None,
        },
    }
}
