use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One result returned by an external search engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub url: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub snippet: String,
}

/// A source of candidate articles for a query, in engine rank order.
pub trait SearchAdapter: Send + Sync {
    fn search(&self, query: &[String], n: usize) -> Result<Vec<SearchHit>>;
}

/// Returns nothing for every query.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoSearch;

impl SearchAdapter for NoSearch {
    fn search(&self, _query: &[String], _n: usize) -> Result<Vec<SearchHit>> {
        Ok(Vec::new())
    }
}

/// Replays recorded responses keyed by the space-joined query terms.
/// Unknown queries are an error, mimicking an engine failure.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FixtureSearch {
    responses: BTreeMap<String, Vec<SearchHit>>,
}

impl FixtureSearch {
    pub fn new(responses: BTreeMap<String, Vec<SearchHit>>) -> Self {
        Self { responses }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("search fixture: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

impl SearchAdapter for FixtureSearch {
    fn search(&self, query: &[String], n: usize) -> Result<Vec<SearchHit>> {
        let key = query.join(" ");
        self.responses
            .get(&key)
            .map(|hits| hits.iter().take(n).cloned().collect())
            .ok_or_else(|| Error::Search(format!("no recorded response for {key:?}")))
    }
}
