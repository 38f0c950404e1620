//! Polite page fetching for explicit URL lists.

use std::collections::{BTreeMap, HashSet};
use std::thread;
use std::time::{Duration, Instant};

use url::Url;

use crate::error::{Error, Result};

const TIMEOUT: Duration = Duration::from_secs(20);
const USER_AGENT: &str = concat!("rfc/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchError {
    pub url: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct FetchReport {
    /// (url, html) in input order.
    pub pages: Vec<(String, String)>,
    pub errors: Vec<FetchError>,
}

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .user_agent(USER_AGENT)
        .build()
        .into()
}

fn get(agent: &ureq::Agent, url: &str) -> std::result::Result<String, String> {
    let mut resp = agent.get(url).call().map_err(|e| e.to_string())?;
    let bytes = resp.body_mut().read_to_vec().map_err(|e| e.to_string())?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

/// Fetch a single page; non-success statuses are errors.
pub fn fetch_one(url: &str, timeout: Duration) -> Result<String> {
    get(&agent(timeout), url).map_err(|message| Error::Fetch {
        url: url.to_string(),
        message,
    })
}

/// Fetch each distinct URL once. Hosts are fetched concurrently, requests
/// to the same host are serialized and spaced at least `1 / rate_limit`
/// seconds apart. Failures are collected, never fatal.
pub fn fetch_pages(urls: &[String], rate_limit: f64) -> Result<FetchReport> {
    if urls.is_empty() {
        return Err(Error::InvalidInput("no urls to fetch".into()));
    }
    if !(rate_limit > 0.0 && rate_limit.is_finite()) {
        return Err(Error::InvalidInput(format!("rate limit {rate_limit} must be > 0")));
    }
    let gap = Duration::from_secs_f64(1.0 / rate_limit);

    let mut seen = HashSet::new();
    let unique: Vec<&String> = urls.iter().filter(|u| seen.insert(u.as_str())).collect();

    let mut errors = Vec::new();
    let mut by_host: BTreeMap<String, Vec<(usize, &str)>> = BTreeMap::new();
    for (pos, url) in unique.iter().enumerate() {
        match Url::parse(url) {
            Ok(u) if u.host_str().is_some() => {
                let key = format!("{}:{}", u.host_str().unwrap_or_default(), u.port_or_known_default().unwrap_or(0));
                by_host.entry(key).or_default().push((pos, url.as_str()));
            }
            Ok(_) | Err(_) => errors.push((
                pos,
                FetchError {
                    url: url.to_string(),
                    message: "not an absolute http(s) url".into(),
                },
            )),
        }
    }

    let agent = agent(TIMEOUT);
    let mut outcomes: Vec<(usize, std::result::Result<String, String>)> = thread::scope(|s| {
        let handles: Vec<_> = by_host
            .values()
            .map(|batch| {
                let agent = &agent;
                s.spawn(move || {
                    let mut last: Option<Instant> = None;
                    batch
                        .iter()
                        .map(|&(pos, url)| {
                            if let Some(t) = last {
                                let wait = gap.saturating_sub(t.elapsed());
                                thread::sleep(wait);
                            }
                            last = Some(Instant::now());
                            (pos, get(agent, url))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("fetch worker panicked"))
            .collect()
    });
    outcomes.sort_by_key(|(pos, _)| *pos);

    let mut report = FetchReport::default();
    for (pos, outcome) in outcomes {
        match outcome {
            Ok(html) => report.pages.push((unique[pos].clone(), html)),
            Err(message) => errors.push((
                pos,
                FetchError {
                    url: unique[pos].clone(),
                    message,
                },
            )),
        }
    }
    errors.sort_by_key(|(pos, _)| *pos);
    report.errors = errors.into_iter().map(|(_, e)| e).collect();
    Ok(report)
}
