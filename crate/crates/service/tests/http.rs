mod support;

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;

use rfc_core::corpus::{extract_body_text, extract_page_title};
use rfc_core::ranker::Weights;
use rfc_service::api::{Health, NoFetch, PageFetcher, RfcResponse};
use rfc_service::{handle_related, AppState, RfcRequest, Snapshot, SnapshotPaths};

use support::{fixture_snapshot, fixtures, get, post, reweighted_copy, start_server, without_elapsed};

fn library_json(snapshot: &Snapshot, request: &RfcRequest, fetcher: &dyn PageFetcher) -> String {
    serde_json::to_string(&handle_related(snapshot, request, fetcher).unwrap()).unwrap()
}

fn article_requests(snapshot: &Snapshot) -> Vec<RfcRequest> {
    let mut requests: Vec<RfcRequest> = snapshot
        .articles
        .articles()
        .iter()
        .map(|a| RfcRequest {
            url: Some(a.url.clone()),
            title: Some(a.title.clone()),
            body: Some(a.body_text.clone()),
            max_results: None,
        })
        .collect();
    requests.push(RfcRequest {
        title: Some(snapshot.factchecks[3].claim_reviewed.clone()),
        max_results: Some(10),
        ..RfcRequest::default()
    });
    requests.push(RfcRequest {
        body: Some("nothing in this text is about any of the reviewed claims".into()),
        ..RfcRequest::default()
    });
    requests
}

#[test]
fn http_responses_equal_the_library_call() {
    let snapshot = fixture_snapshot();
    let requests = article_requests(&snapshot);
    let addr = start_server(Arc::new(AppState::new(Some(fixture_snapshot())).with_fetcher(Arc::new(NoFetch))));
    let mut non_empty = 0;
    for request in &requests {
        let body = serde_json::to_string(request).unwrap();
        let (status, first) = post(addr, "/v1/related", &body);
        assert_eq!(status, 200, "{first}");
        let (_, replay) = post(addr, "/v1/related", &body);
        let expected = without_elapsed(&library_json(&snapshot, request, &NoFetch));
        assert_eq!(without_elapsed(&first), expected);
        assert_eq!(without_elapsed(&replay), expected);
        let parsed: RfcResponse = serde_json::from_str(&first).unwrap();
        non_empty += usize::from(!parsed.fact_checks.is_empty());
    }
    assert!(non_empty >= 25, "{non_empty} of {} requests found fact checks", requests.len());
}

#[test]
fn responses_respect_cutoff_order_and_site() {
    let snapshot = fixture_snapshot();
    let t_l = snapshot.weights.t_l;
    let mut with_related = 0;
    for request in article_requests(&snapshot) {
        let response = handle_related(&snapshot, &request, &NoFetch).unwrap();
        let limit = request.max_results.unwrap_or(5);
        assert!(response.fact_checks.len() <= limit);
        assert!(response.fact_checks.iter().all(|f| f.score >= t_l));
        assert!(response.fact_checks.windows(2).all(|w| w[0].score >= w[1].score));
        assert_eq!(response.diagnostics.n_scored, snapshot.factchecks.len());
        assert_eq!(response.diagnostics.threshold, t_l);

        // related stories come from the returned fact checks' lists, on the
        // requesting site, never the requesting page itself
        let allowed: Vec<&str> = response
            .fact_checks
            .iter()
            .flat_map(|f| {
                let fc = snapshot.factchecks.iter().find(|x| x.url == f.url).unwrap();
                snapshot.related.get(&fc.id).iter().map(|(id, _)| id.as_str())
            })
            .collect();
        for story in &response.related_articles {
            let a = snapshot.articles.articles().iter().find(|a| a.url == story.url).unwrap();
            assert!(allowed.contains(&a.id.as_str()));
            assert_eq!(story.title, a.title);
            if let Some(url) = &request.url {
                assert_ne!(&story.url, url);
                assert!(url.contains(&story.site));
            }
        }
        with_related += usize::from(!response.related_articles.is_empty());
    }
    assert!(with_related > 0);
}

/// Serves the fixture article pages by their declared url.
struct FixturePages(HashMap<String, String>);

impl FixturePages {
    fn load() -> Self {
        let mut pages = HashMap::new();
        for entry in std::fs::read_dir(fixtures().join("articles")).unwrap() {
            let html = std::fs::read_to_string(entry.unwrap().path()).unwrap();
            let url = rfc_core::corpus::declared_url(&html).unwrap();
            pages.insert(url, html);
        }
        Self(pages)
    }
}

impl PageFetcher for FixturePages {
    fn fetch(&self, url: &str) -> Result<String, String> {
        self.0.get(url).cloned().ok_or_else(|| format!("no page at {url}"))
    }
}

#[test]
fn url_only_requests_fetch_and_extract_the_page() {
    let snapshot = fixture_snapshot();
    let pages = Arc::new(FixturePages::load());
    let addr = start_server(Arc::new(AppState::new(Some(fixture_snapshot())).with_fetcher(pages.clone())));
    for (url, html) in pages.0.iter().take(8) {
        let request = RfcRequest {
            url: Some(url.clone()),
            ..RfcRequest::default()
        };
        let (status, body) = post(addr, "/v1/related", &serde_json::to_string(&request).unwrap());
        assert_eq!(status, 200, "{body}");
        let explicit = RfcRequest {
            url: Some(url.clone()),
            title: Some(extract_page_title(html)),
            body: Some(extract_body_text(html)),
            max_results: None,
        };
        assert_eq!(without_elapsed(&body), without_elapsed(&library_json(&snapshot, &explicit, &NoFetch)));
    }
}

struct Panics;

impl PageFetcher for Panics {
    fn fetch(&self, _: &str) -> Result<String, String> {
        panic!("fetcher exploded")
    }
}

fn error_of(status_body: (u16, String)) -> (u16, String) {
    let (status, body) = status_body;
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert!(v["message"].as_str().is_some_and(|m| !m.is_empty()), "{body}");
    assert_eq!(v.as_object().unwrap().len(), 2, "{body}");
    (status, v["code"].as_str().unwrap().to_string())
}

#[test]
fn errors_are_structured() {
    let addr = start_server(Arc::new(AppState::new(Some(fixture_snapshot())).with_fetcher(Arc::new(NoFetch))));
    let cases = [
        ("{}", 400, "empty_input"),
        (r#"{"title": "  ", "body": ""}"#, 400, "empty_input"),
        (r#"{"max_results": 3}"#, 400, "empty_input"),
        ("{not json", 400, "invalid_json"),
        (r#"{"title": "x", "colour": "red"}"#, 400, "invalid_json"),
        (r#"{"title": "vaccines", "max_results": 0}"#, 400, "invalid_max_results"),
        (r#"{"title": "vaccines", "max_results": 51}"#, 400, "invalid_max_results"),
        (r#"{"url": "ftp://x.example/a"}"#, 400, "invalid_url"),
        (r#"{"url": "https://x.example/a"}"#, 502, "fetch_failed"),
    ];
    for (body, status, code) in cases {
        assert_eq!(error_of(post(addr, "/v1/related", body)), (status, code.to_string()), "{body}");
    }

    let resp = support::agent()
        .post(&format!("http://{addr}/v1/related"))
        .header("Content-Type", "text/plain")
        .send(r#"{"title": "vaccines"}"#)
        .unwrap();
    assert_eq!(resp.status().as_u16(), 415);
    assert_eq!(error_of(get(addr, "/v2/nothing")), (404, "not_found".to_string()));

    let panicky = start_server(Arc::new(AppState::new(Some(fixture_snapshot())).with_fetcher(Arc::new(Panics))));
    assert_eq!(
        error_of(post(panicky, "/v1/related", r#"{"url": "https://x.example/a"}"#)),
        (500, "internal".to_string())
    );
    // the server keeps serving after a fault
    let (status, _) = post(panicky, "/v1/related", r#"{"title": "vaccines"}"#);
    assert_eq!(status, 200);
}

#[test]
fn health_reports_identity_and_follows_swaps() {
    let state = Arc::new(AppState::new(None));
    let addr = start_server(state.clone());

    let (status, body) = get(addr, "/v1/health");
    assert_eq!(status, 503);
    let health: Health = serde_json::from_str(&body).unwrap();
    assert!(!health.ready && health.snapshot.is_none());
    assert_eq!(error_of(post(addr, "/v1/related", r#"{"title": "x"}"#)), (503, "not_ready".to_string()));

    let first = fixture_snapshot();
    let identity = first.identity.clone();
    state.swap(first);
    let (status, body) = get(addr, "/v1/health");
    assert_eq!(status, 200);
    let health: Health = serde_json::from_str(&body).unwrap();
    assert_eq!(health.status, "ok");
    assert_eq!(health.snapshot.as_ref(), Some(&identity));
    assert_eq!(identity.corpus_hash.len(), 64);

    // title-only weights: a request titled with a corpus claim gets that
    // fact check first at exactly w_title
    let title_only = reweighted_copy(Weights::new(1.0, 0.0, 0.0, 0.0, 0.0));
    let second = Snapshot::load(&SnapshotPaths::in_dir(title_only.path())).unwrap();
    let target = second.factchecks[7].clone();
    state.swap(second);
    let health: Health = serde_json::from_str(&get(addr, "/v1/health").1).unwrap();
    let swapped = health.snapshot.unwrap();
    assert_ne!(swapped.weights_hash, identity.weights_hash);
    assert_eq!(swapped.corpus_hash, identity.corpus_hash);
    assert_eq!(swapped.model_hash, identity.model_hash);
    assert_eq!(swapped.weights, Weights::new(1.0, 0.0, 0.0, 0.0, 0.0));

    let request = serde_json::json!({ "title": target.claim_reviewed }).to_string();
    let response: RfcResponse = serde_json::from_str(&post(addr, "/v1/related", &request).1).unwrap();
    assert_eq!(response.fact_checks[0].url, target.url);
    assert!((response.fact_checks[0].score - 1.0).abs() < 1e-12);
}

#[test]
fn every_response_comes_from_one_snapshot() {
    let a = fixture_snapshot();
    let other = reweighted_copy(Weights::new(1.0, 0.0, 0.5, 0.5, 0.1));
    let b = Snapshot::load(&SnapshotPaths::in_dir(other.path())).unwrap();
    let requests: Vec<RfcRequest> = article_requests(&a).into_iter().take(6).collect();
    let expected: Vec<[String; 2]> = requests
        .iter()
        .map(|r| {
            [
                without_elapsed(&library_json(&a, r, &NoFetch)),
                without_elapsed(&library_json(&b, r, &NoFetch)),
            ]
        })
        .collect();
    assert!(expected.iter().any(|[x, y]| x != y));

    let state = Arc::new(AppState::new(Some(a)).with_fetcher(Arc::new(NoFetch)));
    let addr = start_server(state.clone());
    let done = Arc::new(AtomicBool::new(false));
    let clients: Vec<_> = (0..4)
        .map(|t| {
            let requests = requests.clone();
            let expected = expected.clone();
            let done = done.clone();
            thread::spawn(move || {
                let mut seen = [0usize; 2];
                let mut i = t;
                while !done.load(Ordering::Relaxed) || i < t + 2 * requests.len() {
                    let k = i % requests.len();
                    let (status, body) = post(addr, "/v1/related", &serde_json::to_string(&requests[k]).unwrap());
                    assert_eq!(status, 200);
                    let body = without_elapsed(&body);
                    let which = expected[k].iter().position(|e| *e == body);
                    let which = which.unwrap_or_else(|| panic!("response matches neither snapshot: {body}"));
                    seen[which] += 1;
                    i += 1;
                }
                seen
            })
        })
        .collect();

    let paths = [SnapshotPaths::in_dir(support::fixture_dir()), SnapshotPaths::in_dir(other.path())];
    for round in 0..6 {
        state.swap(Snapshot::load(&paths[(round + 1) % 2]).unwrap());
    }
    done.store(true, Ordering::Relaxed);
    let served: usize = clients.into_iter().map(|c| c.join().unwrap().iter().sum::<usize>()).sum();
    assert!(served >= 4 * 2 * requests.len());

    // the last swap published the first snapshot again
    let (_, body) = post(addr, "/v1/related", &serde_json::to_string(&requests[0]).unwrap());
    assert_eq!(without_elapsed(&body), expected[0][0]);
}
