#![allow(dead_code)]

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::sync::{Arc, OnceLock};
use std::thread;

use clap::Parser;

use rfc_core::ranker::Weights;
use rfc_service::cli::{run, Cli};
use rfc_service::server::serve;
use rfc_service::{AppState, Snapshot, SnapshotPaths};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixtures() -> PathBuf {
    repo_root().join("fixtures")
}

/// Run the CLI in-process and return what it printed.
pub fn rfc(data_dir: &Path, args: &[&str]) -> anyhow::Result<String> {
    let mut argv = vec!["rfc", "--data-dir", data_dir.to_str().unwrap(), "--seed", "7"];
    argv.extend_from_slice(args);
    let cli = Cli::try_parse_from(argv)?;
    let mut out = Vec::new();
    run(cli, &mut out)?;
    Ok(String::from_utf8(out)?)
}

/// The full pipeline over the repository fixtures, as in
/// `scripts/fixture-snapshot.sh`.
pub fn build_fixture_snapshot(dir: &Path) {
    let fx = |name: &str| fixtures().join(name).display().to_string();
    let (factchecks, articles) = (fx("factchecks"), fx("articles"));
    let (labels, grid) = (fx("labels.jsonl"), fx("grid.toml"));
    let steps: [&[&str]; 7] = [
        &["ingest", &factchecks],
        &["articles", &articles],
        &["index"],
        &["train-topics", "--topics", "8", "--iterations", "500"],
        &["set-thematic", "0,5"],
        &["tune", "--labels", &labels, "--grid", &grid],
        &["related-precompute"],
    ];
    for step in steps {
        rfc(dir, step).unwrap_or_else(|e| panic!("{step:?}: {e:#}"));
    }
}

/// One fixture snapshot directory per test binary.
pub fn fixture_dir() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        build_fixture_snapshot(dir.path());
        dir
    })
    .path()
}

pub fn fixture_snapshot() -> Snapshot {
    Snapshot::load(&SnapshotPaths::in_dir(fixture_dir())).unwrap()
}

/// Copy of the fixture snapshot with different weights.
pub fn reweighted_copy(weights: Weights) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(fixture_dir()).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
    }
    weights.save(&dir.path().join("weights.toml")).unwrap();
    dir
}

/// Serve `state` on an ephemeral port from a background runtime.
pub fn start_server(state: Arc<AppState>) -> SocketAddr {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            serve(listener, state, std::future::pending()).await.unwrap();
        });
    });
    rx.recv().unwrap()
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into()
}

/// (status, body) of a JSON POST.
pub fn post(addr: SocketAddr, path: &str, body: &str) -> (u16, String) {
    let mut resp = agent()
        .post(&format!("http://{addr}{path}"))
        .header("Content-Type", "application/json")
        .send(body)
        .unwrap();
    let status = resp.status().as_u16();
    (status, resp.body_mut().read_to_string().unwrap())
}

pub fn get(addr: SocketAddr, path: &str) -> (u16, String) {
    let mut resp = agent().get(&format!("http://{addr}{path}")).call().unwrap();
    let status = resp.status().as_u16();
    (status, resp.body_mut().read_to_string().unwrap())
}

/// Response text with the elapsed time zeroed; everything else must be
/// byte-identical between equal requests.
pub fn without_elapsed(json: &str) -> String {
    let key = "\"elapsed_ms\":";
    let Some(start) = json.find(key) else {
        return json.to_string();
    };
    let digits = start + key.len();
    let end = json[digits..]
        .find(|c: char| !c.is_ascii_digit())
        .map_or(json.len(), |i| digits + i);
    format!("{}0{}", &json[..digits], &json[end..])
}
