//! Command-line driver for every pipeline stage and the server.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use url::Url;

use rfc_core::corpus::{
    declared_url, dedupe, extract_claim_reviews, fetch_pages, save_corpus, Article, CorpusStats,
    ExtractDiagnostics,
};
use rfc_core::ranker::{
    build_factcheck_indexes, precompute_related, ArticleIndex, FactCheckBody, FixtureSearch,
    SearchAdapter, Weights,
};
use rfc_core::textproc::{tokenize, Vocabulary};
use rfc_core::topics::{set_thematic, top_documents, train_lda, LdaParams};
use rfc_core::tuner_eval::{
    ablation_configs, component_tables, evaluate, tune_weights, ComponentTable, Grid, LabelSet,
    EVAL_K,
};

use crate::api::{handle_related, HttpFetcher, NoFetch, PageFetcher, RfcRequest};
use crate::server::{serve, AppState};
use crate::snapshot::{
    featurizer_for, load_articles, load_factcheck_index, load_factchecks, load_model, load_vocab,
    Snapshot, SnapshotPaths,
};

#[derive(Debug, Parser)]
#[command(name = "rfc", version, about = "Fact-check retrieval for news articles: build, tune and serve")]
pub struct Cli {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Data directory holding the snapshot files.
    #[arg(long, global = true, env = "RFC_SNAPSHOT_DIR", default_value = "snapshot")]
    pub data_dir: PathBuf,

    /// Fact-check corpus [default: <data-dir>/factchecks.jsonl]
    #[arg(long, global = true)]
    pub factchecks: Option<PathBuf>,

    /// Article corpus [default: <data-dir>/articles.jsonl]
    #[arg(long, global = true)]
    pub articles: Option<PathBuf>,

    /// Topic model [default: <data-dir>/topics.model]
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,

    /// Scoring weights [default: <data-dir>/weights.toml]
    #[arg(long, global = true)]
    pub weights: Option<PathBuf>,

    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

impl DataArgs {
    pub fn paths(&self) -> SnapshotPaths {
        let mut p = SnapshotPaths::in_dir(&self.data_dir);
        if let Some(f) = &self.factchecks {
            p.factchecks = f.clone();
        }
        if let Some(a) = &self.articles {
            p.articles = a.clone();
        }
        if let Some(m) = &self.model {
            p.model = m.clone();
        }
        if let Some(w) = &self.weights {
            p.weights = w.clone();
        }
        p
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract fact checks from pages (directories of .html files, single
    /// .html files or text files listing URLs).
    Ingest(FetchArgs),
    /// Build the article corpus from pages.
    Articles(FetchArgs),
    /// Build the vocabulary and the claim and body indexes.
    Index,
    /// Train the topic model on the fact-check corpus.
    TrainTopics {
        #[arg(long, default_value_t = 300)]
        topics: usize,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        /// Document-topic prior [default: 50 / topics]
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        beta: f64,
    },
    /// Show a topic's top words and top fact checks.
    InspectTopic {
        topic: usize,
        #[arg(long, default_value_t = 10)]
        words: usize,
        #[arg(long, default_value_t = 5)]
        documents: usize,
    },
    /// Mark topics as thematic, replacing the current set.
    SetThematic {
        #[arg(value_delimiter = ',')]
        topics: Vec<usize>,
    },
    /// Precompute related articles for every fact check.
    RelatedPrecompute {
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        query_terms: usize,
        /// Canned search responses keyed by query.
        #[arg(long)]
        search_fixture: Option<PathBuf>,
    },
    /// Grid-search the weights on labeled pairs and write them.
    Tune {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        grid: PathBuf,
    },
    /// Ablation report over labeled pairs.
    Eval {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = EVAL_K)]
        k: usize,
        /// Also write the report rows as JSON lines.
        #[arg(long)]
        jsonl: Option<PathBuf>,
    },
    /// One-shot retrieval; prints the response JSON.
    Query {
        #[arg(long)]
        url: Option<String>,
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        body: Option<String>,
        #[arg(long)]
        max_results: Option<usize>,
        /// Allow fetching the page for url-only queries.
        #[arg(long)]
        fetch: bool,
    },
    /// Serve the HTTP API. SIGHUP reloads the snapshot.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Log request urls.
        #[arg(long)]
        log_requests: bool,
    },
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Requests per second per host.
    #[arg(long, default_value_t = 1.0)]
    pub rate_limit: f64,
}

/// Pages named by the inputs as (source url, html). Local files use their
/// declared url, or a file url when they have none.
fn collect_pages(args: &FetchArgs) -> Result<Vec<(String, String)>> {
    let mut files = Vec::new();
    let mut urls = Vec::new();
    for input in &args.inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .with_context(|| input.display().to_string())?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| is_html(p))
                .collect();
            found.sort();
            files.extend(found);
        } else if is_html(input) {
            files.push(input.clone());
        } else {
            let text = fs::read_to_string(input).with_context(|| input.display().to_string())?;
            urls.extend(
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(str::to_string),
            );
        }
    }

    let mut pages = Vec::new();
    for path in files {
        let html = fs::read_to_string(&path).with_context(|| path.display().to_string())?;
        let url = match declared_url(&html) {
            Some(u) => u,
            None => {
                let abs = fs::canonicalize(&path)?;
                Url::from_file_path(&abs)
                    .map_err(|_| anyhow!("no file url for {}", abs.display()))?
                    .to_string()
            }
        };
        pages.push((url, html));
    }
    if !urls.is_empty() {
        let report = fetch_pages(&urls, args.rate_limit)?;
        for e in &report.errors {
            log::warn!("fetch failed: {}: {}", e.url, e.message);
        }
        eprintln!("fetched {} of {} urls", report.pages.len(), urls.len());
        pages.extend(report.pages);
    }
    Ok(pages)
}

fn is_html(p: &Path) -> bool {
    p.is_file()
        && p.extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("html") || e.eq_ignore_ascii_case("htm"))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| parent.display().to_string())?;
    }
    Ok(())
}

fn ingest(paths: &SnapshotPaths, args: &FetchArgs, out: &mut dyn Write) -> Result<()> {
    let pages = collect_pages(args)?;
    let mut raw = Vec::new();
    let mut diagnostics = ExtractDiagnostics::default();
    for (url, html) in &pages {
        match extract_claim_reviews(html, url) {
            Ok(ex) => {
                diagnostics.merge(&ex.diagnostics);
                raw.extend(ex.fact_checks);
            }
            Err(e) => log::warn!("skipping {url}: {e}"),
        }
    }
    let n_raw = raw.len();
    let factchecks = dedupe(raw);
    if factchecks.is_empty() {
        bail!("no ClaimReview markup found in {} pages", pages.len());
    }
    ensure_parent(&paths.factchecks)?;
    save_corpus(&factchecks, &paths.factchecks)?;
    let stats = CorpusStats::compute(&factchecks, &[]);
    writeln!(
        out,
        "{} pages, {} reviews, {} after dedupe ({} JSON-LD parse errors, {} without a claim)",
        pages.len(),
        n_raw,
        factchecks.len(),
        diagnostics.jsonld_parse_errors,
        diagnostics.missing_claim
    )?;
    for (site, n) in &stats.per_site_counts {
        writeln!(out, "  {site}\t{n}")?;
    }
    writeln!(out, "wrote {}", paths.factchecks.display())?;
    Ok(())
}

fn articles(paths: &SnapshotPaths, args: &FetchArgs, out: &mut dyn Write) -> Result<()> {
    let pages = collect_pages(args)?;
    let mut seen = BTreeSet::new();
    let mut articles = Vec::new();
    for (url, html) in &pages {
        match Article::from_html(html, url, None) {
            Ok(a) => {
                if seen.insert(a.id.clone()) {
                    articles.push(a);
                }
            }
            Err(e) => log::warn!("skipping {url}: {e}"),
        }
    }
    if articles.is_empty() {
        bail!("no usable article pages");
    }
    ensure_parent(&paths.articles)?;
    save_corpus(&articles, &paths.articles)?;
    let mut per_site: BTreeMap<&str, usize> = BTreeMap::new();
    for a in &articles {
        *per_site.entry(a.site.as_str()).or_default() += 1;
    }
    writeln!(out, "{} pages, {} articles", pages.len(), articles.len())?;
    for (site, n) in per_site {
        writeln!(out, "  {site}\t{n}")?;
    }
    writeln!(out, "wrote {}", paths.articles.display())?;
    Ok(())
}

fn index(paths: &SnapshotPaths, out: &mut dyn Write) -> Result<()> {
    let factchecks = load_factchecks(&paths.factchecks)?;
    let docs: Vec<Vec<String>> = factchecks.iter().map(|f| tokenize(&f.full_text())).collect();
    let vocab = Arc::new(Vocabulary::build(&docs)?);
    let (claims, bodies) = build_factcheck_indexes(&factchecks, vocab.clone(), FactCheckBody::PageText)?;
    fs::create_dir_all(&paths.dir)?;
    vocab.save(&paths.vocab())?;
    claims.save(&paths.claims_index())?;
    bodies.save(&paths.bodies_index())?;
    writeln!(
        out,
        "{} fact checks, {} terms; wrote {}",
        factchecks.len(),
        vocab.len(),
        paths.dir.display()
    )?;
    Ok(())
}

fn train_topics(
    paths: &SnapshotPaths,
    params: LdaParams,
    out: &mut dyn Write,
) -> Result<()> {
    let vocab = load_vocab(paths)?;
    let factchecks = load_factchecks(&paths.factchecks)?;
    let bows: Vec<_> = factchecks.iter().map(|f| vocab.bow_of(&f.full_text())).collect();
    let (model, report) = train_lda(&bows, vocab, &params)?;
    ensure_parent(&paths.model)?;
    model.save(&paths.model)?;
    writeln!(
        out,
        "k={} alpha={} beta={} iterations={} seed={}: {} documents ({} empty), {} tokens; wrote {}",
        model.k(),
        model.alpha(),
        model.beta(),
        model.iterations(),
        model.seed(),
        report.documents,
        report.skipped_empty,
        report.tokens,
        paths.model.display()
    )?;
    Ok(())
}

fn inspect_topic(
    paths: &SnapshotPaths,
    topic: usize,
    words: usize,
    documents: usize,
    out: &mut dyn Write,
) -> Result<()> {
    let featurizer = featurizer_for(load_model(paths, load_vocab(paths)?)?);
    let top = featurizer.model().top_words(topic, words)?;
    let factchecks = load_factchecks(&paths.factchecks)?;
    let index = load_factcheck_index(paths, &factchecks, &featurizer)?;
    let thematic = featurizer.model().thematic_ids().contains(&topic);
    writeln!(out, "topic {topic}{}", if thematic { " (thematic)" } else { "" })?;
    for (w, p) in top {
        writeln!(out, "  {w}\t{p:.4}")?;
    }
    let ids = top_documents(
        index.ids().iter().enumerate().map(|(i, id)| (id.as_str(), index.mixture_at(i))),
        topic,
        documents,
    );
    for id in ids {
        let pos = index.ids().iter().position(|x| *x == id).unwrap_or_default();
        writeln!(
            out,
            "  {:.3}\t{}\t{}",
            index.mixture_at(pos).weight(topic),
            id,
            factchecks[pos].claim_reviewed
        )?;
    }
    Ok(())
}

fn set_thematic_topics(paths: &SnapshotPaths, topics: &[usize], out: &mut dyn Write) -> Result<()> {
    let model = load_model(paths, load_vocab(paths)?)?;
    let model = set_thematic(model, topics.iter().copied().collect())?;
    model.save(&paths.model)?;
    writeln!(out, "thematic topics: {:?}", model.thematic_ids())?;
    Ok(())
}

fn related_precompute(
    paths: &SnapshotPaths,
    n: usize,
    query_terms: usize,
    search_fixture: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let featurizer = featurizer_for(load_model(paths, load_vocab(paths)?)?);
    let factchecks = load_factchecks(&paths.factchecks)?;
    let index = load_factcheck_index(paths, &factchecks, &featurizer)?;
    let mut corpus = load_articles(&paths.articles)?;
    let articles = ArticleIndex::build(corpus.clone(), &featurizer)?;
    let weights = Weights::load(&paths.weights)?;
    let adapter = search_fixture.map(FixtureSearch::load).transpose()?;
    let result = precompute_related(
        &factchecks,
        &index,
        &articles,
        &featurizer,
        adapter.as_ref().map(|a| a as &dyn SearchAdapter),
        &weights,
        n,
        query_terms,
    )?;
    for d in &result.diagnostics {
        log::warn!("{d}");
    }
    let known: BTreeSet<String> = corpus.iter().map(|a| a.id.clone()).collect();
    let new: Vec<Article> = result
        .discovered
        .iter()
        .filter(|a| !known.contains(&a.id))
        .cloned()
        .collect();
    if !new.is_empty() {
        corpus.extend(new);
        ensure_parent(&paths.articles)?;
        save_corpus(&corpus, &paths.articles)?;
    }
    result.map.save(&paths.related())?;
    let linked = result.map.entries.values().filter(|v| !v.is_empty()).count();
    writeln!(
        out,
        "{} of {} fact checks have related articles; {} found by search; {} diagnostics; wrote {}",
        linked,
        result.map.len(),
        result.discovered.len(),
        result.diagnostics.len(),
        paths.related().display()
    )?;
    Ok(())
}

/// Component tables for every labeled article found in the corpus.
fn labeled_tables(paths: &SnapshotPaths, labels: &LabelSet) -> Result<Vec<ComponentTable>> {
    let featurizer = featurizer_for(load_model(paths, load_vocab(paths)?)?);
    let factchecks = load_factchecks(&paths.factchecks)?;
    let index = load_factcheck_index(paths, &factchecks, &featurizer)?;
    let by_id: BTreeMap<String, Article> = load_articles(&paths.articles)?
        .into_iter()
        .map(|a| (a.id.clone(), a))
        .collect();
    let mut features = Vec::new();
    for id in labels.article_ids() {
        match by_id.get(&id) {
            Some(a) => features.push((id, featurizer.article(&a.title, &a.body_text))),
            None => log::warn!("labeled article {id} is not in the article corpus"),
        }
    }
    if features.is_empty() {
        bail!("none of the labeled articles are in {}", paths.articles.display());
    }
    Ok(component_tables(&features, &index))
}

fn tune(paths: &SnapshotPaths, labels: &Path, grid: &Path, out: &mut dyn Write) -> Result<()> {
    let labels = LabelSet::load(labels)?;
    let grid = Grid::load(grid)?;
    let tables = labeled_tables(paths, &labels)?;
    let best = tune_weights(&tables, &labels, &grid, EVAL_K)?;
    if best.unlabeled > 0 {
        log::warn!("{} retrieved pairs had no label and counted as irrelevant", best.unlabeled);
    }
    ensure_parent(&paths.weights)?;
    best.weights.save(&paths.weights)?;
    writeln!(
        out,
        "{} articles, {} grid points: score {} ({} unlabeled)",
        tables.len(),
        grid.len(),
        best.score,
        best.unlabeled
    )?;
    write!(out, "{}", best.weights.to_toml())?;
    writeln!(out, "wrote {}", paths.weights.display())?;
    Ok(())
}

fn eval(paths: &SnapshotPaths, labels: &Path, k: usize, jsonl: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let labels = LabelSet::load(labels)?;
    let weights = Weights::load(&paths.weights)?;
    let tables = labeled_tables(paths, &labels)?;
    let report = evaluate(&tables, &labels, &ablation_configs(&weights), k);
    write!(out, "{}", report.to_table())?;
    if let Some(path) = jsonl {
        ensure_parent(path)?;
        fs::write(path, report.to_jsonl()).with_context(|| path.display().to_string())?;
    }
    Ok(())
}

fn query(paths: &SnapshotPaths, request: &RfcRequest, fetch: bool, out: &mut dyn Write) -> Result<()> {
    let snapshot = Snapshot::load(paths)?;
    let fetcher: Box<dyn PageFetcher> = if fetch {
        Box::new(HttpFetcher::default())
    } else {
        Box::new(NoFetch)
    };
    let response = handle_related(&snapshot, request, fetcher.as_ref())?;
    writeln!(out, "{}", serde_json::to_string(&response)?)?;
    Ok(())
}

fn serve_command(paths: SnapshotPaths, listen: SocketAddr, log_requests: bool) -> Result<()> {
    let snapshot = match Snapshot::load(&paths) {
        Ok(s) => Some(s),
        Err(e) => {
            log::error!("starting without a snapshot: {e:#}");
            None
        }
    };
    let state = Arc::new(AppState::new(snapshot).with_request_logging(log_requests));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .with_context(|| format!("binding {listen}"))?;
        log::info!("listening on {}", listener.local_addr()?);
        reload_on_hangup(state.clone(), paths);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        serve(listener, state, shutdown).await?;
        Ok(())
    })
}

#[cfg(unix)]
fn reload_on_hangup(state: Arc<AppState>, paths: SnapshotPaths) {
    use tokio::signal::unix::{signal, SignalKind};
    let Ok(mut hangups) = signal(SignalKind::hangup()) else {
        return;
    };
    tokio::spawn(async move {
        while hangups.recv().await.is_some() {
            let paths = paths.clone();
            match tokio::task::spawn_blocking(move || Snapshot::load(&paths)).await {
                Ok(Ok(next)) => {
                    state.swap(next);
                }
                Ok(Err(e)) => log::error!("reload failed, keeping the current snapshot: {e:#}"),
                Err(e) => log::error!("reload failed: {e}"),
            }
        }
    });
}

#[cfg(not(unix))]
fn reload_on_hangup(_: Arc<AppState>, _: SnapshotPaths) {}

/// Run one command, writing its report to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let paths = cli.data.paths();
    match cli.command {
        Command::Ingest(args) => ingest(&paths, &args, out),
        Command::Articles(args) => articles(&paths, &args, out),
        Command::Index => index(&paths, out),
        Command::TrainTopics {
            topics,
            iterations,
            alpha,
            beta,
        } => {
            let mut params = LdaParams::new(topics)
                .iterations(iterations)
                .beta(beta)
                .seed(cli.data.seed);
            if let Some(a) = alpha {
                params = params.alpha(a);
            }
            train_topics(&paths, params, out)
        }
        Command::InspectTopic {
            topic,
            words,
            documents,
        } => inspect_topic(&paths, topic, words, documents, out),
        Command::SetThematic { topics } => set_thematic_topics(&paths, &topics, out),
        Command::RelatedPrecompute {
            n,
            query_terms,
            search_fixture,
        } => related_precompute(&paths, n, query_terms, search_fixture.as_deref(), out),
        Command::Tune { labels, grid } => tune(&paths, &labels, &grid, out),
        Command::Eval { labels, k, jsonl } => eval(&paths, &labels, k, jsonl.as_deref(), out),
        Command::Query {
            url,
            title,
            body,
            max_results,
            fetch,
        } => query(
            &paths,
            &RfcRequest {
                url,
                title,
                body,
                max_results,
            },
            fetch,
            out,
        ),
        Command::Serve {
            listen,
            log_requests,
        } => serve_command(paths, listen, log_requests),
    }
}
