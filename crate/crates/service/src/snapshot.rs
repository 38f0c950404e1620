//! The on-disk data directory and the immutable in-memory snapshot built
//! from it.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rfc_core::corpus::{load_corpus, Article, FactCheck, LoadMode};
use rfc_core::index::{FieldTag, TfIdfIndex};
use rfc_core::ranker::{ArticleIndex, FactCheckIndex, Featurizer, RelatedArticlesMap, Weights};
use rfc_core::textproc::Vocabulary;
use rfc_core::topics::{InferParams, TopicModel};

pub const FACTCHECKS: &str = "factchecks.jsonl";
pub const ARTICLES: &str = "articles.jsonl";
pub const VOCAB: &str = "vocab.tsv";
pub const CLAIMS_INDEX: &str = "claims.idx";
pub const BODIES_INDEX: &str = "bodies.idx";
pub const MODEL: &str = "topics.model";
pub const WEIGHTS: &str = "weights.toml";
pub const RELATED: &str = "related.jsonl";

/// File locations of one snapshot. Everything lives in `dir` unless
/// overridden.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotPaths {
    pub dir: PathBuf,
    pub factchecks: PathBuf,
    pub articles: PathBuf,
    pub model: PathBuf,
    pub weights: PathBuf,
}

impl SnapshotPaths {
    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        let dir = dir.into();
        Self {
            factchecks: dir.join(FACTCHECKS),
            articles: dir.join(ARTICLES),
            model: dir.join(MODEL),
            weights: dir.join(WEIGHTS),
            dir,
        }
    }

    pub fn vocab(&self) -> PathBuf {
        self.dir.join(VOCAB)
    }

    pub fn claims_index(&self) -> PathBuf {
        self.dir.join(CLAIMS_INDEX)
    }

    pub fn bodies_index(&self) -> PathBuf {
        self.dir.join(BODIES_INDEX)
    }

    pub fn related(&self) -> PathBuf {
        self.dir.join(RELATED)
    }
}

/// Content hashes that identify a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotIdentity {
    /// Fact checks, articles, vocabulary and both indexes.
    pub corpus_hash: String,
    pub model_hash: String,
    pub weights_hash: String,
    pub related_hash: String,
    pub weights: Weights,
    pub n_factchecks: usize,
    pub n_articles: usize,
}

/// sha256 over (name, length, bytes) of each file; a missing file hashes
/// as empty.
fn hash_files(files: &[(&str, &Path)]) -> Result<String> {
    let mut h = Sha256::new();
    for (name, path) in files {
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e).with_context(|| path.display().to_string()),
        };
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

/// Inference settings used everywhere a snapshot is scored: the model's
/// own seed keeps mixtures reproducible.
pub fn featurizer_for(model: TopicModel) -> Featurizer {
    let infer = InferParams {
        seed: model.seed(),
        ..InferParams::default()
    };
    Featurizer::new(Arc::new(model), infer)
}

pub fn load_vocab(paths: &SnapshotPaths) -> Result<Arc<Vocabulary>> {
    let path = paths.vocab();
    Ok(Arc::new(
        Vocabulary::load(&path).with_context(|| format!("loading {}", path.display()))?,
    ))
}

pub fn load_model(paths: &SnapshotPaths, vocab: Arc<Vocabulary>) -> Result<TopicModel> {
    TopicModel::load(&paths.model, vocab)
        .with_context(|| format!("loading {}", paths.model.display()))
}

pub fn load_factchecks(path: &Path) -> Result<Vec<FactCheck>> {
    Ok(load_corpus::<FactCheck>(path, LoadMode::Strict)
        .with_context(|| format!("loading {}", path.display()))?
        .records)
}

/// Articles file; a missing file is an empty corpus.
pub fn load_articles(path: &Path) -> Result<Vec<Article>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    Ok(load_corpus::<Article>(path, LoadMode::Strict)
        .with_context(|| format!("loading {}", path.display()))?
        .records)
}

/// Fact-check index from the saved claim and body indexes.
pub fn load_factcheck_index(
    paths: &SnapshotPaths,
    factchecks: &[FactCheck],
    featurizer: &Featurizer,
) -> Result<FactCheckIndex> {
    let vocab = featurizer.vocab().clone();
    let claims = TfIdfIndex::load(&paths.claims_index(), vocab.clone())
        .with_context(|| format!("loading {}", paths.claims_index().display()))?;
    let bodies = TfIdfIndex::load(&paths.bodies_index(), vocab)
        .with_context(|| format!("loading {}", paths.bodies_index().display()))?;
    if claims.field() != FieldTag::Claim || bodies.field() != FieldTag::Body {
        bail!("index files hold the wrong fields");
    }
    Ok(FactCheckIndex::from_indexes(factchecks, claims, bodies, featurizer)?)
}

/// Everything a request is served from. Never mutated after loading.
#[derive(Debug)]
pub struct Snapshot {
    pub factchecks: Vec<FactCheck>,
    pub featurizer: Featurizer,
    pub index: FactCheckIndex,
    pub articles: ArticleIndex,
    pub weights: Weights,
    pub related: RelatedArticlesMap,
    pub identity: SnapshotIdentity,
    positions: HashMap<String, usize>,
}

impl Snapshot {
    pub fn factcheck(&self, id: &str) -> Option<&FactCheck> {
        self.positions.get(id).map(|&p| &self.factchecks[p])
    }

    pub fn load(paths: &SnapshotPaths) -> Result<Self> {
        let vocab = load_vocab(paths)?;
        let featurizer = featurizer_for(load_model(paths, vocab)?);
        let factchecks = load_factchecks(&paths.factchecks)?;
        let index = load_factcheck_index(paths, &factchecks, &featurizer)?;
        let articles = ArticleIndex::build(load_articles(&paths.articles)?, &featurizer)?;
        let weights = Weights::load(&paths.weights)
            .with_context(|| format!("loading {}", paths.weights.display()))?;
        weights.validate()?;
        let related = if paths.related().exists() {
            RelatedArticlesMap::load(&paths.related())?
        } else {
            RelatedArticlesMap::default()
        };

        let identity = SnapshotIdentity {
            corpus_hash: hash_files(&[
                (FACTCHECKS, &paths.factchecks),
                (ARTICLES, &paths.articles),
                (VOCAB, &paths.vocab()),
                (CLAIMS_INDEX, &paths.claims_index()),
                (BODIES_INDEX, &paths.bodies_index()),
            ])?,
            model_hash: hash_files(&[(MODEL, &paths.model)])?,
            weights_hash: hash_files(&[(WEIGHTS, &paths.weights)])?,
            related_hash: hash_files(&[(RELATED, &paths.related())])?,
            weights,
            n_factchecks: factchecks.len(),
            n_articles: articles.len(),
        };
        log::info!(
            "snapshot loaded: {} fact checks, {} articles, corpus {}",
            identity.n_factchecks,
            identity.n_articles,
            &identity.corpus_hash[..12]
        );
        let positions = factchecks.iter().enumerate().map(|(i, f)| (f.id.clone(), i)).collect();
        Ok(Self {
            factchecks,
            featurizer,
            index,
            articles,
            weights,
            related,
            identity,
            positions,
        })
    }
}
