//! Composite relevance scoring of (article, fact check) pairs.
//!
//! A pair scores
//!
//! ```text
//! total = w_title * s_title + w_body * s_body + w_topics * s_topics + w_thematic * s_thematic
//! ```
//!
//! where `s_title` is the TF-IDF cosine between the article title and the
//! claim reviewed, `s_body` the TF-IDF cosine between the two bodies, and the
//! topic terms are cosines between topic mixtures (the thematic one
//! restricted to the thematic topics). Results under the cutoff `t_l` are
//! never shown.

mod query;
mod related;
mod search;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::FactCheck;
use crate::error::{Error, Result};
use crate::index::{cosine, vectorize, FieldTag, SparseVector, TfIdfIndex};
use crate::textproc::{tokenize, Vocabulary};
use crate::topics::{infer_mixture, topic_cosine, InferParams, TopicMixture, TopicModel};

pub use query::{build_query, Query};
pub use related::{
    find_related_articles, precompute_related, ArticleIndex, Precomputed, RelatedArticle, RelatedArticlesMap,
    RelatedOutcome,
};
pub use search::{FixtureSearch, NoSearch, SearchAdapter, SearchHit};

/// The four channel weights and the display cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w_title: f64,
    pub w_body: f64,
    pub w_topics: f64,
    pub w_thematic: f64,
    pub t_l: f64,
}

impl Weights {
    pub fn new(w_title: f64, w_body: f64, w_topics: f64, w_thematic: f64, t_l: f64) -> Self {
        Self {
            w_title,
            w_body,
            w_topics,
            w_thematic,
            t_l,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ws = [self.w_title, self.w_body, self.w_topics, self.w_thematic];
        if ws.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "weights must be finite and non-negative: {ws:?}"
            )));
        }
        if self.t_l.is_nan() {
            return Err(Error::InvalidInput("t_l is NaN".into()));
        }
        Ok(())
    }

    /// At least one channel carries weight.
    pub fn is_usable(&self) -> bool {
        [self.w_title, self.w_body, self.w_topics, self.w_thematic]
            .iter()
            .any(|&w| w > 0.0)
    }

    pub fn combine(&self, c: &Components) -> f64 {
        self.w_title * c.s_title
            + self.w_body * c.s_body
            + self.w_topics * c.s_topics
            + self.w_thematic * c.s_thematic
    }

    /// Zero the weight of every channel the mask switches off.
    pub fn masked(&self, mask: FeatureMask) -> Self {
        let pick = |on: bool, w: f64| if on { w } else { 0.0 };
        Self {
            w_title: pick(mask.title, self.w_title),
            w_body: pick(mask.body, self.w_body),
            w_topics: pick(mask.topics, self.w_topics),
            w_thematic: pick(mask.thematic, self.w_thematic),
            t_l: self.t_l,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let w: Weights =
            toml::from_str(text).map_err(|e| Error::InvalidInput(format!("weights: {e}")))?;
        w.validate()?;
        Ok(w)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("weights always serialize")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }
}

/// Which channels a configuration uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMask {
    pub title: bool,
    pub body: bool,
    pub topics: bool,
    pub thematic: bool,
}

impl FeatureMask {
    pub const ALL: FeatureMask = FeatureMask {
        title: true,
        body: true,
        topics: true,
        thematic: true,
    };
    pub const TITLE: FeatureMask = FeatureMask::only(0);
    pub const BODY: FeatureMask = FeatureMask::only(1);
    pub const TOPICS: FeatureMask = FeatureMask::only(2);
    pub const THEMATIC: FeatureMask = FeatureMask::only(3);

    const fn only(i: usize) -> Self {
        FeatureMask {
            title: i == 0,
            body: i == 1,
            topics: i == 2,
            thematic: i == 3,
        }
    }
}

/// The four per-channel similarities of a pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub s_title: f64,
    pub s_body: f64,
    pub s_topics: f64,
    pub s_thematic: f64,
}

/// One scored (article, fact check) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredResult {
    pub factcheck_id: String,
    pub s_title: f64,
    pub s_body: f64,
    pub s_topics: f64,
    pub s_thematic: f64,
    pub total: f64,
    /// Either side had no body text, so `s_body` is 0.
    #[serde(default)]
    pub body_missing: bool,
    /// Either side had a fallback topic mixture, so both topic channels are 0.
    #[serde(default)]
    pub topics_degenerate: bool,
}

impl ScoredResult {
    pub fn components(&self) -> Components {
        Components {
            s_title: self.s_title,
            s_body: self.s_body,
            s_topics: self.s_topics,
            s_thematic: self.s_thematic,
        }
    }
}

/// Vectors and topic mixture of one side of a pair. For a fact check the
/// title channel holds the claim reviewed.
#[derive(Debug, Clone, PartialEq)]
pub struct DocFeatures {
    pub title: SparseVector,
    pub body: Option<SparseVector>,
    pub mixture: TopicMixture,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct PairFlags {
    body_missing: bool,
    topics_degenerate: bool,
}

fn pair_components(
    title_sim: f64,
    body_sim: Option<f64>,
    article_mix: &TopicMixture,
    fc_mix: &TopicMixture,
    thematic: &BTreeSet<usize>,
) -> (Components, PairFlags) {
    let topics_degenerate = article_mix.degenerate || fc_mix.degenerate;
    let (s_topics, s_thematic) = if topics_degenerate {
        (0.0, 0.0)
    } else {
        (
            topic_cosine(article_mix, fc_mix, None),
            topic_cosine(article_mix, fc_mix, Some(thematic)),
        )
    };
    (
        Components {
            s_title: title_sim,
            s_body: body_sim.unwrap_or(0.0),
            s_topics,
            s_thematic,
        },
        PairFlags {
            body_missing: body_sim.is_none(),
            topics_degenerate,
        },
    )
}

fn scored(id: &str, c: Components, flags: PairFlags, weights: &Weights) -> ScoredResult {
    ScoredResult {
        factcheck_id: id.to_string(),
        s_title: c.s_title,
        s_body: c.s_body,
        s_topics: c.s_topics,
        s_thematic: c.s_thematic,
        total: weights.combine(&c),
        body_missing: flags.body_missing,
        topics_degenerate: flags.topics_degenerate,
    }
}

/// Score one pair. Article and fact check roles are not interchangeable:
/// the article title is compared with the fact check's claim.
pub fn score_pair(
    factcheck_id: &str,
    article: &DocFeatures,
    factcheck: &DocFeatures,
    weights: &Weights,
    thematic: &BTreeSet<usize>,
) -> ScoredResult {
    let body = match (&article.body, &factcheck.body) {
        (Some(a), Some(f)) => Some(cosine(a, f)),
        _ => None,
    };
    let (c, flags) = pair_components(
        cosine(&article.title, &factcheck.title),
        body,
        &article.mixture,
        &factcheck.mixture,
        thematic,
    );
    scored(factcheck_id, c, flags, weights)
}

/// Sort by descending total (ties by ascending id), drop everything under
/// `t_l` and keep the first `k`.
pub fn rank(mut results: Vec<ScoredResult>, t_l: f64, k: usize) -> Vec<ScoredResult> {
    results.retain(|r| r.total >= t_l);
    results.sort_by(|a, b| {
        b.total
            .total_cmp(&a.total)
            .then_with(|| a.factcheck_id.cmp(&b.factcheck_id))
    });
    results.truncate(k);
    results
}

/// Where a fact check's body channel text comes from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactCheckBody {
    /// Full extracted page text; fact checks without it have no body.
    #[default]
    PageText,
    /// Title and claim from the markup only.
    Markup,
}

impl FactCheckBody {
    /// Body channel text of a fact check under this source.
    pub fn text(self, fc: &FactCheck) -> Option<String> {
        match self {
            FactCheckBody::PageText => fc
                .body_text
                .as_deref()
                .filter(|b| !b.trim().is_empty())
                .map(str::to_string),
            FactCheckBody::Markup => Some(format!("{}\n{}", fc.title, fc.claim_reviewed)),
        }
    }
}

/// Claim and body TF-IDF indexes over the fact checks, in corpus order.
/// They need only the vocabulary, so they can be built before a topic
/// model exists.
pub fn build_factcheck_indexes(
    factchecks: &[FactCheck],
    vocab: Arc<Vocabulary>,
    body: FactCheckBody,
) -> Result<(TfIdfIndex, TfIdfIndex)> {
    let claims = TfIdfIndex::build(
        factchecks.iter().map(|f| (f.id.clone(), f.claim_reviewed.as_str())),
        vocab.clone(),
        FieldTag::Claim,
    )?;
    let bodies = TfIdfIndex::build(
        factchecks
            .iter()
            .map(|f| (f.id.clone(), body.text(f).unwrap_or_default())),
        vocab,
        FieldTag::Body,
    )?;
    Ok((claims, bodies))
}

/// Turns raw text into [`DocFeatures`] against a fixed vocabulary and model.
#[derive(Debug, Clone)]
pub struct Featurizer {
    vocab: Arc<Vocabulary>,
    model: Arc<TopicModel>,
    infer: InferParams,
    factcheck_body: FactCheckBody,
}

impl Featurizer {
    pub fn new(model: Arc<TopicModel>, infer: InferParams) -> Self {
        Self {
            vocab: model.vocab().clone(),
            model,
            infer,
            factcheck_body: FactCheckBody::default(),
        }
    }

    pub fn with_factcheck_body(mut self, source: FactCheckBody) -> Self {
        self.factcheck_body = source;
        self
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn model(&self) -> &Arc<TopicModel> {
        &self.model
    }

    pub fn infer_params(&self) -> &InferParams {
        &self.infer
    }

    pub fn factcheck_body(&self) -> FactCheckBody {
        self.factcheck_body
    }

    fn vector(&self, text: &str) -> SparseVector {
        vectorize(&self.vocab.to_bow(&tokenize(text)), &self.vocab)
    }

    /// Topic mixture of `primary`, or of `fallback` when `primary` has no
    /// in-vocabulary content.
    pub fn mixture(&self, primary: &str, fallback: &str) -> TopicMixture {
        let bow = self.vocab.bow_of(primary);
        let bow = if bow.is_empty() {
            self.vocab.bow_of(fallback)
        } else {
            bow
        };
        infer_mixture(&bow, &self.model, &self.infer)
    }

    pub fn article(&self, title: &str, body: &str) -> DocFeatures {
        DocFeatures {
            title: self.vector(title),
            body: (!body.trim().is_empty()).then(|| self.vector(body)),
            mixture: self.mixture(body, title),
        }
    }

    /// Body channel text of a fact check under the configured source.
    pub fn factcheck_body_text(&self, fc: &FactCheck) -> Option<String> {
        self.factcheck_body.text(fc)
    }

    pub fn factcheck(&self, fc: &FactCheck) -> DocFeatures {
        let body = self.factcheck_body_text(fc);
        let markup = format!("{}\n{}", fc.title, fc.claim_reviewed);
        DocFeatures {
            title: self.vector(&fc.claim_reviewed),
            body: body.as_deref().map(|b| self.vector(b)),
            mixture: self.mixture(body.as_deref().unwrap_or(""), &markup),
        }
    }
}

/// Fact-check side of retrieval: claim and body indexes plus topic mixtures.
#[derive(Debug, Clone)]
pub struct FactCheckIndex {
    claims: TfIdfIndex,
    bodies: TfIdfIndex,
    has_body: Vec<bool>,
    mixtures: Vec<TopicMixture>,
    thematic: BTreeSet<usize>,
}

impl FactCheckIndex {
    /// Build both indexes and infer every fact check's mixture.
    pub fn build(factchecks: &[FactCheck], featurizer: &Featurizer) -> Result<Self> {
        let (claims, bodies) = build_factcheck_indexes(
            factchecks,
            featurizer.vocab().clone(),
            featurizer.factcheck_body(),
        )?;
        Self::from_indexes(factchecks, claims, bodies, featurizer)
    }

    /// Assemble from prebuilt (for instance loaded) indexes, which must
    /// cover the fact checks in the same order.
    pub fn from_indexes(
        factchecks: &[FactCheck],
        claims: TfIdfIndex,
        bodies: TfIdfIndex,
        featurizer: &Featurizer,
    ) -> Result<Self> {
        let same_order = |idx: &TfIdfIndex| {
            idx.ids().len() == factchecks.len()
                && idx.ids().iter().zip(factchecks).all(|(a, f)| *a == f.id)
        };
        if !same_order(&claims) || !same_order(&bodies) {
            return Err(Error::InvalidInput(
                "indexes do not match the fact-check corpus".into(),
            ));
        }
        let has_body = factchecks
            .iter()
            .map(|f| featurizer.factcheck_body_text(f).is_some())
            .collect();
        let mixtures = factchecks
            .par_iter()
            .map(|f| featurizer.factcheck(f).mixture)
            .collect();
        Ok(Self {
            claims,
            bodies,
            has_body,
            mixtures,
            thematic: featurizer.model().thematic_ids().clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.claims.n_docs()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> &[String] {
        self.claims.ids()
    }

    pub fn claim_index(&self) -> &TfIdfIndex {
        &self.claims
    }

    pub fn body_index(&self) -> &TfIdfIndex {
        &self.bodies
    }

    pub fn thematic(&self) -> &BTreeSet<usize> {
        &self.thematic
    }

    pub fn mixture_at(&self, pos: usize) -> &TopicMixture {
        &self.mixtures[pos]
    }

    pub fn features_at(&self, pos: usize) -> DocFeatures {
        DocFeatures {
            title: self.claims.vector_at(pos).clone(),
            body: self.has_body[pos].then(|| self.bodies.vector_at(pos).clone()),
            mixture: self.mixtures[pos].clone(),
        }
    }

    /// Unweighted channel scores of the article against every fact check,
    /// with total 0, in index order.
    pub fn components(&self, article: &DocFeatures) -> Vec<ScoredResult> {
        let zero = Weights::new(0.0, 0.0, 0.0, 0.0, 0.0);
        let titles = self.claims.score_all(&article.title);
        let bodies = article.body.as_ref().map(|b| self.bodies.score_all(b));
        (0..self.len())
            .map(|pos| {
                let body = match &bodies {
                    Some(scores) if self.has_body[pos] => Some(scores[pos]),
                    _ => None,
                };
                let (c, flags) = pair_components(
                    titles[pos],
                    body,
                    &article.mixture,
                    &self.mixtures[pos],
                    &self.thematic,
                );
                scored(&self.ids()[pos], c, flags, &zero)
            })
            .collect()
    }

    /// Top `k` fact checks at or above `weights.t_l`.
    pub fn retrieve(&self, article: &DocFeatures, weights: &Weights, k: usize) -> Vec<ScoredResult> {
        let scored = self
            .components(article)
            .into_iter()
            .map(|mut r| {
                r.total = weights.combine(&r.components());
                r
            })
            .collect();
        rank(scored, weights.t_l, k)
    }
}

/// Score an already computed component table under new weights.
pub fn rerank(components: &[ScoredResult], weights: &Weights, k: usize) -> Vec<ScoredResult> {
    let scored = components
        .iter()
        .map(|r| ScoredResult {
            total: weights.combine(&r.components()),
            ..r.clone()
        })
        .collect();
    rank(scored, weights.t_l, k)
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;

    fn feats(title: &[(u32, f64)], body: Option<&[(u32, f64)]>, mix: &[(usize, f64)]) -> DocFeatures {
        DocFeatures {
            title: SparseVector::from_entries(title.iter().copied()),
            body: body.map(|b| SparseVector::from_entries(b.iter().copied())),
            mixture: TopicMixture {
                weights: mix.iter().copied().collect(),
                degenerate: false,
            },
        }
    }

    #[test]
    fn zero_weights_zero_total() {
        let a = feats(&[(0, 1.0)], Some(&[(1, 1.0)]), &[(0, 1.0)]);
        let r = score_pair("fc", &a, &a, &Weights::new(0.0, 0.0, 0.0, 0.0, 0.0), &BTreeSet::new());
        assert_eq!(r.total, 0.0);
        assert_eq!(r.s_title, 1.0);
    }

    #[test]
    fn identical_title_and_claim() {
        let a = feats(&[(0, 1.3), (4, 0.2)], None, &[(0, 1.0)]);
        let r = score_pair("fc", &a, &a, &Weights::new(1.0, 0.0, 0.0, 0.0, 0.0), &BTreeSet::new());
        assert!((r.total - 1.0).abs() < 1e-12);
        assert!(r.body_missing);
        assert_eq!(r.s_body, 0.0);
    }

    #[test]
    fn weighted_sum_example() {
        let c = Components {
            s_title: 0.707107,
            s_body: 0.2,
            s_topics: 0.9,
            s_thematic: 0.4,
        };
        let total = Weights::new(0.5, 0.5, 0.0, 0.0, 0.0).combine(&c);
        assert!((total - 0.453553).abs() < 1e-6);
    }

    #[test]
    fn degenerate_mixture_silences_topic_channels() {
        let a = feats(&[(0, 1.0)], Some(&[(0, 1.0)]), &[(0, 1.0)]);
        let mut b = a.clone();
        b.mixture = TopicMixture::uniform(3);
        let w = Weights::new(1.0, 1.0, 1.0, 1.0, 0.0);
        let r = score_pair("fc", &a, &b, &w, &[0].into());
        assert!(r.topics_degenerate);
        assert_eq!((r.s_topics, r.s_thematic), (0.0, 0.0));
        let ok = score_pair("fc", &a, &a, &w, &[0].into());
        assert_eq!((ok.s_topics, ok.s_thematic), (1.0, 1.0));
    }

    #[test]
    fn thematic_channel_uses_only_thematic_topics() {
        let a = feats(&[], None, &[(0, 0.5), (1, 0.5)]);
        let b = feats(&[], None, &[(1, 0.2), (2, 0.8)]);
        let r = score_pair("fc", &a, &b, &Weights::new(0.0, 0.0, 1.0, 1.0, 0.0), &[1].into());
        assert_eq!(r.s_thematic, 1.0);
        assert!(r.s_topics < 0.3);
    }

    #[test]
    fn rank_cuts_sorts_and_truncates() {
        let mk = |id: &str, total: f64| ScoredResult {
            factcheck_id: id.into(),
            s_title: 0.0,
            s_body: 0.0,
            s_topics: 0.0,
            s_thematic: 0.0,
            total,
            body_missing: false,
            topics_degenerate: false,
        };
        let rs = vec![mk("c", 0.5), mk("a", 0.5), mk("b", 0.9), mk("d", 0.1)];
        let out = rank(rs.clone(), 0.2, 5);
        let ids: Vec<_> = out.iter().map(|r| r.factcheck_id.as_str()).collect();
        assert_eq!(ids, ["b", "a", "c"]);
        assert_eq!(rank(rs.clone(), 0.5, 2).len(), 2);
        assert!(rank(rs, 2.0, 5).is_empty());
    }

    #[test]
    fn weights_toml_round_trip_and_validation() {
        let w = Weights::new(1.0, 0.5, 0.25, 2.0, 0.3);
        assert_eq!(Weights::from_toml(&w.to_toml()).unwrap(), w);
        let text = "w_title = 1.0\nw_body = -1.0\nw_topics = 0.0\nw_thematic = 0.0\nt_l = 0.1\n";
        assert!(Weights::from_toml(text).is_err());
        assert!(Weights::from_toml("w_title = 1.0").is_err());
        assert!(!Weights::new(0.0, 0.0, 0.0, 0.0, 0.0).is_usable());
        let m = w.masked(FeatureMask::BODY);
        assert_eq!((m.w_title, m.w_body, m.w_topics, m.w_thematic), (0.0, 0.5, 0.0, 0.0));
    }
}
