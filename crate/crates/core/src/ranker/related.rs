use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_query, score_pair, DocFeatures, FactCheckIndex, Featurizer, Query, SearchAdapter, Weights};
use crate::corpus::{article_id, normalize_url, Article, FactCheck};
use crate::error::{Error, Result};
use crate::index::{FieldTag, TfIdfIndex};
use crate::topics::TopicMixture;

/// Article side of the inverse retrieval direction.
#[derive(Debug, Clone)]
pub struct ArticleIndex {
    articles: Vec<Article>,
    titles: TfIdfIndex,
    bodies: TfIdfIndex,
    mixtures: Vec<TopicMixture>,
    by_url: HashMap<String, usize>,
}

impl ArticleIndex {
    pub fn build(articles: Vec<Article>, featurizer: &Featurizer) -> Result<Self> {
        let vocab = featurizer.vocab().clone();
        let titles = TfIdfIndex::build(
            articles.iter().map(|a| (a.id.clone(), a.title.as_str())),
            vocab.clone(),
            FieldTag::Title,
        )?;
        let bodies = TfIdfIndex::build(
            articles.iter().map(|a| (a.id.clone(), a.body_text.as_str())),
            vocab,
            FieldTag::Body,
        )?;
        let mixtures = articles
            .par_iter()
            .map(|a| featurizer.mixture(&a.body_text, &a.title))
            .collect();
        let by_url = articles
            .iter()
            .enumerate()
            .map(|(i, a)| (normalize_url(&a.url), i))
            .collect();
        Ok(Self {
            articles,
            titles,
            bodies,
            mixtures,
            by_url,
        })
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn get(&self, id: &str) -> Option<&Article> {
        self.titles.position(id).map(|i| &self.articles[i])
    }

    pub fn position_of_url(&self, url: &str) -> Option<usize> {
        self.by_url.get(&normalize_url(url)).copied()
    }

    pub fn features_at(&self, pos: usize) -> DocFeatures {
        DocFeatures {
            title: self.titles.vector_at(pos).clone(),
            body: (!self.articles[pos].body_text.trim().is_empty())
                .then(|| self.bodies.vector_at(pos).clone()),
            mixture: self.mixtures[pos].clone(),
        }
    }

    /// Positions of articles whose title or body contains a query term.
    fn matching(&self, query: &Query) -> Vec<usize> {
        let vocab = self.titles.vocab();
        let ids: Vec<_> = query.terms.iter().filter_map(|t| vocab.id(t)).collect();
        (0..self.len())
            .filter(|&pos| {
                ids.iter().any(|&t| {
                    self.titles.vector_at(pos).get(t) > 0.0 || self.bodies.vector_at(pos).get(t) > 0.0
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelatedArticle {
    pub article_id: String,
    pub url: String,
    pub score: f64,
    /// Came from the search adapter rather than the local corpus.
    pub from_search: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelatedOutcome {
    pub query: Query,
    pub articles: Vec<RelatedArticle>,
    /// Adapter hits that are not in the local corpus and survived the
    /// cutoff, as articles built from the hit's title and snippet.
    pub discovered: Vec<Article>,
    pub diagnostics: Vec<String>,
}

/// Articles related to one fact check: a query distilled from the claim
/// selects candidates (locally and through the adapter, if any), which are
/// scored as article against fact check. Results at or above `t_l` are
/// returned by descending score, at most `n` of them. A URL found both ways
/// keeps the adapter's entry, and on equal scores adapter results come first.
#[allow(clippy::too_many_arguments)]
pub fn find_related_articles(
    factcheck: &FactCheck,
    factcheck_features: &DocFeatures,
    articles: &ArticleIndex,
    featurizer: &Featurizer,
    adapter: Option<&dyn SearchAdapter>,
    weights: &Weights,
    n: usize,
    query_terms: usize,
) -> RelatedOutcome {
    let thematic = featurizer.model().thematic_ids();
    let query = build_query(&factcheck.claim_reviewed, featurizer.vocab(), query_terms);
    let mut diagnostics = Vec::new();
    if query.empty {
        diagnostics.push(format!("{}: claim yields an empty query", factcheck.id));
    }
    let score = |features: &DocFeatures| {
        score_pair(&factcheck.id, features, factcheck_features, weights, thematic).total
    };

    let mut found: Vec<RelatedArticle> = Vec::new();
    let mut discovered: Vec<Article> = Vec::new();
    let mut urls: HashMap<String, usize> = HashMap::new();
    if let (Some(adapter), false) = (adapter, query.empty) {
        match adapter.search(&query.terms, n) {
            Ok(hits) => {
                for hit in hits {
                    let key = normalize_url(&hit.url);
                    if urls.contains_key(&key) {
                        continue;
                    }
                    let (id, features) = match articles.position_of_url(&hit.url) {
                        Some(pos) => (articles.articles[pos].id.clone(), articles.features_at(pos)),
                        None => {
                            if let Ok(a) = Article::new(&hit.url, &hit.title, &hit.snippet) {
                                discovered.push(a);
                            }
                            (article_id(&hit.url), featurizer.article(&hit.title, &hit.snippet))
                        }
                    };
                    urls.insert(key, found.len());
                    found.push(RelatedArticle {
                        article_id: id,
                        url: hit.url,
                        score: score(&features),
                        from_search: true,
                    });
                }
            }
            Err(e) => diagnostics.push(format!(
                "{}: search failed, using local results only: {e}",
                factcheck.id
            )),
        }
    }
    if !query.empty {
        for pos in articles.matching(&query) {
            let a = &articles.articles[pos];
            if urls.contains_key(&normalize_url(&a.url)) {
                continue;
            }
            found.push(RelatedArticle {
                article_id: a.id.clone(),
                url: a.url.clone(),
                score: score(&articles.features_at(pos)),
                from_search: false,
            });
        }
    }

    found.retain(|r| r.score >= weights.t_l);
    found.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.from_search.cmp(&a.from_search))
            .then_with(|| a.article_id.cmp(&b.article_id))
    });
    found.truncate(n);
    discovered.retain(|a| found.iter().any(|r| r.article_id == a.id));
    RelatedOutcome {
        query,
        articles: found,
        discovered,
        diagnostics,
    }
}

/// Fact check id to its related articles, best first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelatedArticlesMap {
    pub entries: BTreeMap<String, Vec<(String, f64)>>,
}

#[derive(Serialize, Deserialize)]
struct MapRow {
    factcheck_id: String,
    articles: Vec<(String, f64)>,
}

impl RelatedArticlesMap {
    pub fn get(&self, factcheck_id: &str) -> &[(String, f64)] {
        self.entries.get(factcheck_id).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (id, articles) in &self.entries {
            let row = MapRow {
                factcheck_id: id.clone(),
                articles: articles.clone(),
            };
            out.push_str(&serde_json::to_string(&row).expect("map rows serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        Self::read(text.as_bytes())
    }

    fn read(reader: impl BufRead) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Format {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let row: MapRow = serde_json::from_str(&line).map_err(|e| Error::Format {
                line: i + 1,
                message: e.to_string(),
            })?;
            if row.articles.windows(2).any(|w| w[0].1 < w[1].1) {
                return Err(Error::Format {
                    line: i + 1,
                    message: "related articles not sorted by descending score".into(),
                });
            }
            if entries.insert(row.factcheck_id.clone(), row.articles).is_some() {
                return Err(Error::DuplicateId(row.factcheck_id));
            }
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_jsonl().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file))
    }
}

/// Output of [`precompute_related`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Precomputed {
    pub map: RelatedArticlesMap,
    /// Diagnostics in fact-check order.
    pub diagnostics: Vec<String>,
    /// Adapter-only articles referenced by the map, by id.
    pub discovered: Vec<Article>,
}

/// Related articles for every fact check. Runs in parallel; the result does
/// not depend on scheduling.
#[allow(clippy::too_many_arguments)]
pub fn precompute_related(
    factchecks: &[FactCheck],
    factcheck_index: &FactCheckIndex,
    articles: &ArticleIndex,
    featurizer: &Featurizer,
    adapter: Option<&dyn SearchAdapter>,
    weights: &Weights,
    n: usize,
    query_terms: usize,
) -> Result<Precomputed> {
    if factcheck_index.ids().len() != factchecks.len()
        || factcheck_index.ids().iter().zip(factchecks).any(|(a, f)| *a != f.id)
    {
        return Err(Error::InvalidInput(
            "fact-check index does not match the corpus".into(),
        ));
    }
    let outcomes: Vec<(String, RelatedOutcome)> = factchecks
        .par_iter()
        .enumerate()
        .map(|(pos, fc)| {
            let features = factcheck_index.features_at(pos);
            let outcome = find_related_articles(
                fc, &features, articles, featurizer, adapter, weights, n, query_terms,
            );
            (fc.id.clone(), outcome)
        })
        .collect();
    let mut out = Precomputed::default();
    let mut discovered = BTreeMap::new();
    for (id, outcome) in outcomes {
        out.diagnostics.extend(outcome.diagnostics);
        for a in outcome.discovered {
            discovered.entry(a.id.clone()).or_insert(a);
        }
        out.map.entries.insert(
            id,
            outcome
                .articles
                .into_iter()
                .map(|a| (a.article_id, a.score))
                .collect(),
        );
    }
    out.discovered = discovered.into_values().collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_round_trip_and_validation() {
        let mut m = RelatedArticlesMap::default();
        m.entries.insert("fc-b".into(), vec![("art-1".into(), 0.9), ("art-2".into(), 0.25)]);
        m.entries.insert("fc-a".into(), vec![]);
        let text = m.to_jsonl();
        assert!(text.starts_with("{\"factcheck_id\":\"fc-a\""));
        assert_eq!(RelatedArticlesMap::from_jsonl(&text).unwrap(), m);
        assert!(m.get("nope").is_empty());

        let unsorted = "{\"factcheck_id\":\"x\",\"articles\":[[\"a\",0.1],[\"b\",0.2]]}\n";
        assert!(RelatedArticlesMap::from_jsonl(unsorted).is_err());
        let dup = "{\"factcheck_id\":\"x\",\"articles\":[]}\n{\"factcheck_id\":\"x\",\"articles\":[]}\n";
        assert!(matches!(
            RelatedArticlesMap::from_jsonl(dup),
            Err(Error::DuplicateId(_))
        ));
    }
}
