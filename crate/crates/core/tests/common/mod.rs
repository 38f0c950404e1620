//! Synthetic corpora and brute-force reference implementations shared by
//! the integration tests. Nothing here calls the library's scoring code:
//! every oracle recomputes its answer from raw tokens with dense vectors.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rfc_core::corpus::{Article, FactCheck};
use std::sync::Arc;

use rfc_core::ranker::{FactCheckIndex, Featurizer, Weights};
use rfc_core::textproc::{tokenize, Vocabulary};
use rfc_core::topics::{train_lda, InferParams, LdaParams, TopicMixture};
use rfc_core::tuner_eval::{LabelSet, LabeledJudgment, RelevanceLabel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Five-letter consonant-vowel words. None of them is touched by the
/// stemmer, so text built from them tokenizes back to the same words.
pub fn word_pool(seed: u64) -> Vec<String> {
    const C: &[char] = &['b', 'd', 'g', 'k', 'm', 'p', 't', 'v', 'z'];
    const V: &[char] = &['a', 'o'];
    let mut words = Vec::new();
    for &a in C {
        for &b in V {
            for &c in C {
                for &d in V {
                    for &e in C {
                        words.push([a, b, c, d, e].iter().collect::<String>());
                    }
                }
            }
        }
    }
    words.shuffle(&mut rng(seed));
    words
}

pub fn sample(rng: &mut ChaCha8Rng, words: &[String], n: usize) -> Vec<String> {
    (0..n).map(|_| words.choose(rng).unwrap().clone()).collect()
}

/// 40 documents of 30 tokens; the first 20 use only block A, the rest only
/// block B. Returns (documents, block A, block B).
pub fn two_block_corpus(seed: u64) -> (Vec<Vec<String>>, Vec<String>, Vec<String>) {
    let pool = word_pool(seed);
    let a: Vec<String> = pool[..10].to_vec();
    let b: Vec<String> = pool[10..20].to_vec();
    let mut r = rng(seed);
    let docs = (0..40)
        .map(|i| sample(&mut r, if i < 20 { &a } else { &b }, 30))
        .collect();
    (docs, a, b)
}

/// Up to `max_docs` documents over at most `max_terms` distinct words.
pub fn random_token_corpus(r: &mut ChaCha8Rng, max_docs: usize, max_terms: usize) -> Vec<Vec<String>> {
    let n_terms = r.random_range(2..=max_terms);
    let terms: Vec<String> = word_pool(r.random())[..n_terms].to_vec();
    let n_docs = r.random_range(1..=max_docs);
    (0..n_docs)
        .map(|_| {
            let len = r.random_range(0..=15);
            sample(r, &terms, len)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Dense TF-IDF oracle
// ---------------------------------------------------------------------------

/// Terms kept by the half-corpus document-frequency rule, with their df.
pub struct DenseVocab {
    pub terms: Vec<String>,
    pub df: Vec<f64>,
    pub n: f64,
}

impl DenseVocab {
    pub fn new(docs: &[Vec<String>]) -> Self {
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for d in docs {
            let uniq: BTreeSet<&str> = d.iter().map(String::as_str).collect();
            for t in uniq {
                *df.entry(t).or_default() += 1;
            }
        }
        let n = docs.len();
        let kept: Vec<(&str, usize)> = df
            .into_iter()
            .filter(|&(_, c)| (c as f64) <= n as f64 / 2.0)
            .collect();
        Self {
            terms: kept.iter().map(|(t, _)| t.to_string()).collect(),
            df: kept.iter().map(|&(_, c)| c as f64).collect(),
            n: n as f64,
        }
    }

    pub fn vector(&self, tokens: &[String]) -> Vec<f64> {
        self.terms
            .iter()
            .zip(&self.df)
            .map(|(t, &df)| {
                let tf = tokens.iter().filter(|x| *x == t).count() as f64;
                tf * (self.n / df).ln()
            })
            .collect()
    }

    pub fn text_vector(&self, text: &str) -> Vec<f64> {
        self.vector(&tokenize(text))
    }
}

pub fn dense_cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        (dot / (nu * nv)).clamp(0.0, 1.0)
    }
}

pub fn dense_topic_cosine(
    a: &TopicMixture,
    b: &TopicMixture,
    k: usize,
    keep: Option<&BTreeSet<usize>>,
) -> f64 {
    let dense = |m: &TopicMixture| -> Vec<f64> {
        (0..k)
            .map(|t| {
                if keep.is_some_and(|s| !s.contains(&t)) {
                    0.0
                } else {
                    m.weights.get(&t).copied().unwrap_or(0.0)
                }
            })
            .collect()
    };
    dense_cosine(&dense(a), &dense(b))
}

// ---------------------------------------------------------------------------
// Brute-force retrieval and tuning oracles
// ---------------------------------------------------------------------------

/// One fact check as the oracle sees it.
pub struct OracleFactCheck {
    pub id: String,
    pub claim: Vec<f64>,
    pub body: Option<Vec<f64>>,
    pub mixture: TopicMixture,
}

pub struct OracleArticle {
    pub title: Vec<f64>,
    pub body: Option<Vec<f64>>,
    pub mixture: TopicMixture,
}

/// (fact check id, total) of the top `k` at or above the cutoff, ordered by
/// total then id, found by scoring every fact check.
pub fn brute_retrieve(
    article: &OracleArticle,
    factchecks: &[OracleFactCheck],
    thematic: &BTreeSet<usize>,
    n_topics: usize,
    w: &Weights,
    k: usize,
) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = factchecks
        .iter()
        .map(|fc| {
            let s_title = dense_cosine(&article.title, &fc.claim);
            let s_body = match (&article.body, &fc.body) {
                (Some(a), Some(b)) => dense_cosine(a, b),
                _ => 0.0,
            };
            let (s_topics, s_thematic) = if article.mixture.degenerate || fc.mixture.degenerate {
                (0.0, 0.0)
            } else {
                (
                    dense_topic_cosine(&article.mixture, &fc.mixture, n_topics, None),
                    dense_topic_cosine(&article.mixture, &fc.mixture, n_topics, Some(thematic)),
                )
            };
            let total = w.w_title * s_title
                + w.w_body * s_body
                + w.w_topics * s_topics
                + w.w_thematic * s_thematic;
            (fc.id.clone(), total)
        })
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.into_iter().filter(|(_, t)| *t >= w.t_l).take(k).collect()
}

/// Enumerate every grid combination, score it with `score`, and keep the
/// best (ties: smallest weight tuple in lexicographic order).
pub fn brute_tune(
    axes: [&[f64]; 5],
    mut score: impl FnMut(&Weights) -> i64,
) -> (Weights, i64) {
    let mut best: Option<([f64; 5], i64)> = None;
    for &a in axes[0] {
        for &b in axes[1] {
            for &c in axes[2] {
                for &d in axes[3] {
                    for &t in axes[4] {
                        let tuple = [a, b, c, d, t];
                        let s = score(&Weights::new(a, b, c, d, t));
                        let better = match &best {
                            None => true,
                            Some((bt, bs)) => {
                                s > *bs || (s == *bs && tuple.partial_cmp(bt).unwrap().is_lt())
                            }
                        };
                        if better {
                            best = Some((tuple, s));
                        }
                    }
                }
            }
        }
    }
    let ([a, b, c, d, t], s) = best.unwrap();
    (Weights::new(a, b, c, d, t), s)
}

// ---------------------------------------------------------------------------
// Planted-theme corpus
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct ThemeParams {
    pub themes: usize,
    pub claims_per_theme: usize,
    pub articles: usize,
    pub seed: u64,
    /// Give every article this style instead of cycling through all three.
    pub only: Option<ArticleStyle>,
}

impl ThemeParams {
    pub fn new(themes: usize, claims_per_theme: usize, articles: usize, seed: u64) -> Self {
        Self {
            themes,
            claims_per_theme,
            articles,
            seed,
            only: None,
        }
    }
}

/// How an article restates its source claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArticleStyle {
    /// Claim words in both title and body.
    Plain,
    /// Title made of words the corpus never uses; the body carries the claim.
    Clickbait,
    /// Body only talks about the theme; the title carries the claim.
    ThinBody,
}

pub struct ThemeCorpus {
    pub factchecks: Vec<FactCheck>,
    pub articles: Vec<Article>,
    /// Source fact check of each article.
    pub source: Vec<usize>,
    pub style: Vec<ArticleStyle>,
    pub theme_of_factcheck: Vec<usize>,
    pub labels: LabelSet,
}

/// Fact checks grouped into themes, each with its own claim words, and
/// articles restating one claim in one of three styles. Every
/// (article, fact check) pair is labeled: the source is on claim, the rest
/// of its theme on theme, everything else irrelevant.
pub fn theme_corpus(p: ThemeParams) -> ThemeCorpus {
    let pool = word_pool(p.seed ^ 0x5eed);
    let mut words = pool.into_iter();
    let mut take = |n: usize| -> Vec<String> { words.by_ref().take(n).collect() };
    let noise = take(60);
    let bait = take(20);
    let theme_words: Vec<Vec<String>> = (0..p.themes).map(|_| take(20)).collect();
    let claim_words: Vec<Vec<String>> = (0..p.themes * p.claims_per_theme).map(|_| take(5)).collect();

    let mut r = rng(p.seed);
    let mut factchecks = Vec::new();
    let mut theme_of_factcheck = Vec::new();
    for (t, words) in theme_words.iter().enumerate() {
        for c in 0..p.claims_per_theme {
            let j = t * p.claims_per_theme + c;
            let cw = &claim_words[j];
            let mut claim = cw.clone();
            claim.extend(sample(&mut r, words, 2));
            let url = format!("https://checker{}.example/review/{j}", j % 3);
            let mut fc = FactCheck::new(&url, &format!("Review {j}"), &claim.join(" ")).unwrap();
            let mut body = cw.clone();
            body.extend(cw.iter().cloned());
            body.extend(sample(&mut r, words, 30));
            body.extend(sample(&mut r, &noise, 20));
            body.shuffle(&mut r);
            fc.body_text = Some(body.join(" "));
            factchecks.push(fc);
            theme_of_factcheck.push(t);
        }
    }

    let mut articles = Vec::new();
    let mut source = Vec::new();
    let mut style = Vec::new();
    for i in 0..p.articles {
        let j = r.random_range(0..factchecks.len());
        let t = theme_of_factcheck[j];
        let cw = &claim_words[j];
        let s = p.only.unwrap_or(match i % 5 {
            0 => ArticleStyle::Clickbait,
            1 => ArticleStyle::ThinBody,
            _ => ArticleStyle::Plain,
        });
        let mut title: Vec<String> = cw.choose_multiple(&mut r, 4).cloned().collect();
        title.extend(sample(&mut r, &noise, 1));
        if s == ArticleStyle::Clickbait {
            title = sample(&mut r, &bait, 5);
        }
        let mut body = sample(&mut r, &theme_words[t], 30);
        body.extend(sample(&mut r, &noise, 20));
        if s != ArticleStyle::ThinBody {
            body.extend(cw.choose_multiple(&mut r, 3).cloned());
        }
        body.shuffle(&mut r);
        let url = format!("https://news{}.example/story/{i}", i % 4);
        articles.push(Article::new(&url, &title.join(" "), &body.join(" ")).unwrap());
        source.push(j);
        style.push(s);
    }

    let mut judgments = Vec::new();
    for (a, &j) in articles.iter().zip(&source) {
        for (f, fc) in factchecks.iter().enumerate() {
            let label = if f == j {
                RelevanceLabel::OnClaim
            } else if theme_of_factcheck[f] == theme_of_factcheck[j] {
                RelevanceLabel::OnTheme
            } else {
                RelevanceLabel::Irrelevant
            };
            judgments.push(LabeledJudgment {
                article_id: a.id.clone(),
                factcheck_id: fc.id.clone(),
                label,
                annotator: None,
            });
        }
    }
    ThemeCorpus {
        factchecks,
        articles,
        source,
        style,
        theme_of_factcheck,
        labels: LabelSet::new(judgments).unwrap(),
    }
}

/// Token lists of fact checks as the vocabulary builder expects them.
pub fn factcheck_documents(fcs: &[FactCheck]) -> Vec<Vec<String>> {
    fcs.iter().map(|f| tokenize(&f.full_text())).collect()
}

/// Vocabulary, topic model and fact-check index over a corpus, the way the
/// command-line pipeline assembles them. The first `thematic` topics are
/// marked thematic.
pub fn engine(
    fcs: &[FactCheck],
    k: usize,
    iterations: usize,
    seed: u64,
    thematic: usize,
) -> (Featurizer, FactCheckIndex) {
    let docs = factcheck_documents(fcs);
    let vocab = Arc::new(Vocabulary::build(&docs).unwrap());
    let bows: Vec<_> = docs.iter().map(|d| vocab.to_bow(d)).collect();
    let params = LdaParams::new(k).iterations(iterations).seed(seed);
    let (model, _) = train_lda(&bows, vocab, &params).unwrap();
    let model = model.with_thematic((0..thematic).collect()).unwrap();
    let featurizer = Featurizer::new(Arc::new(model), InferParams::default());
    let index = FactCheckIndex::build(fcs, &featurizer).unwrap();
    (featurizer, index)
}
