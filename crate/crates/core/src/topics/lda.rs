//! Collapsed Gibbs sampling for latent Dirichlet allocation.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{TopicMixture, TopicModel};
use crate::error::{Error, Result};
use crate::textproc::{BagOfWords, TermId, Vocabulary};

#[derive(Debug, Clone, PartialEq)]
pub struct LdaParams {
    pub k: usize,
    /// Symmetric document-topic prior.
    pub alpha: f64,
    /// Symmetric topic-word prior.
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaParams {
    /// `alpha = 50 / k`, `beta = 0.01`, 1000 sweeps, seed 0.
    pub fn new(k: usize) -> Self {
        Self {
            k,
            alpha: 50.0 / k.max(1) as f64,
            beta: 0.01,
            iterations: 1000,
            seed: 0,
        }
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrainReport {
    pub documents: usize,
    pub skipped_empty: usize,
    pub tokens: usize,
}

/// Fit an LDA model. Empty bags are skipped and counted.
pub fn train_lda(
    bows: &[BagOfWords],
    vocab: Arc<Vocabulary>,
    params: &LdaParams,
) -> Result<(TopicModel, TrainReport)> {
    let LdaParams {
        k,
        alpha,
        beta,
        iterations,
        seed,
    } = *params;
    if bows.is_empty() {
        return Err(Error::InvalidInput("no documents to train on".into()));
    }
    if k < 2 {
        return Err(Error::InvalidInput(format!("k = {k}, need at least 2 topics")));
    }
    if k > vocab.len() {
        return Err(Error::InvalidInput(format!(
            "k = {k} exceeds the vocabulary size {}",
            vocab.len()
        )));
    }
    if iterations == 0 {
        return Err(Error::InvalidInput("iterations must be >= 1".into()));
    }
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidInput("alpha and beta must be positive".into()));
    }

    let v = vocab.len();
    let docs: Vec<Vec<TermId>> = bows
        .iter()
        .filter(|b| !b.is_empty())
        .map(BagOfWords::expand)
        .collect();
    let report = TrainReport {
        documents: docs.len(),
        skipped_empty: bows.len() - docs.len(),
        tokens: docs.iter().map(Vec::len).sum(),
    };
    if report.skipped_empty > 0 {
        log::warn!("skipped {} empty documents", report.skipped_empty);
    }
    if docs.is_empty() {
        return Err(Error::InvalidInput("every document is empty".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut doc_topic = vec![vec![0u32; k]; docs.len()];
    let mut topic_term = vec![0u32; k * v];
    let mut topic_total = vec![0u32; k];
    let mut assignments: Vec<Vec<usize>> = docs
        .iter()
        .enumerate()
        .map(|(d, words)| {
            words
                .iter()
                .map(|&w| {
                    let z = rng.random_range(0..k);
                    doc_topic[d][z] += 1;
                    topic_term[z * v + w as usize] += 1;
                    topic_total[z] += 1;
                    z
                })
                .collect()
        })
        .collect();

    let v_beta = v as f64 * beta;
    let mut weights = vec![0.0f64; k];
    for _ in 0..iterations {
        for (d, words) in docs.iter().enumerate() {
            for (i, &w) in words.iter().enumerate() {
                let w = w as usize;
                let old = assignments[d][i];
                doc_topic[d][old] -= 1;
                topic_term[old * v + w] -= 1;
                topic_total[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    total += (doc_topic[d][t] as f64 + alpha)
                        * (topic_term[t * v + w] as f64 + beta)
                        / (topic_total[t] as f64 + v_beta);
                    weights[t] = total;
                }
                let new = sample_cumulative(&weights, total, &mut rng);

                assignments[d][i] = new;
                doc_topic[d][new] += 1;
                topic_term[new * v + w] += 1;
                topic_total[new] += 1;
            }
        }
    }

    let term_counts: Vec<BTreeMap<TermId, u32>> = (0..k)
        .map(|t| {
            topic_term[t * v..(t + 1) * v]
                .iter()
                .enumerate()
                .filter(|&(_, &c)| c > 0)
                .map(|(w, &c)| (w as TermId, c))
                .collect()
        })
        .collect();
    let model = TopicModel::from_counts(
        vocab,
        term_counts,
        alpha,
        beta,
        seed,
        iterations,
        BTreeSet::new(),
    )?;
    Ok((model, report))
}

fn sample_cumulative(cumulative: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let u = rng.random::<f64>() * total;
    cumulative
        .iter()
        .position(|&c| u < c)
        .unwrap_or(cumulative.len() - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferParams {
    pub iterations: usize,
    pub seed: u64,
    /// Mixture entries below this weight are dropped before renormalizing.
    pub floor: f64,
}

impl Default for InferParams {
    fn default() -> Self {
        Self {
            iterations: 100,
            seed: 0,
            floor: 0.01,
        }
    }
}

/// Topic proportions of a new document with the topic-word distributions
/// held fixed. The estimate averages the Gibbs state over the second half
/// of the sweeps.
pub fn infer_mixture(bow: &BagOfWords, model: &TopicModel, params: &InferParams) -> TopicMixture {
    let k = model.k();
    let words: Vec<usize> = bow
        .expand()
        .into_iter()
        .map(|w| w as usize)
        .filter(|&w| w < model.vocab().len())
        .collect();
    if words.is_empty() {
        return TopicMixture::uniform(k);
    }
    let alpha = model.alpha();
    let phi = model.topic_word();
    let iterations = params.iterations.max(1);
    let burn_in = iterations / 2;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut counts = vec![0u32; k];
    let mut z: Vec<usize> = words
        .iter()
        .map(|_| {
            let t = rng.random_range(0..k);
            counts[t] += 1;
            t
        })
        .collect();

    let mut acc = vec![0.0f64; k];
    let mut weights = vec![0.0f64; k];
    let denom = words.len() as f64 + k as f64 * alpha;
    for sweep in 0..iterations {
        for (i, &w) in words.iter().enumerate() {
            counts[z[i]] -= 1;
            let mut total = 0.0;
            for t in 0..k {
                total += (counts[t] as f64 + alpha) * phi[t][w];
                weights[t] = total;
            }
            let new = sample_cumulative(&weights, total, &mut rng);
            z[i] = new;
            counts[new] += 1;
        }
        if sweep >= burn_in {
            for t in 0..k {
                acc[t] += (counts[t] as f64 + alpha) / denom;
            }
        }
    }
    let samples = (iterations - burn_in) as f64;
    let theta: Vec<f64> = acc.into_iter().map(|a| a / samples).collect();
    TopicMixture::from_dense(&theta, params.floor)
}
