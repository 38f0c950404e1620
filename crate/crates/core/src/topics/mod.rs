//! Topic modeling over the fact-check corpus and the thematic-topic workflow.

mod kmeans;
mod lda;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::textproc::{TermId, Vocabulary};

pub use kmeans::kmeans_baseline;
pub use lda::{infer_mixture, train_lda, InferParams, LdaParams, TrainReport};

/// Trained topics: per-topic term distributions plus the manually chosen
/// thematic subset. Distributions are derived from the final sampler
/// counts, which is also what gets persisted.
#[derive(Debug, Clone)]
pub struct TopicModel {
    vocab: Arc<Vocabulary>,
    alpha: f64,
    beta: f64,
    seed: u64,
    iterations: usize,
    term_counts: Vec<BTreeMap<TermId, u32>>,
    topic_word: Vec<Vec<f64>>,
    thematic_ids: BTreeSet<usize>,
}

impl TopicModel {
    pub(crate) fn from_counts(
        vocab: Arc<Vocabulary>,
        term_counts: Vec<BTreeMap<TermId, u32>>,
        alpha: f64,
        beta: f64,
        seed: u64,
        iterations: usize,
        thematic_ids: BTreeSet<usize>,
    ) -> Result<Self> {
        let v = vocab.len();
        if term_counts
            .iter()
            .any(|row| row.keys().any(|&t| t as usize >= v))
        {
            return Err(Error::VocabularyMismatch("topic counts"));
        }
        let topic_word = term_counts
            .iter()
            .map(|row| {
                let mut dense = vec![beta; v];
                for (&t, &c) in row {
                    dense[t as usize] += c as f64;
                }
                let sum: f64 = dense.iter().sum();
                dense.iter_mut().for_each(|p| *p /= sum);
                dense
            })
            .collect();
        let model = Self {
            vocab,
            alpha,
            beta,
            seed,
            iterations,
            term_counts,
            topic_word,
            thematic_ids: BTreeSet::new(),
        };
        model.with_thematic(thematic_ids)
    }

    pub fn k(&self) -> usize {
        self.topic_word.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    /// `k` rows, one probability per vocabulary term.
    pub fn topic_word(&self) -> &[Vec<f64>] {
        &self.topic_word
    }

    pub fn thematic_ids(&self) -> &BTreeSet<usize> {
        &self.thematic_ids
    }

    /// Replace the thematic topic set. Ids must be below `k`.
    pub fn with_thematic(mut self, ids: BTreeSet<usize>) -> Result<Self> {
        if let Some(&bad) = ids.iter().find(|&&id| id >= self.k()) {
            return Err(Error::TopicOutOfRange {
                id: bad,
                k: self.k(),
            });
        }
        self.thematic_ids = ids;
        Ok(self)
    }

    /// The `n` most probable terms of a topic; ties go to the
    /// lexicographically smaller term.
    pub fn top_words(&self, topic_id: usize, n: usize) -> Result<Vec<(String, f64)>> {
        let row = self.topic_word.get(topic_id).ok_or(Error::TopicOutOfRange {
            id: topic_id,
            k: self.k(),
        })?;
        let mut ranked: Vec<(usize, f64)> = row.iter().copied().enumerate().collect();
        // terms are stored sorted, so id order is lexicographic order
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(ranked
            .into_iter()
            .take(n)
            .map(|(t, p)| (self.vocab.terms()[t].clone(), p))
            .collect())
    }

    /// Content hash of the persisted form.
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        hex::encode(Sha256::digest(&buf))
    }

    fn header(&self) -> ModelHeader {
        ModelHeader {
            k: self.k(),
            alpha: self.alpha,
            beta: self.beta,
            seed: self.seed,
            iterations: self.iterations,
            vocab_size: self.vocab.len(),
            vocab_fingerprint: self.vocab.fingerprint(),
            thematic_ids: self.thematic_ids.iter().copied().collect(),
        }
    }

    fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        serde_json::to_writer(&mut *w, &self.header())?;
        w.write_all(b"\n")?;
        for row in &self.term_counts {
            let pairs: Vec<(TermId, u32)> = row.iter().map(|(&t, &c)| (t, c)).collect();
            serde_json::to_writer(&mut *w, &pairs)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// `topics.model`: a JSON header line, then one line of sparse
    /// `[term_id, count]` pairs per topic.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, vocab: Arc<Vocabulary>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let fmt_err = |line: usize, message: String| Error::Format { line, message };
        let header: ModelHeader = serde_json::from_str(
            lines
                .next()
                .ok_or_else(|| fmt_err(1, "missing model header".into()))?,
        )
        .map_err(|e| fmt_err(1, e.to_string()))?;
        if header.vocab_fingerprint != vocab.fingerprint() || header.vocab_size != vocab.len() {
            return Err(Error::VocabularyMismatch("topic model"));
        }
        let mut term_counts = Vec::with_capacity(header.k);
        for (i, line) in lines.enumerate() {
            let pairs: Vec<(TermId, u32)> =
                serde_json::from_str(line).map_err(|e| fmt_err(i + 2, e.to_string()))?;
            term_counts.push(pairs.into_iter().collect());
        }
        if term_counts.len() != header.k {
            return Err(Error::InvalidInput(format!(
                "model header promises {} topics, found {}",
                header.k,
                term_counts.len()
            )));
        }
        Self::from_counts(
            vocab,
            term_counts,
            header.alpha,
            header.beta,
            header.seed,
            header.iterations,
            header.thematic_ids.into_iter().collect(),
        )
    }
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    k: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    iterations: usize,
    vocab_size: usize,
    vocab_fingerprint: String,
    thematic_ids: Vec<usize>,
}

/// Replace a model's thematic topics.
pub fn set_thematic(model: TopicModel, topic_ids: BTreeSet<usize>) -> Result<TopicModel> {
    model.with_thematic(topic_ids)
}

/// Topic proportions of one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicMixture {
    pub weights: BTreeMap<usize, f64>,
    /// Set when the document had no in-vocabulary content and the mixture
    /// is the uniform fallback.
    #[serde(default)]
    pub degenerate: bool,
}

impl TopicMixture {
    pub fn uniform(k: usize) -> Self {
        Self {
            weights: (0..k).map(|t| (t, 1.0 / k as f64)).collect(),
            degenerate: true,
        }
    }

    /// Drop entries under `floor` and renormalize. If every entry is under
    /// the floor nothing is dropped.
    pub fn from_dense(theta: &[f64], floor: f64) -> Self {
        let mut weights: BTreeMap<usize, f64> = theta
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, w)| w >= floor && w > 0.0)
            .collect();
        if weights.is_empty() {
            weights = theta
                .iter()
                .copied()
                .enumerate()
                .filter(|&(_, w)| w > 0.0)
                .collect();
        }
        let sum: f64 = weights.values().sum();
        weights.values_mut().for_each(|w| *w /= sum);
        Self {
            weights,
            degenerate: false,
        }
    }

    pub fn weight(&self, topic: usize) -> f64 {
        self.weights.get(&topic).copied().unwrap_or(0.0)
    }

    /// The highest-weight topic; lowest id on ties.
    pub fn dominant(&self) -> Option<(usize, f64)> {
        self.weights
            .iter()
            .map(|(&t, &w)| (t, w))
            .fold(None, |best, (t, w)| match best {
                Some((_, bw)) if bw >= w => best,
                _ => Some((t, w)),
            })
    }
}

/// Cosine between two mixtures in topic space, optionally projected onto a
/// subset of topics first. Zero-norm projections score 0.
pub fn topic_cosine(m1: &TopicMixture, m2: &TopicMixture, restrict: Option<&BTreeSet<usize>>) -> f64 {
    let keep = |t: &usize| restrict.is_none_or(|r| r.contains(t));
    let norm2 = |m: &TopicMixture| -> f64 {
        m.weights
            .iter()
            .filter(|(t, _)| keep(t))
            .map(|(_, w)| w * w)
            .sum()
    };
    let (n1, n2) = (norm2(m1), norm2(m2));
    if n1 == 0.0 || n2 == 0.0 {
        return 0.0;
    }
    let dot: f64 = m1
        .weights
        .iter()
        .filter(|(t, _)| keep(t))
        .map(|(t, w)| w * m2.weight(*t))
        .sum();
    (dot / (n1 * n2).sqrt()).clamp(0.0, 1.0)
}

/// Documents with the largest weight on a topic, descending, ties by id.
/// Documents with zero weight on the topic are never returned.
pub fn top_documents<'a, I>(mixtures: I, topic_id: usize, n: usize) -> Vec<String>
where
    I: IntoIterator<Item = (&'a str, &'a TopicMixture)>,
{
    let mut ranked: Vec<(&str, f64)> = mixtures
        .into_iter()
        .map(|(id, m)| (id, m.weight(topic_id)))
        .filter(|&(_, w)| w > 0.0)
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.into_iter().take(n).map(|(id, _)| id.to_string()).collect()
}
