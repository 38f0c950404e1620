//! TF-IDF vector-space model with cosine similarity.
//!
//! Term weights are raw in-document counts scaled by `ln(N / df)`, where
//! `N` and `df` come from the vocabulary the index was built against.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::{tokenize, BagOfWords, TermId, Vocabulary};

/// Non-negative sparse weights keyed by term id. Zero entries are never stored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SparseVector {
    entries: Vec<(TermId, f64)>,
}

impl SparseVector {
    /// Entries may come in any order; zero weights are dropped and repeated
    /// ids summed. Panics on negative or non-finite weights.
    pub fn from_entries(entries: impl IntoIterator<Item = (TermId, f64)>) -> Self {
        let mut entries: Vec<(TermId, f64)> = entries.into_iter().collect();
        assert!(
            entries.iter().all(|&(_, w)| w.is_finite() && w >= 0.0),
            "sparse weights must be finite and non-negative"
        );
        entries.sort_by_key(|&(t, _)| t);
        let mut merged: Vec<(TermId, f64)> = Vec::with_capacity(entries.len());
        for (t, w) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == t => last.1 += w,
                _ => merged.push((t, w)),
            }
        }
        merged.retain(|&(_, w)| w > 0.0);
        Self { entries: merged }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, term: TermId) -> f64 {
        self.entries
            .binary_search_by_key(&term, |&(t, _)| t)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (TermId, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut sum) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }

    pub fn norm_squared(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum()
    }

    pub fn scaled(&self, c: f64) -> SparseVector {
        SparseVector::from_entries(self.entries.iter().map(|&(t, w)| (t, w * c)))
    }
}

/// `ln(n_docs / doc_freq)`; zero when either count is zero.
pub fn idf_weight(n_docs: usize, doc_freq: u32) -> f64 {
    if n_docs == 0 || doc_freq == 0 {
        0.0
    } else {
        (n_docs as f64 / doc_freq as f64).ln()
    }
}

/// IDF of a term under a vocabulary; out-of-vocabulary terms weigh 0.
pub fn idf(term: &str, vocab: &Vocabulary) -> f64 {
    vocab
        .doc_freq(term)
        .map_or(0.0, |df| idf_weight(vocab.n_docs(), df))
}

/// Raw count times IDF for each term of the bag.
pub fn vectorize(bow: &BagOfWords, vocab: &Vocabulary) -> SparseVector {
    SparseVector::from_entries(bow.counts().iter().map(|(&t, &c)| {
        (
            t,
            c as f64 * idf_weight(vocab.n_docs(), vocab.doc_freq_by_id(t)),
        )
    }))
}

/// Tokenize, bag and vectorize a piece of text.
pub fn vectorize_text(text: &str, vocab: &Vocabulary) -> SparseVector {
    vectorize(&vocab.to_bow(&tokenize(text)), vocab)
}

fn cosine_with_norms(u: &SparseVector, nu2: f64, v: &SparseVector, nv2: f64) -> f64 {
    if nu2 == 0.0 || nv2 == 0.0 {
        return 0.0;
    }
    (u.dot(v) / (nu2 * nv2).sqrt()).clamp(0.0, 1.0)
}

/// Cosine of the angle between two vectors, 0 if either is empty.
pub fn cosine(u: &SparseVector, v: &SparseVector) -> f64 {
    cosine_with_norms(u, u.norm_squared(), v, v.norm_squared())
}

/// Which text field an index covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldTag {
    Title,
    Body,
    Claim,
}

impl fmt::Display for FieldTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldTag::Title => "title",
            FieldTag::Body => "body",
            FieldTag::Claim => "claim",
        })
    }
}

impl FromStr for FieldTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "title" => Ok(FieldTag::Title),
            "body" => Ok(FieldTag::Body),
            "claim" => Ok(FieldTag::Claim),
            other => Err(Error::InvalidInput(format!("unknown field {other:?}"))),
        }
    }
}

/// Immutable TF-IDF vectors for one field of a record collection.
#[derive(Debug, Clone)]
pub struct TfIdfIndex {
    vocab: Arc<Vocabulary>,
    field: FieldTag,
    ids: Vec<String>,
    vectors: Vec<SparseVector>,
    norms_squared: Vec<f64>,
    positions: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct SnapshotHeader {
    field: FieldTag,
    vocab_fingerprint: String,
    n_docs: usize,
}

#[derive(Serialize, Deserialize)]
struct SnapshotRow {
    id: String,
    vector: SparseVector,
}

impl TfIdfIndex {
    /// Index `(id, text)` records. Records with no in-vocabulary content get
    /// an empty vector. Duplicate ids are an error.
    pub fn build<I, S, T>(records: I, vocab: Arc<Vocabulary>, field: FieldTag) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        let pairs: Vec<(String, SparseVector)> = records
            .into_iter()
            .map(|(id, text)| (id.into(), vectorize_text(text.as_ref(), &vocab)))
            .collect();
        Self::from_vectors(pairs, vocab, field)
    }

    pub fn from_vectors(
        pairs: Vec<(String, SparseVector)>,
        vocab: Arc<Vocabulary>,
        field: FieldTag,
    ) -> Result<Self> {
        let mut positions = HashMap::with_capacity(pairs.len());
        let mut ids = Vec::with_capacity(pairs.len());
        let mut vectors = Vec::with_capacity(pairs.len());
        for (i, (id, v)) in pairs.into_iter().enumerate() {
            if v.iter().any(|(t, _)| t as usize >= vocab.len()) {
                return Err(Error::VocabularyMismatch("index vector"));
            }
            if positions.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId(id));
            }
            ids.push(id);
            vectors.push(v);
        }
        let norms_squared = vectors.iter().map(SparseVector::norm_squared).collect();
        Ok(Self {
            vocab,
            field,
            ids,
            vectors,
            norms_squared,
            positions,
        })
    }

    pub fn field(&self) -> FieldTag {
        self.field
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn n_docs(&self) -> usize {
        self.vectors.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.positions.get(id).copied()
    }

    pub fn vector(&self, id: &str) -> Option<&SparseVector> {
        self.position(id).map(|i| &self.vectors[i])
    }

    pub fn vector_at(&self, pos: usize) -> &SparseVector {
        &self.vectors[pos]
    }

    pub fn idf(&self, term: &str) -> f64 {
        idf(term, &self.vocab)
    }

    /// Cosine between a query vector and the stored vector at `pos`.
    pub fn cosine_at(&self, query: &SparseVector, pos: usize) -> f64 {
        cosine_with_norms(
            query,
            query.norm_squared(),
            &self.vectors[pos],
            self.norms_squared[pos],
        )
    }

    /// Cosine against every stored vector, in storage order.
    pub fn score_all(&self, query: &SparseVector) -> Vec<f64> {
        let nq = query.norm_squared();
        self.vectors
            .iter()
            .zip(&self.norms_squared)
            .map(|(v, &nv)| cosine_with_norms(query, nq, v, nv))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header = SnapshotHeader {
            field: self.field,
            vocab_fingerprint: self.vocab.fingerprint(),
            n_docs: self.n_docs(),
        };
        let io = |e: serde_json::Error| Error::io(path, std::io::Error::other(e));
        serde_json::to_writer(&mut w, &header).map_err(io)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        for (id, vector) in self.ids.iter().zip(&self.vectors) {
            serde_json::to_writer(
                &mut w,
                &SnapshotRow {
                    id: id.clone(),
                    vector: vector.clone(),
                },
            )
            .map_err(io)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, vocab: Arc<Vocabulary>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        let fmt_err = |line: usize, e: serde_json::Error| Error::Format {
            line: line + 1,
            message: e.to_string(),
        };
        let (_, head) = lines.next().ok_or(Error::Format {
            line: 1,
            message: "missing index header".into(),
        })?;
        let header: SnapshotHeader = serde_json::from_str(head).map_err(|e| fmt_err(0, e))?;
        if header.vocab_fingerprint != vocab.fingerprint() {
            return Err(Error::VocabularyMismatch("index snapshot"));
        }
        let mut pairs = Vec::with_capacity(header.n_docs);
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let row: SnapshotRow = serde_json::from_str(line).map_err(|e| fmt_err(i, e))?;
            pairs.push((row.id, row.vector));
        }
        if pairs.len() != header.n_docs {
            return Err(Error::InvalidInput(format!(
                "index header promises {} docs, found {}",
                header.n_docs,
                pairs.len()
            )));
        }
        Self::from_vectors(pairs, vocab, header.field)
    }
}
