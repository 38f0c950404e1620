//! Tokenization, stemming, document-frequency vocabulary filtering and
//! bag-of-words construction shared by the index and topic modules.

mod stem;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use stem::stem;

/// Identifier of a term inside a [`Vocabulary`].
pub type TermId = u32;

const MIN_TOKEN_CHARS: usize = 2;

/// Lowercase, split on non-alphanumeric boundaries, drop tokens shorter
/// than two characters and stem what is left.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= MIN_TOKEN_CHARS)
        .map(|t| {
            if t.chars().all(|c| c.is_numeric()) {
                t.to_string()
            } else {
                stem(t)
            }
        })
        .collect()
}

/// Term counts of one document, restricted to a vocabulary.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BagOfWords {
    counts: BTreeMap<TermId, u32>,
    total: u32,
}

impl BagOfWords {
    pub fn from_counts(counts: BTreeMap<TermId, u32>) -> Self {
        let counts: BTreeMap<_, _> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        let total = counts.values().sum();
        Self { counts, total }
    }

    pub fn counts(&self) -> &BTreeMap<TermId, u32> {
        &self.counts
    }

    pub fn count(&self, term: TermId) -> u32 {
        self.counts.get(&term).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Term ids repeated by count, in ascending id order.
    pub fn expand(&self) -> Vec<TermId> {
        self.counts
            .iter()
            .flat_map(|(&t, &c)| std::iter::repeat_n(t, c as usize))
            .collect()
    }
}

/// Filtered, lexicographically ordered vocabulary with document frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    term_ids: HashMap<String, TermId>,
    doc_freq: Vec<u32>,
    n_docs: usize,
}

impl Vocabulary {
    /// Build from tokenized documents, dropping every token that occurs in
    /// more than half of them.
    pub fn build<S: AsRef<str>>(documents: &[Vec<S>]) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::InvalidInput(
                "vocabulary needs at least one document".into(),
            ));
        }
        let mut df: BTreeMap<&str, u32> = BTreeMap::new();
        for doc in documents {
            let distinct: HashSet<&str> = doc.iter().map(AsRef::as_ref).collect();
            for t in distinct {
                *df.entry(t).or_default() += 1;
            }
        }
        let n_docs = documents.len();
        let retained = df
            .into_iter()
            .filter(|&(_, d)| 2 * d as usize <= n_docs)
            .map(|(t, d)| (t.to_string(), d));
        Ok(Self::from_sorted(retained, n_docs))
    }

    fn from_sorted(entries: impl Iterator<Item = (String, u32)>, n_docs: usize) -> Self {
        let mut terms = Vec::new();
        let mut doc_freq = Vec::new();
        for (t, d) in entries {
            terms.push(t);
            doc_freq.push(d);
        }
        let term_ids = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TermId))
            .collect();
        Self {
            terms,
            term_ids,
            doc_freq,
            n_docs,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn id(&self, term: &str) -> Option<TermId> {
        self.term_ids.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> Option<&str> {
        self.terms.get(id as usize).map(String::as_str)
    }

    pub fn doc_freq(&self, term: &str) -> Option<u32> {
        self.id(term).map(|i| self.doc_freq[i as usize])
    }

    pub fn doc_freq_by_id(&self, id: TermId) -> u32 {
        self.doc_freq[id as usize]
    }

    /// Bag of in-vocabulary tokens; out-of-vocabulary tokens are dropped.
    pub fn to_bow<S: AsRef<str>>(&self, tokens: &[S]) -> BagOfWords {
        let mut counts = BTreeMap::new();
        for t in tokens {
            if let Some(id) = self.id(t.as_ref()) {
                *counts.entry(id).or_insert(0u32) += 1;
            }
        }
        BagOfWords::from_counts(counts)
    }

    /// Tokenize then bag.
    pub fn bow_of(&self, text: &str) -> BagOfWords {
        self.to_bow(&tokenize(text))
    }

    /// `vocab.tsv` rendering: a `#n_docs` header then `term, id, df` rows.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("#n_docs\t{}\n", self.n_docs);
        for (i, t) in self.terms.iter().enumerate() {
            let _ = writeln!(out, "{t}\t{i}\t{}", self.doc_freq[i]);
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut n_docs = None;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Format {
                line: lineno,
                message: msg.to_string(),
            };
            if let Some(rest) = line.strip_prefix("#n_docs\t") {
                n_docs = Some(rest.trim().parse().map_err(|_| bad("bad n_docs"))?);
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(bad("expected term, term_id, doc_freq"));
            }
            let id: usize = cols[1].parse().map_err(|_| bad("bad term_id"))?;
            let df: u32 = cols[2].parse().map_err(|_| bad("bad doc_freq"))?;
            if id != entries.len() {
                return Err(bad("term ids must be dense and ordered"));
            }
            entries.push((cols[0].to_string(), df));
        }
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidInput("vocab terms not sorted".into()));
        }
        let n_docs = n_docs.ok_or_else(|| Error::InvalidInput("missing #n_docs header".into()))?;
        Ok(Self::from_sorted(entries.into_iter(), n_docs))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text)
    }

    /// Content hash used to tie indexes and topic models to a vocabulary.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_tsv().as_bytes()))
    }
}
