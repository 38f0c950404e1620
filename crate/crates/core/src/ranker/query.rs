use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::index::idf;
use crate::textproc::{tokenize, Vocabulary};

/// A short search query distilled from a claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub terms: Vec<String>,
    /// The claim had no in-vocabulary tokens left.
    pub empty: bool,
}

impl Query {
    pub fn text(&self) -> String {
        self.terms.join(" ")
    }
}

/// Keep the `max_terms` distinct in-vocabulary tokens of `claim` with the
/// highest IDF, in their original order. IDF ties favour earlier tokens.
pub fn build_query(claim: &str, vocab: &Vocabulary, max_terms: usize) -> Query {
    let mut seen = HashSet::new();
    let candidates: Vec<(usize, String, f64)> = tokenize(claim)
        .into_iter()
        .filter(|t| vocab.id(t).is_some() && seen.insert(t.clone()))
        .enumerate()
        .map(|(i, t)| {
            let w = idf(&t, vocab);
            (i, t, w)
        })
        .collect();

    let mut by_idf: Vec<&(usize, String, f64)> = candidates.iter().collect();
    by_idf.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    let mut keep: Vec<usize> = by_idf.iter().take(max_terms).map(|c| c.0).collect();
    keep.sort_unstable();

    let terms: Vec<String> = keep.into_iter().map(|i| candidates[i].1.clone()).collect();
    Query {
        empty: terms.is_empty(),
        terms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        let docs: Vec<Vec<String>> = [
            "fukushima reactor ocean",
            "reactor leak",
            "ocean warming",
            "vaccine autism",
            "election fraud",
            "moon landing",
        ]
        .iter()
        .map(|d| tokenize(d))
        .collect();
        Vocabulary::build(&docs).unwrap()
    }

    #[test]
    fn keeps_highest_idf_in_original_order() {
        let v = vocab();
        let q = build_query("The ocean reactor at Fukushima", &v, 2);
        // fukushima (df 1) beats ocean and reactor (df 2); ocean comes first
        assert_eq!(q.terms, ["ocean", "fukushima"]);
        assert!(!q.empty);
    }

    #[test]
    fn clamps_and_dedupes() {
        let v = vocab();
        let q = build_query("reactor reactor leak", &v, 10);
        assert_eq!(q.terms, ["reactor", "leak"]);
    }

    #[test]
    fn nothing_left_is_flagged() {
        let v = vocab();
        let q = build_query("the of and", &v, 5);
        assert!(q.empty);
        assert!(q.terms.is_empty());
        assert!(build_query("ocean", &v, 0).empty);
    }
}
