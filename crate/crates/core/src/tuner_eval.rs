//! Relevance labels, grid tuning of the ranking weights and the
//! per-feature ablation report.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranker::{rerank, DocFeatures, FactCheckIndex, FeatureMask, ScoredResult, Weights};

/// Number of fact checks retrieved per article during tuning and evaluation.
pub const EVAL_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelevanceLabel {
    OnClaim,
    OnTheme,
    Irrelevant,
}

impl RelevanceLabel {
    pub fn value(self) -> i64 {
        match self {
            RelevanceLabel::OnClaim => 2,
            RelevanceLabel::OnTheme => 1,
            RelevanceLabel::Irrelevant => -2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledJudgment {
    pub article_id: String,
    pub factcheck_id: String,
    pub label: RelevanceLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator: Option<String>,
}

pub fn cumulative_score(judgments: &[LabeledJudgment]) -> i64 {
    judgments.iter().map(|j| j.label.value()).sum()
}

/// A validated label file, indexed by (article, fact check).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelSet {
    judgments: Vec<LabeledJudgment>,
    index: HashMap<(String, String), usize>,
}

impl LabelSet {
    pub fn new(judgments: Vec<LabeledJudgment>) -> Result<Self> {
        let mut index = HashMap::with_capacity(judgments.len());
        for (i, j) in judgments.iter().enumerate() {
            let key = (j.article_id.clone(), j.factcheck_id.clone());
            if let Some(first) = index.insert(key, i) {
                return Err(duplicate(j, first + 1, i + 1));
            }
        }
        Ok(Self { judgments, index })
    }

    pub fn judgments(&self) -> &[LabeledJudgment] {
        &self.judgments
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }

    pub fn get(&self, article_id: &str, factcheck_id: &str) -> Option<RelevanceLabel> {
        self.index
            .get(&(article_id.to_string(), factcheck_id.to_string()))
            .map(|&i| self.judgments[i].label)
    }

    /// Label of a pair, with unlabeled pairs counted as irrelevant.
    pub fn label_or_irrelevant(&self, article_id: &str, factcheck_id: &str) -> RelevanceLabel {
        self.get(article_id, factcheck_id)
            .unwrap_or(RelevanceLabel::Irrelevant)
    }

    /// Articles in first-appearance order.
    pub fn article_ids(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.judgments
            .iter()
            .filter(|j| seen.insert(j.article_id.as_str()))
            .map(|j| j.article_id.clone())
            .collect()
    }

    pub fn has_on_claim(&self, article_id: &str) -> bool {
        self.judgments
            .iter()
            .any(|j| j.article_id == article_id && j.label == RelevanceLabel::OnClaim)
    }

    pub fn to_jsonl(&self) -> String {
        self.judgments
            .iter()
            .map(|j| serde_json::to_string(j).expect("judgments serialize") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        Self::read(text.as_bytes())
    }

    fn read(reader: impl BufRead) -> Result<Self> {
        let mut judgments = Vec::new();
        let mut seen: HashMap<(String, String), usize> = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::Format {
                line: lineno,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let j: LabeledJudgment = serde_json::from_str(&line).map_err(|e| Error::Format {
                line: lineno,
                message: e.to_string(),
            })?;
            let key = (j.article_id.clone(), j.factcheck_id.clone());
            if let Some(&first) = seen.get(&key) {
                return Err(duplicate(&j, first, lineno));
            }
            seen.insert(key, lineno);
            judgments.push(j);
        }
        Self::new(judgments)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file))
    }
}

fn duplicate(j: &LabeledJudgment, first: usize, second: usize) -> Error {
    Error::Format {
        line: second,
        message: format!(
            "duplicate judgment for ({}, {}) on lines {first} and {second}",
            j.article_id, j.factcheck_id
        ),
    }
}

/// Unweighted channel scores of one article against every fact check.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentTable {
    pub article_id: String,
    pub components: Vec<ScoredResult>,
}

/// Score each article against the whole collection once, so that weight
/// settings can be compared without recomputing similarities.
pub fn component_tables(
    articles: &[(String, DocFeatures)],
    factchecks: &FactCheckIndex,
) -> Vec<ComponentTable> {
    articles
        .par_iter()
        .map(|(id, features)| ComponentTable {
            article_id: id.clone(),
            components: factchecks.components(features),
        })
        .collect()
}

/// Candidate values per weight; tuning tries every combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub w_title: Vec<f64>,
    pub w_body: Vec<f64>,
    pub w_topics: Vec<f64>,
    pub w_thematic: Vec<f64>,
    pub t_l: Vec<f64>,
}

impl Grid {
    pub fn uniform(values: &[f64], t_l: &[f64]) -> Self {
        Self {
            w_title: values.to_vec(),
            w_body: values.to_vec(),
            w_topics: values.to_vec(),
            w_thematic: values.to_vec(),
            t_l: t_l.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.w_title.len() * self.w_body.len() * self.w_topics.len() * self.w_thematic.len() * self.t_l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every combination, lexicographically ordered by axis position.
    pub fn points(&self) -> Vec<Weights> {
        let mut out = Vec::with_capacity(self.len());
        for &a in &self.w_title {
            for &b in &self.w_body {
                for &c in &self.w_topics {
                    for &d in &self.w_thematic {
                        for &t in &self.t_l {
                            out.push(Weights::new(a, b, c, d, t));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidInput(format!("grid: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

fn tuple(w: &Weights) -> [f64; 5] {
    [w.w_title, w.w_body, w.w_topics, w.w_thematic, w.t_l]
}

fn cmp_tuple(a: &Weights, b: &Weights) -> Ordering {
    tuple(a)
        .iter()
        .zip(tuple(b).iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub weights: Weights,
    pub score: i64,
    /// Retrieved pairs without a label under the winning weights.
    pub unlabeled: usize,
}

/// Summed cumulative score of the top-`k` results of every table, plus the
/// number of unlabeled pairs encountered.
pub fn grid_point_score(
    tables: &[ComponentTable],
    labels: &LabelSet,
    weights: &Weights,
    k: usize,
) -> (i64, usize) {
    let mut score = 0;
    let mut unlabeled = 0;
    for table in tables {
        for r in rerank(&table.components, weights, k) {
            match labels.get(&table.article_id, &r.factcheck_id) {
                Some(l) => score += l.value(),
                None => {
                    unlabeled += 1;
                    score += RelevanceLabel::Irrelevant.value();
                }
            }
        }
    }
    (score, unlabeled)
}

/// Exhaustive grid search for the weights maximizing the summed cumulative
/// score. Ties go to the lexicographically smallest weight tuple.
pub fn tune_weights(
    tables: &[ComponentTable],
    labels: &LabelSet,
    grid: &Grid,
    k: usize,
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty weight grid".into()));
    }
    if tables.is_empty() || labels.is_empty() {
        return Err(Error::InvalidInput("no labeled articles to tune on".into()));
    }
    let points = grid.points();
    if let Some(bad) = points.iter().find(|w| w.validate().is_err()) {
        return Err(Error::InvalidInput(format!("invalid grid point {bad:?}")));
    }
    let best = points
        .par_iter()
        .map(|w| {
            let (score, unlabeled) = grid_point_score(tables, labels, w, k);
            TuneResult {
                weights: *w,
                score,
                unlabeled,
            }
        })
        .reduce_with(|a, b| match a.score.cmp(&b.score) {
            Ordering::Greater => a,
            Ordering::Less => b,
            Ordering::Equal => {
                if cmp_tuple(&a.weights, &b.weights).is_le() {
                    a
                } else {
                    b
                }
            }
        })
        .expect("grid is not empty");
    if best.unlabeled > 0 {
        log::warn!(
            "{} retrieved pairs have no label and were counted as irrelevant",
            best.unlabeled
        );
    }
    Ok(best)
}

/// One ablation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub name: String,
    pub weights: Weights,
}

impl EvalConfig {
    pub fn new(name: &str, weights: Weights) -> Self {
        Self {
            name: name.to_string(),
            weights,
        }
    }
}

/// Title-only, body-only, topics-only, thematic-only and all features.
///
/// Single-channel configurations weigh their channel 1 and use the
/// combined cutoff divided by the summed weights, so every configuration
/// thresholds the same weighted-mean scale.
pub fn ablation_configs(all: &Weights) -> Vec<EvalConfig> {
    let sum = all.w_title + all.w_body + all.w_topics + all.w_thematic;
    let t = if sum > 0.0 { all.t_l / sum } else { all.t_l };
    let single = |mask: FeatureMask| {
        Weights::new(1.0, 1.0, 1.0, 1.0, t).masked(mask)
    };
    vec![
        EvalConfig::new("title", single(FeatureMask::TITLE)),
        EvalConfig::new("body", single(FeatureMask::BODY)),
        EvalConfig::new("topics", single(FeatureMask::TOPICS)),
        EvalConfig::new("thematic", single(FeatureMask::THEMATIC)),
        EvalConfig::new("all", *all),
    ]
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryStat {
    pub count: usize,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigReport {
    pub name: String,
    pub weights: Weights,
    pub returned: usize,
    pub on_claim: CategoryStat,
    pub on_theme: CategoryStat,
    pub irrelevant: CategoryStat,
    /// Articles with an on-claim fact check somewhere in the labels.
    pub recall_eligible: usize,
    /// Of those, articles that got at least one on-claim result.
    pub recall_hits: usize,
    pub on_claim_recall: f64,
    pub unlabeled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub n_articles: usize,
    pub configs: Vec<ConfigReport>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Retrieve the top `k` per article under each configuration and tally
/// labels. Unlabeled retrieved pairs count as irrelevant.
pub fn evaluate(
    tables: &[ComponentTable],
    labels: &LabelSet,
    configs: &[EvalConfig],
    k: usize,
) -> EvalReport {
    let eligible: Vec<bool> = tables
        .iter()
        .map(|t| labels.has_on_claim(&t.article_id))
        .collect();
    let recall_eligible = eligible.iter().filter(|&&e| e).count();
    let reports = configs
        .iter()
        .map(|cfg| {
            let mut counts = [0usize; 3];
            let mut hits = 0;
            let mut unlabeled = 0;
            for (table, &elig) in tables.iter().zip(&eligible) {
                let mut hit = false;
                for r in rerank(&table.components, &cfg.weights, k) {
                    let label = labels.get(&table.article_id, &r.factcheck_id);
                    unlabeled += usize::from(label.is_none());
                    let slot = match label.unwrap_or(RelevanceLabel::Irrelevant) {
                        RelevanceLabel::OnClaim => {
                            hit = true;
                            0
                        }
                        RelevanceLabel::OnTheme => 1,
                        RelevanceLabel::Irrelevant => 2,
                    };
                    counts[slot] += 1;
                }
                hits += usize::from(hit && elig);
            }
            if unlabeled > 0 {
                log::warn!(
                    "{}: {unlabeled} retrieved pairs have no label and were counted as irrelevant",
                    cfg.name
                );
            }
            let returned = counts.iter().sum();
            let stat = |c: usize| CategoryStat {
                count: c,
                precision: ratio(c, returned),
            };
            ConfigReport {
                name: cfg.name.clone(),
                weights: cfg.weights,
                returned,
                on_claim: stat(counts[0]),
                on_theme: stat(counts[1]),
                irrelevant: stat(counts[2]),
                recall_eligible,
                recall_hits: hits,
                on_claim_recall: ratio(hits, recall_eligible),
                unlabeled,
            }
        })
        .collect();
    EvalReport {
        k,
        n_articles: tables.len(),
        configs: reports,
    }
}

impl EvalReport {
    pub fn config(&self, name: &str) -> Option<&ConfigReport> {
        self.configs.iter().find(|c| c.name == name)
    }

    /// Aligned text table: precision (count) per category, then recall.
    pub fn to_table(&self) -> String {
        let header = ["config", "on claim", "on theme", "irrelevant", "recall"];
        let rows: Vec<[String; 5]> = self
            .configs
            .iter()
            .map(|c| {
                let cell = |s: &CategoryStat| format!("{:.2} ({})", s.precision, s.count);
                [
                    c.name.clone(),
                    cell(&c.on_claim),
                    cell(&c.on_theme),
                    cell(&c.irrelevant),
                    format!("{:.2}", c.on_claim_recall),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let mut line = |cells: &[&str]| {
            let mut parts = Vec::with_capacity(cells.len());
            for (i, cell) in cells.iter().enumerate() {
                if i == 0 {
                    parts.push(format!("{:<w$}", cell, w = widths[i]));
                } else {
                    parts.push(format!("{:>w$}", cell, w = widths[i]));
                }
            }
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&header);
        for row in &rows {
            line(&row.each_ref().map(String::as_str));
        }
        out
    }

    /// One JSON record per configuration.
    pub fn to_jsonl(&self) -> String {
        self.configs
            .iter()
            .map(|c| serde_json::to_string(c).expect("reports serialize") + "\n")
            .collect()
    }
}
