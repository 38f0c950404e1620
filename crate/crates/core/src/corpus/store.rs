//! One JSON object per line, UTF-8.

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use url::Url;

use super::{Article, FactCheck};
use crate::error::{Error, Result};

/// A corpus record that can be checked after parsing.
pub trait Record: Serialize + DeserializeOwned {
    fn record_id(&self) -> &str;
    fn validate(&self) -> std::result::Result<(), String>;
}

fn absolute(url: &str) -> std::result::Result<(), String> {
    Url::parse(url)
        .map(|_| ())
        .map_err(|e| format!("url {url:?} is not absolute: {e}"))
}

impl Record for FactCheck {
    fn record_id(&self) -> &str {
        &self.id
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        absolute(&self.url)?;
        if self.claim_reviewed.trim().is_empty() {
            return Err("empty claim_reviewed".into());
        }
        Ok(())
    }
}

impl Record for Article {
    fn record_id(&self) -> &str {
        &self.id
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        absolute(&self.url)?;
        if self.title.trim().is_empty() && self.body_text.trim().is_empty() {
            return Err("article has neither title nor body".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadMode {
    /// First bad line aborts the load.
    #[default]
    Strict,
    /// Bad lines are skipped and reported.
    Lenient,
}

#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    /// (1-based line number, reason) for every skipped line.
    pub skipped: Vec<(usize, String)>,
}

pub fn save_corpus<T: Record>(records: &[T], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_corpus<T: Record>(path: &Path, mode: LoadMode) -> Result<Loaded<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text, mode)
}

pub(crate) fn parse_corpus<T: Record>(text: &str, mode: LoadMode) -> Result<Loaded<T>> {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let parsed = serde_json::from_str::<T>(line)
            .map_err(|e| e.to_string())
            .and_then(|r| r.validate().map(|_| r))
            .and_then(|r| {
                if ids.insert(r.record_id().to_string()) {
                    Ok(r)
                } else {
                    Err(format!("duplicate id {:?}", r.record_id()))
                }
            });
        match (parsed, mode) {
            (Ok(r), _) => records.push(r),
            (Err(message), LoadMode::Strict) => {
                return Err(Error::Format {
                    line: lineno,
                    message,
                })
            }
            (Err(message), LoadMode::Lenient) => {
                log::warn!("skipping corpus line {lineno}: {message}");
                skipped.push((lineno, message));
            }
        }
    }
    Ok(Loaded { records, skipped })
}
