//! schema.org ClaimReview extraction from JSON-LD blocks and microdata.

use chrono::NaiveDate;
use scraper::{ElementRef, Html, Selector};
use serde_json::{Map, Value};
use url::Url;

use super::{collapse_whitespace, extract_body_text, extract_page_title, FactCheck};
use crate::error::{Error, Result};

/// Counters for the parts of a page that could not be used.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractDiagnostics {
    pub jsonld_blocks: usize,
    pub jsonld_parse_errors: usize,
    pub microdata_items: usize,
    pub missing_claim: usize,
    pub bad_url: usize,
}

impl ExtractDiagnostics {
    pub fn merge(&mut self, other: &ExtractDiagnostics) {
        self.jsonld_blocks += other.jsonld_blocks;
        self.jsonld_parse_errors += other.jsonld_parse_errors;
        self.microdata_items += other.microdata_items;
        self.missing_claim += other.missing_claim;
        self.bad_url += other.bad_url;
    }
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub fact_checks: Vec<FactCheck>,
    pub diagnostics: ExtractDiagnostics,
}

/// Every ClaimReview on the page as a raw (not deduplicated) fact check.
///
/// JSON-LD is preferred: microdata is only consulted when no JSON-LD block
/// yields a ClaimReview. Unparseable blocks and reviews without a
/// `claimReviewed` are skipped and counted.
pub fn extract_claim_reviews(html: &str, source_url: &str) -> Result<Extraction> {
    let base = Url::parse(source_url)
        .map_err(|e| Error::InvalidInput(format!("source url {source_url:?}: {e}")))?;
    let doc = Html::parse_document(html);
    let mut diagnostics = ExtractDiagnostics::default();

    let mut reviews = json_ld_reviews(&doc, &mut diagnostics);
    if reviews.is_empty() {
        reviews = microdata_reviews(&doc);
        diagnostics.microdata_items = reviews.len();
    }
    if reviews.is_empty() {
        return Ok(Extraction {
            fact_checks: Vec::new(),
            diagnostics,
        });
    }

    let page_title = extract_page_title(html);
    let body = extract_body_text(html);
    let mut fact_checks = Vec::with_capacity(reviews.len());
    for review in &reviews {
        match to_fact_check(review, &base, &page_title, &body) {
            Ok(Some(fc)) => fact_checks.push(fc),
            Ok(None) => diagnostics.missing_claim += 1,
            Err(_) => diagnostics.bad_url += 1,
        }
    }
    Ok(Extraction {
        fact_checks,
        diagnostics,
    })
}

fn json_ld_reviews(doc: &Html, diag: &mut ExtractDiagnostics) -> Vec<Value> {
    let sel = Selector::parse("script").expect("static selector");
    let mut out = Vec::new();
    for script in doc.select(&sel) {
        let is_json_ld = script
            .attr("type")
            .is_some_and(|t| t.trim().eq_ignore_ascii_case("application/ld+json"));
        if !is_json_ld {
            continue;
        }
        diag.jsonld_blocks += 1;
        let raw: String = script.text().collect();
        match parse_json_ld(&raw) {
            Some(value) => collect_claim_reviews(&value, &mut out),
            None => diag.jsonld_parse_errors += 1,
        }
    }
    out
}

fn parse_json_ld(raw: &str) -> Option<Value> {
    let trimmed = raw.trim();
    if let Ok(v) = serde_json::from_str(trimmed) {
        return Some(v);
    }
    // some CMSes wrap the block in comment or CDATA markers
    let stripped = trimmed
        .trim_start_matches("<!--")
        .trim_end_matches("-->")
        .trim()
        .trim_start_matches("//<![CDATA[")
        .trim_start_matches("<![CDATA[")
        .trim_end_matches("//]]>")
        .trim_end_matches("]]>")
        .trim();
    serde_json::from_str(stripped).ok()
}

fn is_claim_review_type(t: &str) -> bool {
    t == "ClaimReview" || t.ends_with("/ClaimReview") || t.ends_with(":ClaimReview")
}

fn has_claim_review_type(obj: &Map<String, Value>) -> bool {
    match obj.get("@type") {
        Some(Value::String(t)) => is_claim_review_type(t),
        Some(Value::Array(ts)) => ts
            .iter()
            .filter_map(Value::as_str)
            .any(is_claim_review_type),
        _ => false,
    }
}

fn collect_claim_reviews(value: &Value, out: &mut Vec<Value>) {
    match value {
        Value::Array(items) => items.iter().for_each(|v| collect_claim_reviews(v, out)),
        Value::Object(obj) => {
            if has_claim_review_type(obj) {
                out.push(value.clone());
            } else {
                obj.values().for_each(|v| collect_claim_reviews(v, out));
            }
        }
        _ => {}
    }
}

fn microdata_reviews(doc: &Html) -> Vec<Value> {
    let sel = Selector::parse("[itemscope][itemtype]").expect("static selector");
    doc.select(&sel)
        .filter(|el| {
            el.attr("itemtype")
                .is_some_and(|t| t.split_whitespace().any(is_claim_review_type))
        })
        .map(microdata_item)
        .collect()
}

fn microdata_item(el: ElementRef<'_>) -> Value {
    let mut props = Map::new();
    if let Some(t) = el.attr("itemtype").and_then(|t| t.split_whitespace().next()) {
        let short = t.rsplit('/').next().unwrap_or(t);
        props.insert("@type".into(), Value::String(short.to_string()));
    }
    collect_microdata_props(el, &mut props);
    Value::Object(props)
}

fn collect_microdata_props(el: ElementRef<'_>, props: &mut Map<String, Value>) {
    for child in el.child_elements() {
        let nested = child.attr("itemscope").is_some();
        if let Some(names) = child.attr("itemprop") {
            let value = if nested {
                microdata_item(child)
            } else {
                Value::String(microdata_value(child))
            };
            for name in names.split_whitespace() {
                props.entry(name.to_string()).or_insert_with(|| value.clone());
            }
        }
        if !nested {
            collect_microdata_props(child, props);
        }
    }
}

fn microdata_value(el: ElementRef<'_>) -> String {
    if let Some(c) = el.attr("content") {
        return c.trim().to_string();
    }
    let attr = match el.value().name() {
        "a" | "area" | "link" => el.attr("href"),
        "img" | "audio" | "video" | "source" | "iframe" | "embed" => el.attr("src"),
        "time" => el.attr("datetime"),
        "data" | "meter" => el.attr("value"),
        _ => None,
    };
    match attr {
        Some(v) => v.trim().to_string(),
        None => collapse_whitespace(&el.text().collect::<String>()),
    }
}

fn text_field<'a>(obj: &'a Value, key: &str) -> Option<&'a str> {
    match obj.get(key)? {
        Value::String(s) => Some(s.as_str()),
        Value::Array(items) => items.iter().find_map(Value::as_str),
        _ => None,
    }
    .map(str::trim)
    .filter(|s| !s.is_empty())
}

fn first_object<'a>(obj: &'a Value, key: &str) -> Option<&'a Value> {
    match obj.get(key)? {
        v @ Value::Object(_) => Some(v),
        Value::Array(items) => items.iter().find(|v| v.is_object()),
        _ => None,
    }
}

fn to_fact_check(
    review: &Value,
    base: &Url,
    page_title: &str,
    body: &str,
) -> Result<Option<FactCheck>> {
    let Some(claim) = text_field(review, "claimReviewed") else {
        return Ok(None);
    };
    if collapse_whitespace(claim).is_empty() {
        return Ok(None);
    }
    let url = match text_field(review, "url") {
        Some(u) => base
            .join(u)
            .map_err(|e| Error::InvalidInput(format!("review url {u:?}: {e}")))?,
        None => base.clone(),
    };
    let title = text_field(review, "name")
        .or_else(|| text_field(review, "headline"))
        .unwrap_or(page_title);
    let mut fc = FactCheck::new(url.as_str(), title, claim)?;

    let rating = first_object(review, "reviewRating");
    fc.rating_label = rating
        .and_then(|r| text_field(r, "alternateName"))
        .map(str::to_string);
    fc.rating_value = rating.and_then(|r| r.get("ratingValue")).and_then(integer_value);
    fc.review_date = text_field(review, "datePublished")
        .or_else(|| first_object(review, "itemReviewed").and_then(|i| text_field(i, "datePublished")))
        .and_then(parse_date);
    if !body.is_empty() {
        fc.body_text = Some(body.to_string());
    }
    Ok(Some(fc))
}

fn integer_value(v: &Value) -> Option<i64> {
    let as_int = |f: f64| (f.fract() == 0.0 && f.is_finite()).then_some(f as i64);
    match v {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().and_then(as_int)),
        Value::String(s) => {
            let s = s.trim();
            s.parse::<i64>()
                .ok()
                .or_else(|| s.parse::<f64>().ok().and_then(as_int))
        }
        _ => None,
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    s.get(..10)
        .and_then(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d").ok())
        .or_else(|| NaiveDate::parse_from_str(s, "%B %d, %Y").ok())
        .or_else(|| NaiveDate::parse_from_str(s, "%b %d, %Y").ok())
}
