use scraper::{ElementRef, Html, Node, Selector};

use super::collapse_whitespace;

const SKIPPED: &[&str] = &[
    "script", "style", "nav", "noscript", "template", "head", "svg", "iframe", "form", "button",
];

const BLOCKS: &[&str] = &[
    "p", "div", "section", "article", "main", "h1", "h2", "h3", "h4", "h5", "h6", "li", "ul",
    "ol", "blockquote", "pre", "table", "tr", "td", "th", "br", "header", "footer", "aside",
    "figcaption", "dd", "dt",
];

/// Visible text of a page: scripts, styles and navigation are dropped,
/// block elements become line breaks.
pub fn extract_body_text(html: &str) -> String {
    let doc = Html::parse_document(html);
    let mut out = String::new();
    walk(doc.root_element(), &mut out);
    out.lines()
        .map(collapse_whitespace)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

fn walk(el: ElementRef<'_>, out: &mut String) {
    let name = el.value().name();
    if SKIPPED.contains(&name) {
        return;
    }
    let block = BLOCKS.contains(&name);
    if block {
        out.push('\n');
    }
    for child in el.children() {
        match child.value() {
            Node::Text(t) => out.push_str(t),
            Node::Element(_) => {
                if let Some(c) = ElementRef::wrap(child) {
                    walk(c, out);
                }
            }
            _ => {}
        }
    }
    if block {
        out.push('\n');
    } else {
        out.push(' ');
    }
}

/// `<title>`, falling back to `og:title` and then the first `<h1>`.
pub fn extract_page_title(html: &str) -> String {
    let doc = Html::parse_document(html);
    let pick = |sel: &str| -> Option<String> {
        let sel = Selector::parse(sel).ok()?;
        doc.select(&sel)
            .map(|e| {
                e.attr("content")
                    .map(str::to_string)
                    .unwrap_or_else(|| e.text().collect())
            })
            .map(|t| collapse_whitespace(&t))
            .find(|t| !t.is_empty())
    };
    pick("title")
        .or_else(|| pick(r#"meta[property="og:title"]"#))
        .or_else(|| pick("h1"))
        .unwrap_or_default()
}

/// The page's own address from `<link rel="canonical">` or `og:url`.
pub fn declared_url(html: &str) -> Option<String> {
    let doc = Html::parse_document(html);
    let pick = |sel: &str, attr: &str| -> Option<String> {
        let sel = Selector::parse(sel).ok()?;
        doc.select(&sel)
            .filter_map(|e| e.attr(attr))
            .map(str::trim)
            .find(|u| !u.is_empty())
            .map(str::to_string)
    };
    pick(r#"link[rel="canonical"]"#, "href").or_else(|| pick(r#"meta[property="og:url"]"#, "content"))
}
