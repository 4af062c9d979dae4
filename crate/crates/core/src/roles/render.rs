//! Context rendering and parsing of role outputs.

use std::sync::OnceLock;

use regex::Regex;

use crate::types::{Document, GoldAnswers};

pub const DEFAULT_DOC_TOKENS: usize = 120;

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn truncate_tokens(text: &str, max_tokens: usize) -> String {
    text.split_whitespace().take(max_tokens).collect::<Vec<_>>().join(" ")
}

/// One line per document: `[i] title. text`, 1-based, text cut to
/// `max_tokens` whitespace tokens.
pub fn render_documents(docs: &[Document], max_tokens: usize) -> String {
    docs.iter()
        .enumerate()
        .map(|(i, d)| {
            let body = truncate_tokens(d.text(), max_tokens);
            let title = one_line(d.title());
            if title.is_empty() {
                format!("[{}] {}", i + 1, body)
            } else {
                format!("[{}] {}. {}", i + 1, title, body)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Same layout as [`render_documents`] for already-flattened passages.
pub fn render_passages<S: AsRef<str>>(passages: &[S]) -> String {
    passages
        .iter()
        .enumerate()
        .map(|(i, p)| format!("[{}] {}", i + 1, one_line(p.as_ref())))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Inverse of the rendering above: strips the `[i] ` markers.
pub fn split_rendered(rendered: &str) -> Vec<&str> {
    rendered
        .lines()
        .filter_map(|line| {
            let rest = line.strip_prefix('[')?;
            let close = rest.find(']')?;
            rest[..close].parse::<usize>().ok()?;
            Some(rest[close + 1..].trim_start())
        })
        .collect()
}

pub fn render_gold(gold: &GoldAnswers) -> String {
    gold.answers().iter().map(|a| one_line(a)).collect::<Vec<_>>().join("\n")
}

pub fn split_gold(rendered: &str) -> Vec<&str> {
    rendered.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}

fn bracket_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[(\d+)\]").expect("valid regex"))
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?").expect("valid regex"))
}

/// Parses `[i1] > [i2] > ... > [iw]` (prose around it is tolerated) into a
/// 0-based permutation of `0..window_len`. Anything that is not exactly a
/// permutation yields `None`.
pub fn parse_ranking(output: &str, window_len: usize) -> Option<Vec<usize>> {
    let indices: Vec<usize> = bracket_re()
        .captures_iter(output)
        .map(|c| c[1].parse::<usize>().ok())
        .collect::<Option<_>>()?;
    if indices.len() != window_len {
        return None;
    }
    let mut seen = vec![false; window_len];
    let mut order = Vec::with_capacity(window_len);
    for i in indices {
        if i == 0 || i > window_len || seen[i - 1] {
            return None;
        }
        seen[i - 1] = true;
        order.push(i - 1);
    }
    Some(order)
}

pub fn format_ranking(order: &[usize]) -> String {
    order.iter().map(|i| format!("[{}]", i + 1)).collect::<Vec<_>>().join(" > ")
}

/// Reads a decimal number from evaluator output: the whole trimmed string
/// if it parses, else the first number appearing in it.
pub fn parse_score(output: &str) -> Option<f64> {
    let trimmed = output.trim();
    if let Ok(v) = trimmed.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    number_re().find(trimmed).and_then(|m| m.as_str().parse::<f64>().ok()).filter(|v| v.is_finite())
}
