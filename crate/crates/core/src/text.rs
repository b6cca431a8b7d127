//! Lexical helpers shared by retrieval, planning and scoring: whitespace
//! tokenization, phrase normalization, content terms and telecom entity
//! extraction (counters, alarms, managed-object classes, commands).

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// A whitespace-delimited token and its byte span in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

pub fn whitespace_spans(text: &str) -> Vec<TokenSpan> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                spans.push(TokenSpan { start: s, end: i });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        spans.push(TokenSpan {
            start: s,
            end: text.len(),
        });
    }
    spans
}

pub fn whitespace_tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Lowercase and collapse runs of whitespace to a single space.
pub fn normalize_phrase(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "any", "are", "as", "at", "be", "by", "can", "check", "do", "does", "each",
    "find", "for", "from", "help", "how", "i", "if", "in", "into", "is", "it", "its", "me", "my",
    "no", "not", "of", "on", "or", "our", "per", "please", "such", "than", "that", "the", "then",
    "these", "this", "those", "to", "us", "we", "what", "when", "which", "who", "why", "with",
    "you", "your",
];

pub fn is_stopword(term: &str) -> bool {
    STOPWORDS.binary_search(&term).is_ok()
}

fn singular(term: &str) -> String {
    let keep = term.len() <= 3
        || !term.ends_with('s')
        || term.ends_with("ss")
        || term.ends_with("us")
        || term.ends_with("is");
    if keep {
        term.to_string()
    } else {
        term[..term.len() - 1].to_string()
    }
}

/// Splits an identifier into lowercase sub-words: `pmPowerFailure` →
/// `pm power failure`, `pdu_session_ipv4` → `pdu session ipv4`.
fn identifier_parts(ident: &str) -> Vec<String> {
    let mut parts = Vec::new();
    for piece in ident.split('_').filter(|p| !p.is_empty()) {
        let mut current = String::new();
        let chars: Vec<char> = piece.chars().collect();
        for (i, &ch) in chars.iter().enumerate() {
            let boundary = ch.is_uppercase()
                && i > 0
                && (chars[i - 1].is_lowercase()
                    || chars.get(i + 1).is_some_and(|n| n.is_lowercase()));
            if boundary && !current.is_empty() {
                parts.push(current.to_lowercase());
                current.clear();
            }
            current.push(ch);
        }
        if !current.is_empty() {
            parts.push(current.to_lowercase());
        }
    }
    parts
}

/// Content terms of a text: identifier sub-words, lowercased, crude plural
/// folding, stopwords and one-character terms removed. Order of first
/// appearance, no duplicates.
pub fn content_terms(text: &str) -> Vec<String> {
    static IDENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z0-9_]+").unwrap());
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for m in IDENT.find_iter(text) {
        for part in identifier_parts(m.as_str()) {
            if part.len() < 2 || is_stopword(&part) {
                continue;
            }
            let term = singular(&part);
            if seen.insert(term.clone()) {
                out.push(term);
            }
        }
    }
    out
}

pub fn content_term_set(text: &str) -> BTreeSet<String> {
    content_terms(text).into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Counter,
    Alarm,
    Component,
    Command,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Entity {
    pub name: String,
    pub kind: EntityKind,
}

static IDENTIFIER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[A-Za-z][A-Za-z0-9_]*").unwrap());
static PM_COUNTER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^pm[A-Z][A-Za-z0-9]*$").unwrap());
static SNAKE_COUNTER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[a-z][a-z0-9]*(?:_[a-z0-9]+)+$").unwrap());
static CAMEL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Z][a-z0-9]+(?:[A-Z][a-z0-9]+)+$").unwrap());
static ALARM_PHRASE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b((?:[A-Z][a-z]+ ){1,5}[A-Z][a-z]+) alarms?\b").unwrap());
static COMMAND: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"`([^`\n]+)`").unwrap());

const ALARM_SUFFIXES: &[&str] = &[
    "Lost", "Failure", "Fault", "Down", "Alarm", "Error", "Timeout", "Degraded",
];
const PHRASE_LEADERS: &[&str] = &["The", "A", "An", "Any", "Each", "If", "When", "This", "Every"];

fn classify_identifier(ident: &str) -> Option<EntityKind> {
    if PM_COUNTER.is_match(ident) || SNAKE_COUNTER.is_match(ident) {
        Some(EntityKind::Counter)
    } else if CAMEL.is_match(ident) {
        if ALARM_SUFFIXES.iter().any(|s| ident.ends_with(s)) {
            Some(EntityKind::Alarm)
        } else {
            Some(EntityKind::Component)
        }
    } else {
        None
    }
}

/// Pattern-based entity extraction. Every returned name occurs verbatim in
/// `text`. Ordered by first occurrence, deduplicated by name.
pub fn extract_entities(text: &str) -> Vec<Entity> {
    let mut found: Vec<(usize, Entity)> = Vec::new();

    // Commands first; identifiers inside backticks are not separate entities.
    let mut masked = text.to_string();
    for cap in COMMAND.captures_iter(text) {
        let m = cap.get(1).unwrap();
        let name = m.as_str().trim();
        if !name.is_empty() {
            found.push((
                m.start(),
                Entity {
                    name: name.to_string(),
                    kind: EntityKind::Command,
                },
            ));
        }
        let whole = cap.get(0).unwrap();
        masked.replace_range(whole.range(), &" ".repeat(whole.len()));
    }

    for cap in ALARM_PHRASE.captures_iter(&masked) {
        let m = cap.get(1).unwrap();
        let mut words: Vec<&str> = m.as_str().split(' ').collect();
        let mut offset = m.start();
        while words.len() > 2 && PHRASE_LEADERS.contains(&words[0]) {
            offset += words[0].len() + 1;
            words.remove(0);
        }
        if words.len() >= 2 && !PHRASE_LEADERS.contains(&words[0]) {
            found.push((
                offset,
                Entity {
                    name: words.join(" "),
                    kind: EntityKind::Alarm,
                },
            ));
        }
    }

    for m in IDENTIFIER.find_iter(&masked) {
        if let Some(kind) = classify_identifier(m.as_str()) {
            found.push((
                m.start(),
                Entity {
                    name: m.as_str().to_string(),
                    kind,
                },
            ));
        }
    }

    found.sort_by_key(|(pos, _)| *pos);
    let mut seen = BTreeSet::new();
    found
        .into_iter()
        .filter(|(_, e)| seen.insert(e.name.clone()))
        .map(|(_, e)| e)
        .collect()
}

/// Sentences of a passage. Splits on `.`/`;`/`?`/`!` followed by whitespace
/// (so `FieldReplaceableUnit.pmPowerFailure` stays intact) and on blank or
/// bulleted lines.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for line in text.split('\n') {
        let line = line.trim();
        let line = line
            .strip_prefix("- ")
            .or_else(|| line.strip_prefix("* "))
            .unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        let bytes = line.as_bytes();
        let mut start = 0;
        for i in 0..bytes.len() {
            let terminal = matches!(bytes[i], b'.' | b';' | b'?' | b'!');
            let at_break = i + 1 == bytes.len() || bytes[i + 1].is_ascii_whitespace();
            if terminal && at_break {
                let s = line[start..i].trim();
                if !s.is_empty() {
                    out.push(s);
                }
                start = i + 1;
            }
        }
        let rest = line[start..].trim();
        if !rest.is_empty() {
            out.push(rest);
        }
    }
    out
}
