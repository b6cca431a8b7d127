use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::chunk::Chunk;
use crate::text::{normalize_phrase, sentences};

pub const RELATION_VERBS: [&str; 5] = ["raises", "indicates", "tracks", "requires", "affects"];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub relation: String,
    pub object: String,
    pub source_chunk: String,
}

static VERB: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"(?i)\b({})\b", RELATION_VERBS.join("|"))).unwrap()
});

/// Object phrases end at the first of these words.
static OBJECT_STOP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\s(?:on|in|at|for|when|whenever|if|while|because|across|during|after|before|until|from|with|even|to|through|rather|and then)\s",
    )
    .unwrap()
});

const LEADING_WORDS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "each", "every", "any", "its", "their",
];

fn trim_edges(s: &str) -> &str {
    s.trim_matches(|c: char| c.is_whitespace() || ",.;:()\"'".contains(c))
}

fn strip_leading_words(s: &str) -> &str {
    let mut rest = s.trim_start();
    loop {
        let Some((first, tail)) = rest.split_once(char::is_whitespace) else {
            return rest;
        };
        if LEADING_WORDS.contains(&first.to_lowercase().as_str()) {
            rest = tail.trim_start();
        } else {
            return rest;
        }
    }
}

fn clean_phrase(s: &str) -> Option<String> {
    let s = strip_leading_words(trim_edges(s));
    let s = normalize_phrase(trim_edges(s));
    (!s.is_empty()).then_some(s)
}

fn split_list(object: &str) -> Vec<&str> {
    object
        .split(',')
        .flat_map(|part| part.split(" and "))
        .map(trim_edges)
        .filter(|p| !p.is_empty())
        .collect()
}

/// Subject-verb-object triples for the fixed relation lexicon. The subject is
/// the text between the last comma before the verb and the verb; the object
/// runs to the first clause boundary and is split on list separators.
/// Output is sorted and free of duplicates.
pub fn extract_triples(chunk: &Chunk) -> Vec<Triple> {
    let mut out = BTreeSet::new();
    for sentence in sentences(&chunk.text) {
        let Some(verb) = VERB.find(sentence) else {
            continue;
        };
        let before = &sentence[..verb.start()];
        let subject_text = before.rsplit([',', ':']).next().unwrap_or(before);
        let Some(subject) = clean_phrase(subject_text) else {
            continue;
        };
        let after = sentence[verb.end()..].trim_start();
        let after = after.strip_prefix("that ").unwrap_or(after);
        let object_text = match OBJECT_STOP.find(after) {
            Some(m) => &after[..m.start()],
            None => after,
        };
        let relation = verb.as_str().to_lowercase();
        for piece in split_list(object_text) {
            if let Some(object) = clean_phrase(piece) {
                if object != subject {
                    out.insert(Triple {
                        subject: subject.clone(),
                        relation: relation.clone(),
                        object,
                        source_chunk: chunk.chunk_id.clone(),
                    });
                }
            }
        }
    }
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk(text: &str) -> Chunk {
        Chunk {
            chunk_id: "c#0000".into(),
            doc_id: "c".into(),
            ordinal: 0,
            text: text.into(),
            token_count: text.split_whitespace().count(),
            token_offset: 0,
        }
    }

    fn spo(text: &str) -> Vec<(String, String, String)> {
        extract_triples(&chunk(text))
            .into_iter()
            .map(|t| (t.subject, t.relation, t.object))
            .collect()
    }

    #[test]
    fn simple_sentence() {
        assert_eq!(
            spo("Input Power Failure raises pmPowerFailure."),
            [(
                "input power failure".to_string(),
                "raises".to_string(),
                "pmpowerfailure".to_string()
            )]
        );
    }

    #[test]
    fn no_pattern_and_duplicates() {
        assert!(spo("Nothing to see here.").is_empty());
        assert_eq!(
            spo("A raises B. A raises B.").len(),
            1,
            "duplicate sentences collapse"
        );
    }

    #[test]
    fn lists_and_clause_cut() {
        assert_eq!(
            spo("The NRF affects pdu_session, subscriber_count_5g and retained_connection_failure on the SMF."),
            [
                ("nrf".into(), "affects".into(), "pdu_session".into()),
                ("nrf".into(), "affects".into(), "retained_connection_failure".into()),
                ("nrf".into(), "affects".into(), "subscriber_count_5g".into()),
            ]
        );
    }
}
