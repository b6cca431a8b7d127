//! Root-cause pattern entries. A pattern file holds blank-line separated
//! entries of `key: value` lines; `#` starts a comment line.
//!
//! ```text
//! pattern: NRF service suspension
//! scenario: core_pdu_degradation
//! requires: status SUSPENDED
//! supports: counter pdu_session*
//! recommend: Immediate restoration of the NRF service.
//! ```

use serde::{Deserialize, Serialize};

use super::KnowledgeError;
use crate::telemetry::ScenarioKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    Status,
    Alarm,
    Counter,
    Log,
}

impl EvidenceKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "status" => Some(Self::Status),
            "alarm" => Some(Self::Alarm),
            "counter" => Some(Self::Counter),
            "log" => Some(Self::Log),
            _ => None,
        }
    }
}

/// Matches evidence of one kind by name. Counter and alarm names match
/// exactly, or by prefix when the pattern ends in `*`; log and status
/// patterns match any message containing them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceSelector {
    pub kind: EvidenceKind,
    pub pattern: String,
}

impl EvidenceSelector {
    pub fn matches(&self, kind: EvidenceKind, name: &str) -> bool {
        if kind != self.kind {
            return false;
        }
        match kind {
            EvidenceKind::Counter | EvidenceKind::Alarm => match self.pattern.strip_suffix('*') {
                Some(prefix) => name.starts_with(prefix),
                None => name == self.pattern,
            },
            EvidenceKind::Log | EvidenceKind::Status => name.contains(&self.pattern),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extent {
    #[default]
    Any,
    /// Some, but not all, units of every affected site.
    PartialSite,
    /// Every unit of at least one site.
    SiteWide,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RcaPattern {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
    pub requires: Vec<EvidenceSelector>,
    #[serde(default)]
    pub supports: Vec<EvidenceSelector>,
    #[serde(default)]
    pub extent: Extent,
    pub recommend: Vec<String>,
}

impl RcaPattern {
    pub fn selects(&self, kind: EvidenceKind, name: &str) -> bool {
        self.requires
            .iter()
            .chain(&self.supports)
            .any(|s| s.matches(kind, name))
    }
}

fn bad(line: usize, reason: impl Into<String>) -> KnowledgeError {
    KnowledgeError::MalformedPattern {
        line,
        reason: reason.into(),
    }
}

fn selector(line: usize, value: &str) -> Result<EvidenceSelector, KnowledgeError> {
    let (kind, pattern) = value
        .split_once(' ')
        .ok_or_else(|| bad(line, "selector needs a kind and a name"))?;
    let kind = EvidenceKind::parse(kind)
        .ok_or_else(|| bad(line, format!("unknown evidence kind {kind:?}")))?;
    let pattern = pattern.trim();
    if pattern.is_empty() || pattern == "*" {
        return Err(bad(line, "empty selector name"));
    }
    Ok(EvidenceSelector {
        kind,
        pattern: pattern.to_string(),
    })
}

struct Draft {
    start: usize,
    pattern: RcaPattern,
}

fn finish(draft: Option<Draft>, out: &mut Vec<RcaPattern>) -> Result<(), KnowledgeError> {
    if let Some(d) = draft {
        if d.pattern.requires.is_empty() {
            return Err(bad(d.start, "pattern has no requires line"));
        }
        if d.pattern.recommend.is_empty() {
            return Err(bad(d.start, "pattern has no recommend line"));
        }
        out.push(d.pattern);
    }
    Ok(())
}

pub fn parse_patterns(text: &str) -> Result<Vec<RcaPattern>, KnowledgeError> {
    let mut out = Vec::new();
    let mut draft: Option<Draft> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            finish(draft.take(), &mut out)?;
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| bad(line_no, "expected `key: value`"))?;
        let value = value.trim();
        if value.is_empty() {
            return Err(bad(line_no, format!("empty value for {key}")));
        }
        if key == "pattern" {
            finish(draft.take(), &mut out)?;
            draft = Some(Draft {
                start: line_no,
                pattern: RcaPattern {
                    label: value.to_string(),
                    scenario: None,
                    explanation: None,
                    requires: Vec::new(),
                    supports: Vec::new(),
                    extent: Extent::Any,
                    recommend: Vec::new(),
                },
            });
            continue;
        }
        let p = &mut draft
            .as_mut()
            .ok_or_else(|| bad(line_no, "entry must start with a pattern line"))?
            .pattern;
        match key {
            "scenario" => {
                p.scenario = Some(
                    ScenarioKind::parse(value)
                        .ok_or_else(|| bad(line_no, format!("unknown scenario {value:?}")))?,
                )
            }
            "explanation" => p.explanation = Some(value.to_string()),
            "requires" => p.requires.push(selector(line_no, value)?),
            "supports" => p.supports.push(selector(line_no, value)?),
            "extent" => {
                p.extent = match value {
                    "any" => Extent::Any,
                    "partial_site" => Extent::PartialSite,
                    "site_wide" => Extent::SiteWide,
                    other => return Err(bad(line_no, format!("unknown extent {other:?}"))),
                }
            }
            "recommend" => p.recommend.push(value.to_string()),
            other => return Err(bad(line_no, format!("unknown key {other:?}"))),
        }
    }
    finish(draft, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_entries() {
        let ps = parse_patterns(
            "# x\npattern: A\nrequires: alarm Input Power Failure\nsupports: counter pmVoltage*\nrecommend: go\n\npattern: B\nrequires: status SUSPENDED\nrecommend: fix\n",
        )
        .unwrap();
        assert_eq!(ps.len(), 2);
        assert!(ps[0].selects(EvidenceKind::Counter, "pmVoltage1"));
        assert!(ps[0].selects(EvidenceKind::Alarm, "Input Power Failure"));
        assert!(!ps[0].selects(EvidenceKind::Alarm, "Input Power"));
        assert!(ps[1].selects(EvidenceKind::Status, "NRF service status: SUSPENDED (nnrf-nfm)"));
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_patterns("pattern: A\nrequires: widget x\n").unwrap_err();
        assert!(matches!(err, KnowledgeError::MalformedPattern { line: 2, .. }));
        let err = parse_patterns("pattern: A\nrequires: alarm X\n").unwrap_err();
        assert!(matches!(err, KnowledgeError::MalformedPattern { line: 1, .. }));
        let err = parse_patterns("requires: alarm X\n").unwrap_err();
        assert!(matches!(err, KnowledgeError::MalformedPattern { line: 1, .. }));
    }

    #[test]
    fn shipped_pattern_files_parse() {
        for src in super::super::corpus::PATTERN_FILES {
            assert!(!parse_patterns(src.1).unwrap().is_empty(), "{}", src.0);
        }
    }
}
