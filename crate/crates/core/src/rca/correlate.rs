use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::deviation::DeviationFinding;
use crate::knowledge::{EvidenceKind, Extent, RcaPattern};
use crate::telemetry::catalog::{Topology, NRF_STATUS_PREFIX};
use crate::telemetry::{Alarm, LogEntry, LogLevel, ScenarioKind};
use crate::time::Window;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceWeights {
    pub status: f64,
    pub alarm: f64,
    pub counter: f64,
    pub log: f64,
}

impl Default for EvidenceWeights {
    fn default() -> Self {
        Self {
            status: 3.0,
            alarm: 2.0,
            counter: 1.0,
            log: 1.0,
        }
    }
}

impl EvidenceWeights {
    pub fn of(&self, kind: EvidenceKind) -> f64 {
        match kind {
            EvidenceKind::Status => self.status,
            EvidenceKind::Alarm => self.alarm,
            EvidenceKind::Counter => self.counter,
            EvidenceKind::Log => self.log,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub evidence_id: String,
    pub kind: EvidenceKind,
    /// Counter name, alarm type, or message text for logs and status lines.
    pub name: String,
    pub nodes: Vec<String>,
    pub window: Window,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootCauseCandidate {
    pub label: String,
    pub evidence: Vec<Evidence>,
    /// Share of the total evidence weight carried by this candidate.
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
    pub recommended: Vec<String>,
}

impl RootCauseCandidate {
    pub fn nodes(&self) -> BTreeSet<&str> {
        self.evidence
            .iter()
            .flat_map(|e| e.nodes.iter().map(String::as_str))
            .collect()
    }
}

/// Turns findings, alarms and logs into weighted evidence. Alarms are
/// deduplicated by id; warning and error logs are grouped by node and
/// message; NRF status lines other than REGISTERED become status evidence
/// lasting until the node's next status line, or `horizon.end`.
pub fn collect_evidence<'a>(
    findings: &[DeviationFinding],
    alarms: impl IntoIterator<Item = &'a Alarm>,
    logs: impl IntoIterator<Item = &'a LogEntry>,
    horizon: Window,
    weights: &EvidenceWeights,
) -> Vec<Evidence> {
    let mut out = Vec::new();
    for f in findings {
        out.push(Evidence {
            evidence_id: format!(
                "counter:{}:{}:{}",
                f.series_ref.node, f.series_ref.object, f.series_ref.counter
            ),
            kind: EvidenceKind::Counter,
            name: f.series_ref.counter.clone(),
            nodes: vec![f.series_ref.node.clone()],
            window: f.window,
            weight: weights.counter,
        });
    }

    let mut seen = BTreeMap::new();
    for a in alarms {
        seen.entry(a.alarm_id.clone()).or_insert_with(|| a.clone());
    }
    for (id, a) in seen {
        out.push(Evidence {
            evidence_id: format!("alarm:{id}"),
            kind: EvidenceKind::Alarm,
            name: a.alarm_type.clone(),
            nodes: vec![a.managed_element.clone()],
            window: a.active_window(),
            weight: weights.alarm,
        });
    }

    let mut unique: BTreeSet<(i64, String, String, LogLevel)> = BTreeSet::new();
    for l in logs {
        unique.insert((l.timestamp, l.node_id.clone(), l.message.clone(), l.level));
    }
    let mut status_lines: BTreeMap<&str, Vec<(i64, &str)>> = BTreeMap::new();
    let mut groups: BTreeMap<(&str, &str), Window> = BTreeMap::new();
    for (ts, node, message, level) in &unique {
        if let Some(status) = message.strip_prefix(NRF_STATUS_PREFIX) {
            status_lines.entry(node).or_default().push((*ts, status.trim()));
        } else if matches!(level, LogLevel::Warn | LogLevel::Error) {
            groups
                .entry((node, message))
                .and_modify(|w| *w = w.union(&Window::new(*ts, *ts)))
                .or_insert(Window::new(*ts, *ts));
        }
    }
    for (node, lines) in status_lines {
        for (i, (ts, status)) in lines.iter().enumerate() {
            if status.starts_with("REGISTERED") {
                continue;
            }
            let end = lines.get(i + 1).map_or(horizon.end.max(*ts), |n| n.0);
            out.push(Evidence {
                evidence_id: format!("status:{node}:{ts}"),
                kind: EvidenceKind::Status,
                name: format!("{NRF_STATUS_PREFIX} {status}"),
                nodes: vec![node.to_string()],
                window: Window::new(*ts, end),
                weight: weights.status,
            });
        }
    }
    for ((node, message), window) in groups {
        out.push(Evidence {
            evidence_id: format!("log:{node}:{}", window.start),
            kind: EvidenceKind::Log,
            name: message.to_string(),
            nodes: vec![node.to_string()],
            window,
            weight: weights.log,
        });
    }
    out
}

fn components(items: &[&Evidence]) -> Vec<Vec<usize>> {
    let n = items.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if items[i].window.overlaps(&items[j].window) {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = root(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

fn extent_holds(extent: Extent, nodes: &BTreeSet<&str>, topology: &Topology) -> bool {
    if extent == Extent::Any {
        return true;
    }
    let mut touched: BTreeMap<&str, usize> = BTreeMap::new();
    for node in nodes {
        match topology.site_of(node) {
            Some(site) => *touched.entry(site.site_id.as_str()).or_default() += 1,
            None => return false,
        }
    }
    if touched.is_empty() {
        return false;
    }
    let full = |site_id: &str, hit: usize| {
        topology
            .sites
            .iter()
            .find(|s| s.site_id == site_id)
            .is_some_and(|s| s.rrus.len() == hit)
    };
    match extent {
        Extent::PartialSite => touched.iter().all(|(s, hit)| !full(s, *hit)),
        Extent::SiteWide => touched.iter().any(|(s, hit)| full(s, *hit)),
        Extent::Any => true,
    }
}

/// Ranks the patterns that the evidence supports.
///
/// For each pattern the evidence it selects is split into groups connected by
/// overlapping windows. The heaviest group that satisfies every `requires`
/// selector and the pattern's extent becomes the candidate. Confidence is the
/// group weight over the weight of all evidence.
pub fn correlate(
    evidence: &[Evidence],
    patterns: &[RcaPattern],
    scenario: Option<ScenarioKind>,
    topology: &Topology,
) -> Vec<RootCauseCandidate> {
    let total: f64 = evidence.iter().map(|e| e.weight).sum();
    let mut out = Vec::new();
    for pattern in patterns {
        if let (Some(want), Some(have)) = (pattern.scenario, scenario) {
            if want != have {
                continue;
            }
        }
        let selected: Vec<&Evidence> = evidence
            .iter()
            .filter(|e| pattern.selects(e.kind, &e.name))
            .collect();
        let mut best: Option<(f64, Vec<&Evidence>)> = None;
        for group in components(&selected) {
            let members: Vec<&Evidence> = group.iter().map(|&i| selected[i]).collect();
            let satisfied = pattern
                .requires
                .iter()
                .all(|r| members.iter().any(|e| r.matches(e.kind, &e.name)));
            if !satisfied {
                continue;
            }
            let required_nodes: BTreeSet<&str> = members
                .iter()
                .filter(|e| pattern.requires.iter().any(|r| r.matches(e.kind, &e.name)))
                .flat_map(|e| e.nodes.iter().map(String::as_str))
                .collect();
            if !extent_holds(pattern.extent, &required_nodes, topology) {
                continue;
            }
            let weight: f64 = members.iter().map(|e| e.weight).sum();
            if best.as_ref().is_none_or(|(w, _)| weight > *w) {
                best = Some((weight, members));
            }
        }
        if let Some((weight, members)) = best {
            let mut evidence: Vec<Evidence> = members.into_iter().cloned().collect();
            evidence.sort_by(|a, b| a.evidence_id.cmp(&b.evidence_id));
            out.push(RootCauseCandidate {
                label: pattern.label.clone(),
                evidence,
                confidence: if total > 0.0 { weight / total } else { 0.0 },
                explanation: pattern.explanation.clone(),
                recommended: pattern.recommend.clone(),
            });
        }
    }
    out.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.label.cmp(&b.label))
    });
    out
}
