use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::chunk::Chunk;
use super::triples::Triple;
use super::KnowledgeError;
use crate::text::{content_term_set, normalize_phrase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Phrase,
    Passage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub kind: NodeKind,
    /// Normalized phrase, or the chunk id of a passage.
    pub label: String,
}

/// Phrase and passage nodes with uniform-weight undirected edges.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KnowledgeGraph {
    nodes: Vec<GraphNode>,
    index: BTreeMap<String, usize>,
    adjacency: Vec<Vec<usize>>,
    phrase_terms: Vec<BTreeSet<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct GraphDoc {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<(usize, usize)>,
}

pub fn phrase_node_id(phrase: &str) -> String {
    format!("phrase:{phrase}")
}

pub fn passage_node_id(chunk_id: &str) -> String {
    format!("passage:{chunk_id}")
}

/// `needle` occurs in `haystack` bounded by non-alphanumeric characters.
fn contains_phrase(haystack: &str, needle: &str) -> bool {
    let boundary = |c: Option<char>| c.is_none_or(|c| !c.is_alphanumeric() && c != '_');
    haystack.match_indices(needle).any(|(i, _)| {
        boundary(haystack[..i].chars().next_back())
            && boundary(haystack[i + needle.len()..].chars().next())
    })
}

impl KnowledgeGraph {
    fn add_node(&mut self, id: String, kind: NodeKind, label: String) -> usize {
        if let Some(&i) = self.index.get(&id) {
            return i;
        }
        let i = self.nodes.len();
        self.index.insert(id.clone(), i);
        self.phrase_terms.push(match kind {
            NodeKind::Phrase => content_term_set(&label),
            NodeKind::Passage => BTreeSet::new(),
        });
        self.nodes.push(GraphNode { id, kind, label });
        self.adjacency.push(Vec::new());
        i
    }

    fn add_edge(&mut self, a: usize, b: usize) {
        if !self.adjacency[a].contains(&b) {
            self.adjacency[a].push(b);
        }
        if !self.adjacency[b].contains(&a) {
            self.adjacency[b].push(a);
        }
    }

    fn finish(&mut self) {
        for adj in &mut self.adjacency {
            adj.sort_unstable();
        }
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    pub fn edges_between(&self, a: NodeKind, b: NodeKind) -> usize {
        let mut n = 0;
        for (i, adj) in self.adjacency.iter().enumerate() {
            for &j in adj {
                if i < j {
                    let (ka, kb) = (self.nodes[i].kind, self.nodes[j].kind);
                    if (ka, kb) == (a, b) || (ka, kb) == (b, a) {
                        n += 1;
                    }
                }
            }
        }
        n
    }

    /// Phrase nodes whose content terms intersect `terms`.
    pub fn phrases_matching(&self, terms: &BTreeSet<String>) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| {
                self.nodes[i].kind == NodeKind::Phrase && !self.phrase_terms[i].is_disjoint(terms)
            })
            .collect()
    }

    pub(crate) fn to_doc(&self) -> GraphDoc {
        let mut edges = Vec::new();
        for (i, adj) in self.adjacency.iter().enumerate() {
            edges.extend(adj.iter().filter(|&&j| i <= j).map(|&j| (i, j)));
        }
        GraphDoc {
            nodes: self.nodes.clone(),
            edges,
        }
    }

    pub(crate) fn from_doc(doc: GraphDoc) -> Result<Self, KnowledgeError> {
        let mut g = KnowledgeGraph::default();
        for node in doc.nodes {
            if g.index.contains_key(&node.id) {
                return Err(KnowledgeError::InvalidIndex(format!("duplicate node {}", node.id)));
            }
            g.add_node(node.id, node.kind, node.label);
        }
        for (a, b) in doc.edges {
            if a >= g.nodes.len() || b >= g.nodes.len() {
                return Err(KnowledgeError::InvalidIndex(format!(
                    "edge ({a}, {b}) has a missing endpoint"
                )));
            }
            g.add_edge(a, b);
        }
        g.finish();
        Ok(g)
    }
}

/// Builds the phrase/passage graph: every triple links its subject and
/// object phrases; every phrase links to each chunk whose normalized text
/// contains it.
pub fn build_graph(triples: &[Triple], chunks: &[Chunk]) -> Result<KnowledgeGraph, KnowledgeError> {
    let known: BTreeSet<&str> = chunks.iter().map(|c| c.chunk_id.as_str()).collect();
    if let Some(t) = triples.iter().find(|t| !known.contains(t.source_chunk.as_str())) {
        return Err(KnowledgeError::DanglingSource(t.source_chunk.clone()));
    }
    let mut g = KnowledgeGraph::default();
    let passages: Vec<usize> = chunks
        .iter()
        .map(|c| g.add_node(passage_node_id(&c.chunk_id), NodeKind::Passage, c.chunk_id.clone()))
        .collect();
    let mut phrases = BTreeSet::new();
    for t in triples {
        let s = normalize_phrase(&t.subject);
        let o = normalize_phrase(&t.object);
        let a = g.add_node(phrase_node_id(&s), NodeKind::Phrase, s.clone());
        let b = g.add_node(phrase_node_id(&o), NodeKind::Phrase, o.clone());
        g.add_edge(a, b);
        phrases.insert((a, s));
        phrases.insert((b, o));
    }
    let normalized: Vec<String> = chunks.iter().map(|c| normalize_phrase(&c.text)).collect();
    for (p, phrase) in &phrases {
        for (ci, text) in normalized.iter().enumerate() {
            if contains_phrase(text, phrase) {
                g.add_edge(*p, passages[ci]);
            }
        }
    }
    g.finish();
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PprParams {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PprParams {
    fn default() -> Self {
        Self {
            damping: 0.85,
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PprResult {
    pub scores: Vec<f64>,
    pub iterations: usize,
    /// False when `max_iter` was reached before the L1 change fell below `tol`.
    pub converged: bool,
}

/// Personalized PageRank over a directed adjacency list (`adj[i]` lists the
/// targets of `i`'s out-edges; repeated targets count as parallel edges).
/// Teleport and dangling mass both go to the uniform distribution over
/// `reset`.
pub fn personalized_pagerank(
    adj: &[Vec<usize>],
    reset: &[usize],
    params: PprParams,
) -> Result<PprResult, KnowledgeError> {
    let n = adj.len();
    if reset.is_empty() {
        return Err(KnowledgeError::EmptyResetSet);
    }
    if let Some(&bad) = reset.iter().find(|&&r| r >= n) {
        return Err(KnowledgeError::ResetNodeUnknown(bad.to_string()));
    }
    if !(0.0..1.0).contains(&params.damping) {
        return Err(KnowledgeError::InvalidDamping(params.damping));
    }
    let reset_set: BTreeSet<usize> = reset.iter().copied().collect();
    let mut r = vec![0.0; n];
    for &i in &reset_set {
        r[i] = 1.0 / reset_set.len() as f64;
    }
    let d = params.damping;
    let mut p = r.clone();
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        iterations += 1;
        next.iter_mut().for_each(|x| *x = 0.0);
        let mut dangling = 0.0;
        for (i, targets) in adj.iter().enumerate() {
            if targets.is_empty() {
                dangling += p[i];
            } else {
                let share = p[i] / targets.len() as f64;
                for &j in targets {
                    next[j] += share;
                }
            }
        }
        for i in 0..n {
            next[i] = (1.0 - d) * r[i] + d * (next[i] + dangling * r[i]);
        }
        let delta: f64 = p.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut p, &mut next);
        if delta < params.tol {
            converged = true;
            break;
        }
    }
    Ok(PprResult {
        scores: p,
        iterations,
        converged,
    })
}
