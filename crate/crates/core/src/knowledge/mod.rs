//! Troubleshooting knowledge: uniform chunking, rule-based triples, a
//! phrase/passage graph and personalized-PageRank retrieval, plus the
//! root-cause patterns used by the analyzer.

mod chunk;
pub mod corpus;
mod graph;
mod patterns;
mod triples;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{content_term_set, extract_entities, EntityKind};

pub use chunk::{chunk_document, collection_of, Chunk, Document, DEFAULT_COLLECTION};
pub use graph::{
    build_graph, passage_node_id, personalized_pagerank, phrase_node_id, GraphNode,
    KnowledgeGraph, NodeKind, PprParams, PprResult,
};
pub use patterns::{parse_patterns, EvidenceKind, EvidenceSelector, Extent, RcaPattern};
pub use triples::{extract_triples, Triple, RELATION_VERBS};

pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum KnowledgeError {
    #[error("document {0} has no tokens")]
    EmptyDocument(String),
    #[error("overlap {overlap} must be smaller than chunk size {chunk_size}")]
    InvalidChunking { chunk_size: usize, overlap: usize },
    #[error("triple references unknown chunk {0}")]
    DanglingSource(String),
    #[error("reset set is empty")]
    EmptyResetSet,
    #[error("reset node {0} is not in the graph")]
    ResetNodeUnknown(String),
    #[error("damping must lie in [0, 1), got {0}")]
    InvalidDamping(f64),
    #[error("index holds no chunks")]
    EmptyIndex,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("pattern file line {line}: {reason}")]
    MalformedPattern { line: usize, reason: String },
    #[error("invalid index file: {0}")]
    InvalidIndex(String),
    #[error("unsupported index format version {0}")]
    UnsupportedVersion(u32),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for KnowledgeError {
    fn from(e: std::io::Error) -> Self {
        KnowledgeError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeConfig {
    pub chunk_size: usize,
    pub overlap: usize,
    pub ppr: PprParams,
    pub top_k: usize,
}

impl Default for KnowledgeConfig {
    fn default() -> Self {
        Self {
            chunk_size: 512,
            overlap: 64,
            ppr: PprParams::default(),
            top_k: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedChunk {
    pub chunk: Chunk,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieval {
    pub hits: Vec<RetrievedChunk>,
    /// Set when no phrase node matched the query and the ranking is plain
    /// term overlap.
    pub fallback: bool,
    pub reset_phrases: Vec<String>,
    pub converged: bool,
}

/// Corpus entities by name.
pub type EntityDictionary = BTreeMap<String, EntityKind>;

#[derive(Debug, Clone)]
pub struct KnowledgeStore {
    config: KnowledgeConfig,
    chunks: Vec<Chunk>,
    triples: Vec<Triple>,
    graph: KnowledgeGraph,
    patterns: Vec<RcaPattern>,
    dictionary: EntityDictionary,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format_version: u32,
    config: KnowledgeConfig,
    chunks: Vec<Chunk>,
    triples: Vec<Triple>,
    graph: graph::GraphDoc,
    patterns: Vec<RcaPattern>,
}

fn term_overlap(query: &BTreeSet<String>, text: &str) -> f64 {
    if query.is_empty() {
        return 0.0;
    }
    let terms = content_term_set(text);
    query.intersection(&terms).count() as f64 / query.len() as f64
}

impl KnowledgeStore {
    /// Indexes documents in the given order. Documents are chunked, triples
    /// extracted per chunk, and the graph built over the whole corpus.
    pub fn build(
        docs: &[Document],
        patterns: Vec<RcaPattern>,
        config: KnowledgeConfig,
    ) -> Result<Self, KnowledgeError> {
        let mut chunks = Vec::new();
        for doc in docs {
            chunks.extend(chunk_document(doc, config.chunk_size, config.overlap)?);
        }
        let triples: Vec<Triple> = chunks.iter().flat_map(extract_triples).collect();
        let graph = build_graph(&triples, &chunks)?;
        Ok(Self::assemble(config, chunks, triples, graph, patterns))
    }

    fn assemble(
        config: KnowledgeConfig,
        chunks: Vec<Chunk>,
        triples: Vec<Triple>,
        graph: KnowledgeGraph,
        patterns: Vec<RcaPattern>,
    ) -> Self {
        let mut dictionary = EntityDictionary::new();
        for c in &chunks {
            for e in extract_entities(&c.text) {
                dictionary.entry(e.name).or_insert(e.kind);
            }
        }
        Self {
            config,
            chunks,
            triples,
            graph,
            patterns,
            dictionary,
        }
    }

    /// The corpus compiled into the crate.
    pub fn embedded() -> Self {
        let docs: Vec<Document> = corpus::DOCUMENTS
            .iter()
            .map(|(id, text)| Document::new(*id, *text))
            .collect();
        let patterns = corpus::PATTERN_FILES
            .iter()
            .flat_map(|(_, text)| parse_patterns(text).expect("shipped patterns parse"))
            .collect();
        Self::build(&docs, patterns, KnowledgeConfig::default()).expect("shipped corpus indexes")
    }

    /// Reads every `*.txt` document and `*.patterns` file below `dir`,
    /// sorted by relative path. Document ids are relative paths with `/`
    /// separators.
    pub fn from_dir(dir: &Path, config: KnowledgeConfig) -> Result<Self, KnowledgeError> {
        let mut files = Vec::new();
        collect_files(dir, dir, &mut files)?;
        files.sort();
        let mut docs = Vec::new();
        let mut patterns = Vec::new();
        for rel in files {
            let path = dir.join(&rel);
            if rel.ends_with(".txt") {
                docs.push(Document::new(rel, std::fs::read_to_string(path)?));
            } else if rel.ends_with(".patterns") {
                patterns.extend(parse_patterns(&std::fs::read_to_string(path)?)?);
            }
        }
        if docs.is_empty() {
            return Err(KnowledgeError::EmptyIndex);
        }
        Self::build(&docs, patterns, config)
    }

    pub fn config(&self) -> &KnowledgeConfig {
        &self.config
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn chunk(&self, chunk_id: &str) -> Option<&Chunk> {
        self.chunks.iter().find(|c| c.chunk_id == chunk_id)
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    pub fn patterns(&self) -> &[RcaPattern] {
        &self.patterns
    }

    pub fn dictionary(&self) -> &EntityDictionary {
        &self.dictionary
    }

    pub fn collections(&self) -> BTreeSet<&str> {
        self.chunks.iter().map(Chunk::collection).collect()
    }

    pub fn retrieve(&self, query: &str, k: usize) -> Result<Retrieval, KnowledgeError> {
        self.retrieve_in(query, k, None)
    }

    /// Top-`k` passages by personalized PageRank from the phrase nodes that
    /// share a content term with the query, optionally restricted to one
    /// collection. Ties are broken by chunk id.
    pub fn retrieve_in(
        &self,
        query: &str,
        k: usize,
        collection: Option<&str>,
    ) -> Result<Retrieval, KnowledgeError> {
        if k == 0 {
            return Err(KnowledgeError::InvalidK);
        }
        let candidates: Vec<&Chunk> = self
            .chunks
            .iter()
            .filter(|c| collection.is_none_or(|col| c.collection() == col))
            .collect();
        if candidates.is_empty() {
            return Err(KnowledgeError::EmptyIndex);
        }
        let terms = content_term_set(query);
        let reset = self.graph.phrases_matching(&terms);
        let reset_phrases = reset
            .iter()
            .map(|&i| self.graph.nodes()[i].label.clone())
            .collect();

        let (mut scored, fallback, converged): (Vec<(f64, &Chunk)>, bool, bool) = if reset.is_empty() {
            let scored = candidates
                .iter()
                .map(|c| (term_overlap(&terms, &c.text), *c))
                .collect();
            (scored, true, true)
        } else {
            let ppr = personalized_pagerank(self.graph.adjacency(), &reset, self.config.ppr)?;
            let scored = candidates
                .iter()
                .map(|c| {
                    let i = self
                        .graph
                        .node_index(&passage_node_id(&c.chunk_id))
                        .expect("every chunk has a passage node");
                    (ppr.scores[i], *c)
                })
                .collect();
            (scored, false, ppr.converged)
        };
        scored.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| a.1.chunk_id.cmp(&b.1.chunk_id))
        });
        Ok(Retrieval {
            hits: scored
                .into_iter()
                .take(k)
                .map(|(score, c)| RetrievedChunk {
                    chunk: c.clone(),
                    score,
                })
                .collect(),
            fallback,
            reset_phrases,
            converged,
        })
    }

    pub fn to_index_json(&self) -> String {
        serde_json::to_string_pretty(&IndexFile {
            format_version: INDEX_FORMAT_VERSION,
            config: self.config,
            chunks: self.chunks.clone(),
            triples: self.triples.clone(),
            graph: self.graph.to_doc(),
            patterns: self.patterns.clone(),
        })
        .expect("index serializes")
    }

    pub fn from_index_json(text: &str) -> Result<Self, KnowledgeError> {
        let version: serde_json::Value =
            serde_json::from_str(text).map_err(|e| KnowledgeError::InvalidIndex(e.to_string()))?;
        match version.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == INDEX_FORMAT_VERSION as u64 => {}
            Some(v) => return Err(KnowledgeError::UnsupportedVersion(v as u32)),
            None => return Err(KnowledgeError::InvalidIndex("missing format_version".into())),
        }
        let file: IndexFile = serde_json::from_value(version)
            .map_err(|e| KnowledgeError::InvalidIndex(e.to_string()))?;
        let graph = KnowledgeGraph::from_doc(file.graph)?;
        let mut passages = 0;
        for node in graph.nodes() {
            if node.kind == NodeKind::Passage {
                passages += 1;
                if !file.chunks.iter().any(|c| c.chunk_id == node.label) {
                    return Err(KnowledgeError::InvalidIndex(format!(
                        "passage node {} has no chunk",
                        node.id
                    )));
                }
            }
        }
        if passages != file.chunks.len() {
            return Err(KnowledgeError::InvalidIndex(
                "chunk and passage counts differ".into(),
            ));
        }
        if let Some(t) = file
            .triples
            .iter()
            .find(|t| !file.chunks.iter().any(|c| c.chunk_id == t.source_chunk))
        {
            return Err(KnowledgeError::DanglingSource(t.source_chunk.clone()));
        }
        Ok(Self::assemble(
            file.config,
            file.chunks,
            file.triples,
            graph,
            file.patterns,
        ))
    }

    pub fn save(&self, path: &Path) -> Result<(), KnowledgeError> {
        std::fs::write(path, self.to_index_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, KnowledgeError> {
        Self::from_index_json(&std::fs::read_to_string(path)?)
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<(), KnowledgeError> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if let Ok(rel) = path.strip_prefix(root) {
            let rel: Vec<String> = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect();
            out.push(rel.join("/"));
        }
    }
    Ok(())
}
