use serde::{Deserialize, Serialize};

use super::KnowledgeError;
use crate::text::whitespace_spans;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            text: text.into(),
        }
    }

    /// First path component of the id: `power/x.txt` belongs to `power`.
    pub fn collection(&self) -> &str {
        collection_of(&self.doc_id)
    }
}

/// Collection of documents that sit directly in the corpus root.
pub const DEFAULT_COLLECTION: &str = "default";

/// First path component of a document id, or [`DEFAULT_COLLECTION`] for ids
/// without a directory.
pub fn collection_of(doc_id: &str) -> &str {
    match doc_id.split_once('/') {
        Some((dir, _)) => dir,
        None => DEFAULT_COLLECTION,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub ordinal: usize,
    /// Source text from the first to the last token of the chunk.
    pub text: String,
    pub token_count: usize,
    /// Index of the first token within the document.
    pub token_offset: usize,
}

impl Chunk {
    pub fn collection(&self) -> &str {
        collection_of(&self.doc_id)
    }
}

/// Uniform chunking over whitespace tokens. Chunk `i` starts at token
/// `i * (size - overlap)`; the final chunk is the first one reaching the end
/// of the document.
pub fn chunk_document(
    doc: &Document,
    chunk_size: usize,
    overlap: usize,
) -> Result<Vec<Chunk>, KnowledgeError> {
    if chunk_size == 0 || overlap >= chunk_size {
        return Err(KnowledgeError::InvalidChunking {
            chunk_size,
            overlap,
        });
    }
    let spans = whitespace_spans(&doc.text);
    if spans.is_empty() {
        return Err(KnowledgeError::EmptyDocument(doc.doc_id.clone()));
    }
    let step = chunk_size - overlap;
    let n = spans.len();
    let mut chunks = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + chunk_size).min(n);
        let ordinal = chunks.len();
        chunks.push(Chunk {
            chunk_id: format!("{}#{ordinal:04}", doc.doc_id),
            doc_id: doc.doc_id.clone(),
            ordinal,
            text: doc.text[spans[start].start..spans[end - 1].end].to_string(),
            token_count: end - start,
            token_offset: start,
        });
        if end == n {
            break;
        }
        start += step;
    }
    Ok(chunks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(tokens: usize) -> Document {
        let text = (0..tokens).map(|i| format!("t{i}")).collect::<Vec<_>>().join(" ");
        Document::new("d", text)
    }

    #[test]
    fn thousand_tokens() {
        let chunks = chunk_document(&doc(1000), 512, 64).unwrap();
        let offsets: Vec<_> = chunks.iter().map(|c| c.token_offset).collect();
        assert_eq!(offsets, [0, 448, 896]);
        assert_eq!(chunks[2].token_count, 104);
        assert_eq!(chunks[1].chunk_id, "d#0001");
    }

    #[test]
    fn short_document_is_one_chunk() {
        let d = doc(100);
        let chunks = chunk_document(&d, 512, 64).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].text, d.text);
    }

    #[test]
    fn bad_parameters() {
        assert!(matches!(
            chunk_document(&doc(10), 64, 64),
            Err(KnowledgeError::InvalidChunking { .. })
        ));
        assert!(matches!(
            chunk_document(&Document::new("e", "  \n "), 64, 8),
            Err(KnowledgeError::EmptyDocument(_))
        ));
    }
}
