//! The immutable document index scanned by every retrieval stage.
//!
//! Documents are staged in an [`IndexBuilder`] and frozen into a
//! [`FrozenIndex`], which stores four dense row-major matrices:
//!
//! * `attributes`: `num_docs x max_num_attr` attribute ids, one clause after
//!   another, each clause sorted ascending, zero-padded on the right;
//! * `offsets`: `num_docs x (num_clauses + 1)` begin/end positions of each
//!   clause inside the attribute row;
//! * `embeddings`: `num_docs x dim`, every row L2-normalized;
//! * `signatures`: `num_docs x words` packed sign-quantized embeddings.
//!
//! Attribute id `0` is the padding value and can never be a real attribute.

mod format;
mod ingest;

use std::collections::HashMap;

use thiserror::Error;

use crate::quantizer::{QuantCodec, QuantError};

pub use ingest::{parse_documents, read_documents, IngestRecord, SchemaFile};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("duplicate docId {0:?}")]
    DuplicateDocId(String),
    #[error("document {doc_id:?}: clauses has {found} entries, expected {expected}")]
    ClauseCount {
        doc_id: String,
        expected: usize,
        found: usize,
    },
    #[error("document {doc_id:?}: embedding has {found} dimensions, expected {expected}")]
    Dimension {
        doc_id: String,
        expected: usize,
        found: usize,
    },
    #[error("document {doc_id:?}: clause {clause} contains attribute id 0 (0 reserved for padding)")]
    ReservedAttribute { doc_id: String, clause: usize },
    #[error("document {doc_id:?}: embedding contains a non-finite value")]
    NonFiniteEmbedding { doc_id: String },
    #[error("no documents")]
    Empty,
    #[error("{} document(s) wider than maxNumAttr={max_num_attr}: {}", offenders.len(), fmt_offenders(offenders))]
    TooWide {
        max_num_attr: usize,
        offenders: Vec<(String, usize)>,
    },
    #[error("codec dimension {codec_dim} does not match index dimension {index_dim}")]
    CodecMismatch { index_dim: usize, codec_dim: usize },
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("truncated index file: needed {needed} bytes, found {available}")]
    Truncated { needed: u64, available: u64 },
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("index format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("index checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    ChecksumMismatch { stored: u64, computed: u64 },
    #[error("malformed index file: {0}")]
    Malformed(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn fmt_offenders(offenders: &[(String, usize)]) -> String {
    offenders
        .iter()
        .map(|(id, width)| format!("{id:?} ({width})"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Clause slots, row width and embedding dimension shared by all documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSchema {
    clause_names: Vec<String>,
    max_num_attr: usize,
    dim: usize,
}

impl IndexSchema {
    pub fn new(
        clause_names: Vec<String>,
        max_num_attr: usize,
        dim: usize,
    ) -> Result<Self, CorpusError> {
        if dim == 0 {
            return Err(CorpusError::InvalidSchema("dim must be positive".into()));
        }
        for (i, name) in clause_names.iter().enumerate() {
            if name.is_empty() {
                return Err(CorpusError::InvalidSchema(format!("clause {i} has an empty name")));
            }
            if clause_names[..i].contains(name) {
                return Err(CorpusError::InvalidSchema(format!("clause {name:?} declared twice")));
            }
        }
        if max_num_attr > u32::MAX as usize {
            return Err(CorpusError::InvalidSchema("maxNumAttr too large".into()));
        }
        Ok(Self {
            clause_names,
            max_num_attr,
            dim,
        })
    }

    pub fn clause_names(&self) -> &[String] {
        &self.clause_names
    }

    pub fn num_clauses(&self) -> usize {
        self.clause_names.len()
    }

    pub fn max_num_attr(&self) -> usize {
        self.max_num_attr
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.clause_names.iter().position(|n| n == name)
    }
}

/// A document as submitted for indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentInput {
    pub doc_id: String,
    /// One attribute list per clause slot, in schema order.
    pub clauses: Vec<Vec<u32>>,
    pub embedding: Vec<f64>,
}

/// Collects documents ahead of [`IndexBuilder::freeze`]. Single writer.
#[derive(Debug)]
pub struct IndexBuilder {
    schema: IndexSchema,
    docs: Vec<DocumentInput>,
    rows: HashMap<String, u32>,
}

impl IndexBuilder {
    pub fn new(schema: IndexSchema) -> Self {
        Self {
            schema,
            docs: Vec::new(),
            rows: HashMap::new(),
        }
    }

    pub fn schema(&self) -> &IndexSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Validates and stages a document, returning its row id.
    pub fn add_document(&mut self, doc: DocumentInput) -> Result<u32, CorpusError> {
        if self.rows.contains_key(&doc.doc_id) {
            return Err(CorpusError::DuplicateDocId(doc.doc_id));
        }
        if doc.clauses.len() != self.schema.num_clauses() {
            return Err(CorpusError::ClauseCount {
                doc_id: doc.doc_id,
                expected: self.schema.num_clauses(),
                found: doc.clauses.len(),
            });
        }
        if doc.embedding.len() != self.schema.dim {
            return Err(CorpusError::Dimension {
                doc_id: doc.doc_id,
                expected: self.schema.dim,
                found: doc.embedding.len(),
            });
        }
        if let Some(clause) = doc.clauses.iter().position(|c| c.contains(&0)) {
            return Err(CorpusError::ReservedAttribute {
                doc_id: doc.doc_id,
                clause,
            });
        }
        if doc.embedding.iter().any(|x| !x.is_finite()) {
            return Err(CorpusError::NonFiniteEmbedding { doc_id: doc.doc_id });
        }
        let row = u32::try_from(self.docs.len())
            .map_err(|_| CorpusError::InvalidSchema("too many documents".into()))?;
        self.rows.insert(doc.doc_id.clone(), row);
        self.docs.push(doc);
        Ok(row)
    }

    /// Sorts and de-duplicates clauses, pads rows, normalizes embeddings and
    /// computes signatures.
    pub fn freeze(self, codec: QuantCodec) -> Result<FrozenIndex, CorpusError> {
        let schema = self.schema;
        if self.docs.is_empty() {
            return Err(CorpusError::Empty);
        }
        if codec.dim() != schema.dim {
            return Err(CorpusError::CodecMismatch {
                index_dim: schema.dim,
                codec_dim: codec.dim(),
            });
        }
        let num_docs = self.docs.len();
        let nc = schema.num_clauses();
        let width = schema.max_num_attr;
        let words = codec.words();

        let mut attributes = vec![0u32; num_docs * width];
        let mut offsets = vec![0u32; num_docs * (nc + 1)];
        let mut embeddings = vec![0f64; num_docs * schema.dim];
        let mut signatures = vec![0u64; num_docs * words];
        let mut zero_rows = Vec::new();
        let mut doc_ids = Vec::with_capacity(num_docs);
        let mut offenders = Vec::new();

        for (row, doc) in self.docs.into_iter().enumerate() {
            let mut flat = Vec::new();
            let mut ends = Vec::with_capacity(nc);
            for mut clause in doc.clauses {
                clause.sort_unstable();
                clause.dedup();
                flat.extend_from_slice(&clause);
                ends.push(flat.len() as u32);
            }
            if flat.len() > width {
                offenders.push((doc.doc_id, flat.len()));
                continue;
            }
            attributes[row * width..row * width + flat.len()].copy_from_slice(&flat);
            offsets[row * (nc + 1) + 1..(row + 1) * (nc + 1)].copy_from_slice(&ends);

            let emb = &mut embeddings[row * schema.dim..(row + 1) * schema.dim];
            if !normalize_into(&doc.embedding, emb) {
                zero_rows.push(row as u32);
            }
            codec.encode_into(emb, &mut signatures[row * words..(row + 1) * words])?;
            doc_ids.push(doc.doc_id);
        }
        if !offenders.is_empty() {
            return Err(CorpusError::TooWide {
                max_num_attr: width,
                offenders,
            });
        }
        Ok(FrozenIndex::from_raw(
            schema, attributes, offsets, embeddings, zero_rows, signatures, codec, doc_ids,
        ))
    }
}

/// Writes `v / |v|` into `out`; returns false (and writes zeros) for a zero vector.
pub(crate) fn normalize_into(v: &[f64], out: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        out.fill(0.0);
        return false;
    }
    for (o, x) in out.iter_mut().zip(v) {
        *o = x / norm;
    }
    true
}

/// Immutable, concurrently readable index.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenIndex {
    schema: IndexSchema,
    num_docs: usize,
    attributes: Vec<u32>,
    offsets: Vec<u32>,
    embeddings: Vec<f64>,
    /// Rows whose input embedding was all zeros (sorted).
    zero_rows: Vec<u32>,
    signatures: Vec<u64>,
    codec: QuantCodec,
    doc_ids: Vec<String>,
    rows: HashMap<String, u32>,
}

impl FrozenIndex {
    #[allow(clippy::too_many_arguments)]
    fn from_raw(
        schema: IndexSchema,
        attributes: Vec<u32>,
        offsets: Vec<u32>,
        embeddings: Vec<f64>,
        zero_rows: Vec<u32>,
        signatures: Vec<u64>,
        codec: QuantCodec,
        doc_ids: Vec<String>,
    ) -> Self {
        let rows = doc_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        Self {
            num_docs: doc_ids.len(),
            schema,
            attributes,
            offsets,
            embeddings,
            zero_rows,
            signatures,
            codec,
            doc_ids,
            rows,
        }
    }

    pub fn schema(&self) -> &IndexSchema {
        &self.schema
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn num_clauses(&self) -> usize {
        self.schema.num_clauses()
    }

    pub fn max_num_attr(&self) -> usize {
        self.schema.max_num_attr
    }

    pub fn dim(&self) -> usize {
        self.schema.dim
    }

    pub fn codec(&self) -> &QuantCodec {
        &self.codec
    }

    /// Full padded attribute row.
    pub fn attribute_row(&self, row: u32) -> &[u32] {
        let w = self.schema.max_num_attr;
        &self.attributes[row as usize * w..(row as usize + 1) * w]
    }

    pub fn offsets_row(&self, row: u32) -> &[u32] {
        let n = self.num_clauses() + 1;
        &self.offsets[row as usize * n..(row as usize + 1) * n]
    }

    /// Sorted attribute ids of one clause of one document.
    #[inline]
    pub fn clause_slice(&self, row: u32, slot: usize) -> &[u32] {
        let n = self.num_clauses() + 1;
        let base = row as usize * n;
        let begin = self.offsets[base + slot] as usize;
        let end = self.offsets[base + slot + 1] as usize;
        let w = self.schema.max_num_attr;
        &self.attributes[row as usize * w + begin..row as usize * w + end]
    }

    #[inline]
    pub fn embedding(&self, row: u32) -> &[f64] {
        let d = self.schema.dim;
        &self.embeddings[row as usize * d..(row as usize + 1) * d]
    }

    #[inline]
    pub fn signature(&self, row: u32) -> &[u64] {
        let w = self.codec.words();
        &self.signatures[row as usize * w..(row as usize + 1) * w]
    }

    /// True if the document was indexed with an all-zero embedding.
    pub fn is_zero_embedding(&self, row: u32) -> bool {
        self.zero_rows.binary_search(&row).is_ok()
    }

    pub fn zero_embedding_rows(&self) -> &[u32] {
        &self.zero_rows
    }

    pub fn doc_id(&self, row: u32) -> &str {
        &self.doc_ids[row as usize]
    }

    pub fn row_of(&self, doc_id: &str) -> Option<u32> {
        self.rows.get(doc_id).copied()
    }

    /// Writes the index to `path` in the binary index format.
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), CorpusError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, CorpusError> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_doc_schema() -> IndexSchema {
        IndexSchema::new(vec!["geo".into(), "skill".into()], 5, 4).unwrap()
    }

    fn doc(id: &str, geo: &[u32], skill: &[u32], emb: [f64; 4]) -> DocumentInput {
        DocumentInput {
            doc_id: id.into(),
            clauses: vec![geo.to_vec(), skill.to_vec()],
            embedding: emb.to_vec(),
        }
    }

    pub(crate) fn two_doc_index() -> FrozenIndex {
        let mut b = IndexBuilder::new(two_doc_schema());
        assert_eq!(
            b.add_document(doc("doc1", &[934, 2934], &[945, 342, 3112], [3.0, 4.0, 0.0, 0.0]))
                .unwrap(),
            0
        );
        assert_eq!(
            b.add_document(doc("doc2", &[129], &[9342, 234], [0.0, 1.0, 1.0, 0.0])).unwrap(),
            1
        );
        b.freeze(QuantCodec::new(4, 512, 42).unwrap()).unwrap()
    }

    #[test]
    fn two_doc_layout() {
        let idx = two_doc_index();
        assert_eq!(idx.attribute_row(0), &[934, 2934, 342, 945, 3112]);
        assert_eq!(idx.offsets_row(0), &[0, 2, 5]);
        assert_eq!(idx.attribute_row(1), &[129, 234, 9342, 0, 0]);
        assert_eq!(idx.offsets_row(1), &[0, 1, 3]);
        assert_eq!(idx.clause_slice(0, 1), &[342, 945, 3112]);
        assert_eq!(idx.clause_slice(1, 0), &[129]);
    }

    #[test]
    fn embeddings_are_normalized() {
        let idx = two_doc_index();
        assert_eq!(idx.embedding(0), &[0.6, 0.8, 0.0, 0.0]);
        let n: f64 = idx.embedding(1).iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn signatures_match_codec() {
        let idx = two_doc_index();
        for row in 0..2 {
            let sig = idx.codec().encode(idx.embedding(row)).unwrap();
            assert_eq!(sig.words(), idx.signature(row));
        }
    }

    #[test]
    fn wrong_clause_count_rejected() {
        let mut b = IndexBuilder::new(two_doc_schema());
        let err = b
            .add_document(DocumentInput {
                doc_id: "x".into(),
                clauses: vec![vec![1]],
                embedding: vec![1.0; 4],
            })
            .unwrap_err();
        assert!(matches!(err, CorpusError::ClauseCount { expected: 2, found: 1, .. }));
    }

    #[test]
    fn wrong_dim_rejected() {
        let mut b = IndexBuilder::new(two_doc_schema());
        let err = b
            .add_document(DocumentInput {
                doc_id: "x".into(),
                clauses: vec![vec![], vec![]],
                embedding: vec![1.0; 3],
            })
            .unwrap_err();
        assert!(err.to_string().contains("embedding"));
    }

    #[test]
    fn zero_attribute_rejected() {
        let mut b = IndexBuilder::new(two_doc_schema());
        let err = b.add_document(doc("x", &[0], &[], [1.0; 4])).unwrap_err();
        assert!(err.to_string().contains("0 reserved for padding"));
    }

    #[test]
    fn duplicate_doc_id_rejected() {
        let mut b = IndexBuilder::new(two_doc_schema());
        b.add_document(doc("x", &[1], &[], [1.0; 4])).unwrap();
        assert!(matches!(
            b.add_document(doc("x", &[2], &[], [1.0; 4])),
            Err(CorpusError::DuplicateDocId(_))
        ));
    }

    #[test]
    fn duplicates_within_clause_removed() {
        let mut b = IndexBuilder::new(two_doc_schema());
        b.add_document(doc("x", &[5, 5, 2], &[7, 7, 7, 7, 7, 7], [1.0; 4])).unwrap();
        let idx = b.freeze(QuantCodec::new(4, 64, 0).unwrap()).unwrap();
        assert_eq!(idx.clause_slice(0, 0), &[2, 5]);
        assert_eq!(idx.clause_slice(0, 1), &[7]);
        assert_eq!(idx.offsets_row(0), &[0, 2, 3]);
    }

    #[test]
    fn empty_clauses_give_zero_offsets() {
        let mut b = IndexBuilder::new(two_doc_schema());
        b.add_document(doc("x", &[], &[], [1.0; 4])).unwrap();
        let idx = b.freeze(QuantCodec::new(4, 64, 0).unwrap()).unwrap();
        assert_eq!(idx.offsets_row(0), &[0, 0, 0]);
        assert_eq!(idx.attribute_row(0), &[0; 5]);
    }

    #[test]
    fn too_wide_lists_offenders() {
        let mut b = IndexBuilder::new(two_doc_schema());
        b.add_document(doc("ok", &[1], &[2], [1.0; 4])).unwrap();
        b.add_document(doc("wide", &[1, 2, 3], &[4, 5, 6], [1.0; 4])).unwrap();
        match b.freeze(QuantCodec::new(4, 64, 0).unwrap()) {
            Err(CorpusError::TooWide { offenders, .. }) => {
                assert_eq!(offenders, vec![("wide".to_string(), 6)]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_builder_rejected() {
        let b = IndexBuilder::new(two_doc_schema());
        assert!(matches!(
            b.freeze(QuantCodec::new(4, 64, 0).unwrap()),
            Err(CorpusError::Empty)
        ));
    }

    #[test]
    fn zero_embedding_is_flagged() {
        let mut b = IndexBuilder::new(two_doc_schema());
        b.add_document(doc("z", &[1], &[], [0.0; 4])).unwrap();
        b.add_document(doc("n", &[1], &[], [1.0; 4])).unwrap();
        let idx = b.freeze(QuantCodec::new(4, 8, 0).unwrap()).unwrap();
        assert!(idx.is_zero_embedding(0));
        assert!(!idx.is_zero_embedding(1));
        assert_eq!(idx.embedding(0), &[0.0; 4]);
        assert_eq!(idx.signature(0), &[0xff]);
    }

    #[test]
    fn codec_dim_must_match() {
        let mut b = IndexBuilder::new(two_doc_schema());
        b.add_document(doc("x", &[1], &[], [1.0; 4])).unwrap();
        assert!(matches!(
            b.freeze(QuantCodec::new(5, 8, 0).unwrap()),
            Err(CorpusError::CodecMismatch { .. })
        ));
    }

    #[test]
    fn doc_id_map_is_bijective() {
        let idx = two_doc_index();
        for row in 0..idx.num_docs() as u32 {
            assert_eq!(idx.row_of(idx.doc_id(row)), Some(row));
        }
        assert_eq!(idx.row_of("nope"), None);
    }
}
