//! Line-delimited JSON ingestion format.
//!
//! One document per line:
//!
//! ```json
//! {"doc_id": "doc1", "clauses": {"geo": [934, 2934], "skill": [945, 342, 3112]}, "embedding": [0.1, 0.2]}
//! ```
//!
//! Clause names must be declared in the schema; omitted clauses are empty.
//! An omitted embedding is indexed as all zeros. Blank lines are skipped.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, DocumentInput, IndexSchema};

/// Schema file accepted by the `build` command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaFile {
    pub clauses: Vec<String>,
    pub max_num_attr: usize,
    pub dim: usize,
}

impl SchemaFile {
    pub fn to_schema(&self) -> Result<IndexSchema, CorpusError> {
        IndexSchema::new(self.clauses.clone(), self.max_num_attr, self.dim)
    }

    pub fn from_schema(schema: &IndexSchema) -> Self {
        Self {
            clauses: schema.clause_names().to_vec(),
            max_num_attr: schema.max_num_attr(),
            dim: schema.dim(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestRecord {
    pub doc_id: String,
    #[serde(default)]
    pub clauses: BTreeMap<String, Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

impl IngestRecord {
    pub fn into_document(self, schema: &IndexSchema) -> Result<DocumentInput, String> {
        let mut clauses = vec![Vec::new(); schema.num_clauses()];
        for (name, attrs) in self.clauses {
            let slot = schema
                .slot(&name)
                .ok_or_else(|| format!("unknown clause {name:?}"))?;
            clauses[slot] = attrs;
        }
        Ok(DocumentInput {
            doc_id: self.doc_id,
            clauses,
            embedding: self.embedding.unwrap_or_else(|| vec![0.0; schema.dim()]),
        })
    }

    pub fn from_document(doc: &DocumentInput, schema: &IndexSchema) -> Self {
        Self {
            doc_id: doc.doc_id.clone(),
            clauses: schema
                .clause_names()
                .iter()
                .cloned()
                .zip(doc.clauses.iter().cloned())
                .filter(|(_, a)| !a.is_empty())
                .collect(),
            embedding: Some(doc.embedding.clone()),
        }
    }
}

/// Parses ingestion records, reporting the first bad line.
pub fn parse_documents(
    reader: impl BufRead,
    schema: &IndexSchema,
) -> Result<Vec<DocumentInput>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| CorpusError::Parse {
            line: i + 1,
            message,
        };
        let rec: IngestRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        out.push(rec.into_document(schema).map_err(parse_err)?);
    }
    Ok(out)
}

pub fn read_documents(
    path: impl AsRef<Path>,
    schema: &IndexSchema,
) -> Result<Vec<DocumentInput>, CorpusError> {
    let file = std::fs::File::open(path)?;
    parse_documents(std::io::BufReader::new(file), schema)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> IndexSchema {
        IndexSchema::new(vec!["geo".into(), "skill".into()], 5, 2).unwrap()
    }

    #[test]
    fn parses_records() {
        let text = r#"{"doc_id":"doc1","clauses":{"geo":[934,2934],"skill":[945,342,3112]},"embedding":[1,0]}

{"doc_id":"doc2","clauses":{"skill":[1]}}"#;
        let docs = parse_documents(text.as_bytes(), &schema()).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].clauses, vec![vec![934, 2934], vec![945, 342, 3112]]);
        assert_eq!(docs[1].clauses, vec![vec![], vec![1]]);
        assert_eq!(docs[1].embedding, vec![0.0, 0.0]);
    }

    #[test]
    fn reports_line_numbers() {
        let text = "{\"doc_id\":\"a\"}\n{\"doc_id\":\"b\",\"clauses\":{\"color\":[1]}}\n";
        match parse_documents(text.as_bytes(), &schema()) {
            Err(CorpusError::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("color"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_documents("not json".as_bytes(), &schema()),
            Err(CorpusError::Parse { line: 1, .. })
        ));
    }
}
