//! `fullscan build`: ingest JSONL -> index file.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use fullscan::corpus::{read_documents, SchemaFile};
use fullscan::{IndexBuilder, QuantCodec};

use crate::config::BuildConfig;

#[derive(Debug, Clone)]
pub struct BuildArgs {
    pub input: PathBuf,
    pub schema: PathBuf,
    pub output: PathBuf,
    pub config: BuildConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildSummary {
    pub num_docs: usize,
    pub zero_embeddings: usize,
    pub num_bits: usize,
    pub bytes: u64,
    pub build_ms: f64,
    pub output: PathBuf,
}

pub fn run(args: &BuildArgs) -> Result<BuildSummary> {
    let start = Instant::now();
    let text = std::fs::read_to_string(&args.schema)
        .with_context(|| format!("reading schema {}", args.schema.display()))?;
    let schema: SchemaFile =
        serde_json::from_str(&text).with_context(|| format!("parsing schema {}", args.schema.display()))?;
    let schema = schema.to_schema()?;
    let docs = read_documents(&args.input, &schema)
        .with_context(|| format!("reading {}", args.input.display()))?;
    if docs.is_empty() {
        bail!("no documents in {}", args.input.display());
    }
    let codec = QuantCodec::new(schema.dim(), args.config.num_bits, args.config.seed)?;
    let mut builder = IndexBuilder::new(schema);
    for (i, doc) in docs.into_iter().enumerate() {
        let id = doc.doc_id.clone();
        builder
            .add_document(doc)
            .with_context(|| format!("document {} ({id:?})", i + 1))?;
    }
    let index = builder.freeze(codec)?;
    index
        .save(&args.output)
        .with_context(|| format!("writing {}", args.output.display()))?;
    Ok(BuildSummary {
        num_docs: index.num_docs(),
        zero_embeddings: index.zero_embedding_rows().len(),
        num_bits: index.codec().num_bits(),
        bytes: std::fs::metadata(&args.output)?.len(),
        build_ms: start.elapsed().as_secs_f64() * 1e3,
        output: args.output.clone(),
    })
}
