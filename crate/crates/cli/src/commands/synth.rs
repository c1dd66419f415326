//! `fullscan synth`: writes synthetic inputs for the other commands.

use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;

use fullscan::corpus::{IngestRecord, SchemaFile};
use fullscan::link_learner::PairRecord;
use fullscan::synth::{ClusteredPairs, ClusteredSpec, CorpusSpec, PlantedCorpus, PlantedSpec, SyntheticCorpus};
use fullscan::two_tower::EngagementRecord;

use super::{write_json, write_jsonl};

#[derive(Debug, Clone, Serialize)]
pub struct SynthSummary {
    pub files: Vec<PathBuf>,
    pub records: usize,
}

/// `docs.jsonl` + `schema.json` for `build`.
pub fn corpus(out: &Path, spec: CorpusSpec) -> Result<SynthSummary> {
    std::fs::create_dir_all(out)?;
    let corpus = SyntheticCorpus::generate(spec)?;
    let docs = out.join("docs.jsonl");
    let schema = out.join("schema.json");
    let records: Vec<IngestRecord> = corpus
        .docs
        .iter()
        .map(|d| IngestRecord::from_document(d, &corpus.schema))
        .collect();
    write_jsonl(&docs, &records)?;
    write_json(&schema, &SchemaFile::from_schema(&corpus.schema))?;
    Ok(SynthSummary {
        files: vec![docs, schema],
        records: records.len(),
    })
}

/// `pairs.jsonl` (labelled seeker/job pairs) and `truth.jsonl` (the planted
/// links) for `links`.
pub fn links(out: &Path, spec: &PlantedSpec) -> Result<SynthSummary> {
    std::fs::create_dir_all(out)?;
    let corpus = PlantedCorpus::generate(spec);
    let pairs = out.join("pairs.jsonl");
    let truth = out.join("truth.jsonl");
    let records: Vec<PairRecord> = corpus.pairs.iter().map(PairRecord::from).collect();
    write_jsonl(&pairs, &records)?;
    write_jsonl(&truth, &corpus.planted)?;
    Ok(SynthSummary {
        files: vec![pairs, truth],
        records: records.len(),
    })
}

/// `train.jsonl`, `validation.jsonl` and `inventory.jsonl` for `train`/`eval`.
pub fn engagements(out: &Path, spec: &ClusteredSpec) -> Result<SynthSummary> {
    std::fs::create_dir_all(out)?;
    let data = ClusteredPairs::generate(spec);
    let as_records = |pairs: &[fullscan::two_tower::PairExample]| -> Vec<EngagementRecord> {
        pairs
            .iter()
            .map(|p| EngagementRecord {
                seeker: p.seeker.clone(),
                job_id: p.job_id.clone(),
                job: p.job.clone(),
                label: 1,
            })
            .collect()
    };
    let train = out.join("train.jsonl");
    let validation = out.join("validation.jsonl");
    let inventory = out.join("inventory.jsonl");
    write_jsonl(&train, &as_records(&data.train))?;
    write_jsonl(&validation, &as_records(&data.validation))?;
    write_jsonl(&inventory, &data.inventory)?;
    Ok(SynthSummary {
        files: vec![train, validation, inventory],
        records: data.train.len() + data.validation.len() + data.inventory.len(),
    })
}
