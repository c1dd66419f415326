//! Link graphs and their export to the term index.
//!
//! The 4-layer [`LinkGraph`] goes seeker -> seeker segment -> job segment ->
//! job. [`collapse_graph`] replaces every linked segment pair with one node,
//! giving the 3-layer [`ServingGraph`] seeker -> node -> job. Exporting gives
//! each node an attribute id so that a job carries the ids of its nodes and a
//! seeker's query is the disjunction of its node ids.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::LinkError;
use crate::corpus::IngestRecord;
use crate::corpus::{CorpusError, DocumentInput, FrozenIndex, IndexBuilder, IndexSchema};
use crate::quantizer::QuantCodec;
use crate::term_match::CnfQuery;

/// Clause slot holding node attribute ids in an exported index.
pub const NODE_CLAUSE: &str = "link_node";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkGraph {
    seekers: BTreeMap<String, BTreeSet<usize>>,
    links: BTreeSet<(usize, usize)>,
    job_members: BTreeMap<usize, BTreeSet<String>>,
    seeker_segment_labels: Vec<String>,
    job_segment_labels: Vec<String>,
}

impl LinkGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_seeker(&mut self, seeker: &str) {
        self.seekers.entry(seeker.to_string()).or_default();
    }

    /// Maps a seeker to seeker segment `p`.
    pub fn map_seeker(&mut self, seeker: &str, p: usize) {
        self.seekers.entry(seeker.to_string()).or_default().insert(p);
    }

    /// Links seeker segment `p` to job segment `q`.
    pub fn add_link(&mut self, p: usize, q: usize) {
        self.links.insert((p, q));
    }

    pub fn add_job_member(&mut self, q: usize, job: &str) {
        self.job_members.entry(q).or_default().insert(job.to_string());
    }

    pub fn set_labels(&mut self, seeker_segments: Vec<String>, job_segments: Vec<String>) {
        self.seeker_segment_labels = seeker_segments;
        self.job_segment_labels = job_segments;
    }

    pub fn seekers(&self) -> impl Iterator<Item = &str> {
        self.seekers.keys().map(String::as_str)
    }

    pub fn links(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.links.iter().copied()
    }

    pub fn jobs(&self) -> BTreeSet<String> {
        self.job_members.values().flatten().cloned().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Jobs reachable from a seeker by walking all four layers.
    pub fn reachable_jobs(&self, seeker: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let Some(segments) = self.seekers.get(seeker) else {
            return out;
        };
        for &(p, q) in &self.links {
            if segments.contains(&p) {
                if let Some(jobs) = self.job_members.get(&q) {
                    out.extend(jobs.iter().cloned());
                }
            }
        }
        out
    }
}

/// A node is one linked `(seeker segment, job segment)` pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ServingGraph {
    pub nodes: Vec<(usize, usize)>,
    pub node_labels: Vec<String>,
    pub seeker_nodes: BTreeMap<String, Vec<usize>>,
    pub node_jobs: Vec<Vec<String>>,
}

impl ServingGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn reachable_jobs(&self, seeker: &str) -> BTreeSet<String> {
        self.seeker_nodes
            .get(seeker)
            .into_iter()
            .flatten()
            .flat_map(|&n| self.node_jobs[n].iter().cloned())
            .collect()
    }
}

pub fn collapse_graph(graph: &LinkGraph) -> ServingGraph {
    let nodes: Vec<(usize, usize)> = graph.links.iter().copied().collect();
    let label = |labels: &[String], i: usize| labels.get(i).cloned().unwrap_or_else(|| i.to_string());
    let node_labels = nodes
        .iter()
        .map(|&(p, q)| {
            format!(
                "{} -> {}",
                label(&graph.seeker_segment_labels, p),
                label(&graph.job_segment_labels, q)
            )
        })
        .collect();
    let node_jobs = nodes
        .iter()
        .map(|(_, q)| {
            graph
                .job_members
                .get(q)
                .map(|s| s.iter().cloned().collect())
                .unwrap_or_default()
        })
        .collect();
    let seeker_nodes = graph
        .seekers
        .iter()
        .map(|(s, segs)| {
            let mine = nodes
                .iter()
                .enumerate()
                .filter(|(_, (p, _))| segs.contains(p))
                .map(|(n, _)| n)
                .collect();
            (s.clone(), mine)
        })
        .collect();
    ServingGraph {
        nodes,
        node_labels,
        seeker_nodes,
        node_jobs,
    }
}

/// Attribute id of node `n`; 0 is the padding id so ids start at 1.
pub fn node_attribute_id(node: usize) -> Result<u32, LinkError> {
    u32::try_from(node)
        .ok()
        .and_then(|n| n.checked_add(1))
        .ok_or(LinkError::AttributeSpaceExhausted(node + 1))
}

/// One line of the seeker sidecar file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeekerNodes {
    pub seeker_id: String,
    pub nodes: Vec<u32>,
}

/// Node attribute ids per job and per seeker.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexExport {
    pub job_nodes: BTreeMap<String, Vec<u32>>,
    pub seeker_nodes: BTreeMap<String, Vec<u32>>,
}

/// Assigns attribute ids to nodes. `jobs` lists every job to index; jobs not
/// reachable through any node are exported with no node ids.
pub fn export_to_index<'a>(
    graph: &ServingGraph,
    jobs: impl IntoIterator<Item = &'a str>,
) -> Result<IndexExport, LinkError> {
    let mut job_nodes: BTreeMap<String, Vec<u32>> =
        jobs.into_iter().map(|j| (j.to_string(), Vec::new())).collect();
    for (n, members) in graph.node_jobs.iter().enumerate() {
        let id = node_attribute_id(n)?;
        for j in members {
            job_nodes.entry(j.clone()).or_default().push(id);
        }
    }
    let mut seeker_nodes = BTreeMap::new();
    for (s, nodes) in &graph.seeker_nodes {
        let ids = nodes
            .iter()
            .map(|&n| node_attribute_id(n))
            .collect::<Result<Vec<_>, _>>()?;
        seeker_nodes.insert(s.clone(), ids);
    }
    Ok(IndexExport {
        job_nodes,
        seeker_nodes,
    })
}

impl IndexExport {
    /// Largest number of node ids carried by one job (at least 1).
    pub fn max_nodes_per_job(&self) -> usize {
        self.job_nodes.values().map(Vec::len).max().unwrap_or(0).max(1)
    }

    /// Ingestion records with the node ids in the [`NODE_CLAUSE`] slot.
    /// Embeddings come from `embedding`, when given.
    pub fn job_records(
        &self,
        mut embedding: impl FnMut(&str) -> Option<Vec<f64>>,
    ) -> Vec<IngestRecord> {
        self.job_nodes
            .iter()
            .map(|(job, nodes)| IngestRecord {
                doc_id: job.clone(),
                clauses: [(NODE_CLAUSE.to_string(), nodes.clone())]
                    .into_iter()
                    .filter(|(_, n)| !n.is_empty())
                    .collect(),
                embedding: embedding(job),
            })
            .collect()
    }

    pub fn seeker_records(&self) -> Vec<SeekerNodes> {
        self.seeker_nodes
            .iter()
            .map(|(s, n)| SeekerNodes {
                seeker_id: s.clone(),
                nodes: n.clone(),
            })
            .collect()
    }

    /// Builds a term-only index (one [`NODE_CLAUSE`] slot, zero embeddings
    /// of dimension 1).
    pub fn build_index(&self) -> Result<FrozenIndex, CorpusError> {
        let schema = IndexSchema::new(vec![NODE_CLAUSE.to_string()], self.max_nodes_per_job(), 1)?;
        let mut builder = IndexBuilder::new(schema);
        for (job, nodes) in &self.job_nodes {
            builder.add_document(DocumentInput {
                doc_id: job.clone(),
                clauses: vec![nodes.clone()],
                embedding: vec![0.0],
            })?;
        }
        builder.freeze(QuantCodec::new(1, 64, 0)?)
    }

    /// Term query for a seeker: its node ids in the [`NODE_CLAUSE`] slot.
    /// `None` when the seeker has no nodes and must retrieve nothing.
    pub fn seeker_query(&self, index: &FrozenIndex, seeker: &str) -> Option<CnfQuery> {
        let nodes = self.seeker_nodes.get(seeker).filter(|n| !n.is_empty())?;
        let slot = index.schema().slot(NODE_CLAUSE)?;
        CnfQuery::normalize(index.num_clauses(), [(slot, nodes.clone())]).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term_match::full_scan_tbr;

    fn fig4() -> LinkGraph {
        // P1 -> Q1, Q2; P2 -> Q2
        let mut g = LinkGraph::new();
        g.map_seeker("alice", 0);
        g.map_seeker("bob", 1);
        g.add_seeker("carol");
        g.add_link(0, 0);
        g.add_link(0, 1);
        g.add_link(1, 1);
        g.add_job_member(0, "j1");
        g.add_job_member(1, "j2");
        g.add_job_member(1, "j3");
        g.set_labels(vec!["P1".into(), "P2".into()], vec!["Q1".into(), "Q2".into()]);
        g
    }

    fn retrieve(export: &IndexExport, index: &FrozenIndex, seeker: &str) -> BTreeSet<String> {
        match export.seeker_query(index, seeker) {
            None => BTreeSet::new(),
            Some(q) => full_scan_tbr(index, &q, 0)
                .iter()
                .map(|m| index.doc_id(m.row_id).to_string())
                .collect(),
        }
    }

    #[test]
    fn collapse_makes_one_node_per_link() {
        let s = collapse_graph(&fig4());
        assert_eq!(s.nodes, vec![(0, 0), (0, 1), (1, 1)]);
        assert_eq!(s.node_labels[0], "P1 -> Q1");
        assert_eq!(s.seeker_nodes["alice"], vec![0, 1]);
        assert_eq!(s.seeker_nodes["bob"], vec![2]);
        assert!(s.seeker_nodes["carol"].is_empty());
    }

    #[test]
    fn empty_graph_collapses_to_empty() {
        let s = collapse_graph(&LinkGraph::new());
        assert_eq!(s.num_nodes(), 0);
        assert!(s.seeker_nodes.is_empty());
    }

    #[test]
    fn export_round_trip() {
        let g = fig4();
        let s = collapse_graph(&g);
        let export = export_to_index(&s, ["j1", "j2", "j3", "j4"]).unwrap();
        assert_eq!(export.job_nodes["j1"], vec![1]);
        assert_eq!(export.job_nodes["j2"], vec![2, 3]);
        assert!(export.job_nodes["j4"].is_empty());
        let index = export.build_index().unwrap();
        for seeker in ["alice", "bob", "carol", "nobody"] {
            assert_eq!(retrieve(&export, &index, seeker), g.reachable_jobs(seeker), "{seeker}");
            assert_eq!(s.reachable_jobs(seeker), g.reachable_jobs(seeker));
        }
        assert!(export.seeker_query(&index, "carol").is_none());
    }

    #[test]
    fn attribute_ids_skip_padding() {
        assert_eq!(node_attribute_id(0).unwrap(), 1);
        assert!(node_attribute_id(u32::MAX as usize).is_err());
    }
}
