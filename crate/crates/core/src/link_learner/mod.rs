//! Learning explainable seeker/job links from confirmed hires.
//!
//! A *meta link* connects one seeker attribute value to one job attribute
//! value along a template such as `memberTitle <-> jobTitle`. A *complex link*
//! is a set of meta links that must all hold. The learner:
//!
//! 1. enumerates every non-empty subset of the meta links of each hire pair,
//! 2. tallies hires and no-hires per candidate and drops candidates with
//!    fewer than `min_support` hires or more no-hires than hires,
//! 3. scores the survivors (hire/no-hire ratio, or L1-regularized logistic
//!    regression weights) and drops low-quality links,
//! 4. per seeker, re-adds seeker-segment mappings best first until the
//!    seeker reaches the desired number of jobs,
//! 5. collapses the resulting 4-layer graph to 3 layers and exports node ids
//!    as term attributes.

mod graph;
mod l1;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use graph::{
    collapse_graph, export_to_index, node_attribute_id, IndexExport, LinkGraph, ServingGraph,
    SeekerNodes, NODE_CLAUSE,
};
pub use l1::{fit_l1_logistic, l1_objective, l1_path, L1Fit, L1Options, SparseDesign};

/// Multi-valued attributes of a seeker or a job.
pub type AttrMap = BTreeMap<String, Vec<String>>;

/// Default cap on meta links per pair before subset enumeration.
pub const DEFAULT_MAX_META_LINKS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("pair has {found} meta links, above the enumeration cap of {cap}")]
    TooManyMetaLinks { found: usize, cap: usize },
    #[error("lambda must be non-negative and finite, got {0}")]
    InvalidLambda(f64),
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("no training data")]
    NoData,
    #[error("{0} nodes exceed the attribute id space")]
    AttributeSpaceExhausted(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkTemplate {
    pub seeker_attr: String,
    pub job_attr: String,
}

impl LinkTemplate {
    pub fn new(seeker_attr: impl Into<String>, job_attr: impl Into<String>) -> Self {
        Self {
            seeker_attr: seeker_attr.into(),
            job_attr: job_attr.into(),
        }
    }
}

pub fn validate_templates(templates: &[LinkTemplate]) -> Result<(), LinkError> {
    let mut seen = BTreeSet::new();
    for t in templates {
        if t.seeker_attr.is_empty() || t.job_attr.is_empty() {
            return Err(LinkError::InvalidTemplate("empty attribute name".into()));
        }
        if !seen.insert(t) {
            return Err(LinkError::InvalidTemplate(format!(
                "{} <-> {} listed twice",
                t.seeker_attr, t.job_attr
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MetaLink {
    pub seeker_attr: String,
    pub seeker_value: String,
    pub job_attr: String,
    pub job_value: String,
}

/// An `(attribute, value)` set describing a group of seekers or jobs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Segment(pub Vec<(String, String)>);

impl Segment {
    /// True when `attrs` carries every `(attribute, value)` of the segment.
    pub fn contains(&self, attrs: &AttrMap) -> bool {
        self.0.iter().all(|(a, v)| {
            attrs
                .get(a)
                .is_some_and(|vals| vals.iter().any(|x| x == v))
        })
    }
}

impl std::fmt::Display for Segment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(a, v)| format!("{a}={v}")).collect();
        write!(f, "{}", parts.join("&"))
    }
}

/// Canonical (sorted, de-duplicated, non-empty) set of meta links.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkKey(Vec<MetaLink>);

impl LinkKey {
    pub fn new(mut metas: Vec<MetaLink>) -> Self {
        metas.sort();
        metas.dedup();
        assert!(!metas.is_empty(), "a complex link needs at least one meta link");
        Self(metas)
    }

    pub fn metas(&self) -> &[MetaLink] {
        &self.0
    }

    pub fn seeker_segment(&self) -> Segment {
        let mut s: Vec<_> = self
            .0
            .iter()
            .map(|m| (m.seeker_attr.clone(), m.seeker_value.clone()))
            .collect();
        s.sort();
        s.dedup();
        Segment(s)
    }

    pub fn job_segment(&self) -> Segment {
        let mut s: Vec<_> = self
            .0
            .iter()
            .map(|m| (m.job_attr.clone(), m.job_value.clone()))
            .collect();
        s.sort();
        s.dedup();
        Segment(s)
    }

    /// Whether every meta link of this key holds for the given pair.
    pub fn fires(&self, seeker: &AttrMap, job: &AttrMap) -> bool {
        self.seeker_segment().contains(seeker) && self.job_segment().contains(job)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexLink {
    pub key: LinkKey,
    /// Hire pairs on which the link fires.
    pub support: u32,
    /// No-hire pairs on which the link fires.
    pub neg_count: u32,
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub seeker_id: String,
    pub seeker: AttrMap,
    pub job_id: String,
    pub job: AttrMap,
    /// Confirmed hire (1) or explicit no-hire (0).
    pub hire: bool,
}

/// One meta link per template and value combination present on both sides.
pub fn enumerate_meta_links(
    seeker: &AttrMap,
    job: &AttrMap,
    templates: &[LinkTemplate],
) -> Vec<MetaLink> {
    let mut out = Vec::new();
    for t in templates {
        let (Some(svals), Some(jvals)) = (seeker.get(&t.seeker_attr), job.get(&t.job_attr)) else {
            continue;
        };
        for sv in svals {
            for jv in jvals {
                out.push(MetaLink {
                    seeker_attr: t.seeker_attr.clone(),
                    seeker_value: sv.clone(),
                    job_attr: t.job_attr.clone(),
                    job_value: jv.clone(),
                });
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// All `2^k - 1` non-empty subsets of `metas` (after de-duplication).
pub fn enumerate_complex_links(metas: &[MetaLink], cap: usize) -> Result<Vec<LinkKey>, LinkError> {
    let mut metas = metas.to_vec();
    metas.sort();
    metas.dedup();
    let k = metas.len();
    if k > cap || k >= usize::BITS as usize {
        return Err(LinkError::TooManyMetaLinks { found: k, cap });
    }
    let mut out = Vec::with_capacity((1usize << k) - 1);
    for mask in 1usize..(1 << k) {
        let subset = (0..k)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| metas[i].clone())
            .collect();
        // subsets of a sorted list are already canonical
        out.push(LinkKey(subset));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneConfig {
    pub min_support: u32,
    pub max_meta_links: usize,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            min_support: 3,
            max_meta_links: DEFAULT_MAX_META_LINKS,
        }
    }
}

/// Tallies candidate links over the hire pairs, counts the no-hire pairs they
/// fire on, and drops candidates with `support < min_support` or
/// `neg_count > support`. Output is sorted by key.
pub fn aggregate_and_prune(
    data: &[TrainingPair],
    templates: &[LinkTemplate],
    config: PruneConfig,
) -> Result<Vec<ComplexLink>, LinkError> {
    if data.is_empty() {
        return Err(LinkError::NoData);
    }
    let mut tallies: HashMap<LinkKey, (u32, u32)> = HashMap::new();
    for pair in data.iter().filter(|p| p.hire) {
        let metas = enumerate_meta_links(&pair.seeker, &pair.job, templates);
        for key in enumerate_complex_links(&metas, config.max_meta_links)? {
            tallies.entry(key).or_default().0 += 1;
        }
    }
    for pair in data.iter().filter(|p| !p.hire) {
        let metas = enumerate_meta_links(&pair.seeker, &pair.job, templates);
        for key in enumerate_complex_links(&metas, config.max_meta_links)? {
            if let Some(t) = tallies.get_mut(&key) {
                t.1 += 1;
            }
        }
    }
    let mut out: Vec<ComplexLink> = tallies
        .into_iter()
        .filter(|(_, (support, neg))| *support >= config.min_support && neg <= support)
        .map(|(key, (support, neg_count))| ComplexLink {
            key,
            support,
            neg_count,
            quality: 0.0,
        })
        .collect();
    out.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(out)
}

/// Quality as the smoothed hire/no-hire ratio `support / (neg_count + 1)`.
pub fn score_links_ratio(links: &mut [ComplexLink]) {
    for l in links {
        l.quality = f64::from(l.support) / (f64::from(l.neg_count) + 1.0);
    }
}

/// Binary design matrix: one column per link, one row per pair; a cell is 1
/// when the link fires on the pair.
pub fn link_design(
    links: &[ComplexLink],
    data: &[TrainingPair],
    templates: &[LinkTemplate],
    max_meta_links: usize,
) -> Result<(SparseDesign, Vec<f64>), LinkError> {
    let column: HashMap<&LinkKey, usize> =
        links.iter().enumerate().map(|(i, l)| (&l.key, i)).collect();
    let mut rows_of = vec![Vec::new(); links.len()];
    let mut labels = Vec::with_capacity(data.len());
    for (row, pair) in data.iter().enumerate() {
        let metas = enumerate_meta_links(&pair.seeker, &pair.job, templates);
        for key in enumerate_complex_links(&metas, max_meta_links)? {
            if let Some(&c) = column.get(&key) {
                rows_of[c].push(row);
            }
        }
        labels.push(if pair.hire { 1.0 } else { 0.0 });
    }
    Ok((SparseDesign::new(data.len(), rows_of), labels))
}

/// Quality as the weight of an L1-regularized logistic regression that
/// predicts hires from which links fire. Returns the fit for inspection.
pub fn score_links_l1(
    links: &mut [ComplexLink],
    data: &[TrainingPair],
    templates: &[LinkTemplate],
    lambda: f64,
    options: &L1Options,
    max_meta_links: usize,
) -> Result<L1Fit, LinkError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(LinkError::InvalidLambda(lambda));
    }
    let (design, labels) = link_design(links, data, templates, max_meta_links)?;
    let fit = fit_l1_logistic(&design, &labels, lambda, options, None);
    for (l, w) in links.iter_mut().zip(&fit.weights) {
        l.quality = *w;
    }
    Ok(fit)
}

/// Keeps links whose quality is strictly above `threshold`.
pub fn prune_by_quality(links: Vec<ComplexLink>, threshold: f64) -> Vec<ComplexLink> {
    links.into_iter().filter(|l| l.quality > threshold).collect()
}

/// Jobs known to the learner, used to measure liquidity.
#[derive(Debug, Clone, Default)]
pub struct JobCatalog {
    jobs: BTreeMap<String, AttrMap>,
}

impl JobCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, job_id: impl Into<String>, attrs: AttrMap) {
        self.jobs.insert(job_id.into(), attrs);
    }

    pub fn from_pairs(data: &[TrainingPair]) -> Self {
        let mut c = Self::new();
        for p in data {
            c.jobs.entry(p.job_id.clone()).or_insert_with(|| p.job.clone());
        }
        c
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.jobs.keys().map(String::as_str)
    }

    /// Ids of the jobs belonging to a job segment.
    pub fn members(&self, segment: &Segment) -> BTreeSet<String> {
        self.jobs
            .iter()
            .filter(|(_, attrs)| segment.contains(attrs))
            .map(|(id, _)| id.clone())
            .collect()
    }
}

/// Seekers known to the learner.
pub fn seekers_from_pairs(data: &[TrainingPair]) -> BTreeMap<String, AttrMap> {
    let mut out = BTreeMap::new();
    for p in data {
        out.entry(p.seeker_id.clone()).or_insert_with(|| p.seeker.clone());
    }
    out
}

/// A seeker-segment mapping candidate with its averaged link quality.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMapping {
    pub segment: Segment,
    pub score: f64,
    pub links: Vec<LinkKey>,
}

/// Result of liquidity pruning for one seeker.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeekerSelection {
    pub mappings: Vec<SegmentMapping>,
    pub reachable_jobs: BTreeSet<String>,
}

impl SeekerSelection {
    pub fn links(&self) -> impl Iterator<Item = &LinkKey> {
        self.mappings.iter().flat_map(|m| m.links.iter())
    }
}

/// Memoizes job-segment membership across seekers.
#[derive(Debug, Default)]
pub struct SegmentJobs {
    cache: HashMap<Segment, BTreeSet<String>>,
}

impl SegmentJobs {
    pub fn get(&mut self, jobs: &JobCatalog, segment: &Segment) -> &BTreeSet<String> {
        self.cache
            .entry(segment.clone())
            .or_insert_with(|| jobs.members(segment))
    }
}

/// Liquidity pruning for one seeker.
///
/// Links compatible with the seeker are grouped by seeker segment; each group
/// (mapping) is scored by the mean quality of its links. Mappings are added
/// best first (ties by segment order) while the number of distinct reachable
/// jobs is below `theta`.
pub fn select_links_for_seeker(
    seeker: &AttrMap,
    links: &[ComplexLink],
    theta: usize,
    jobs: &JobCatalog,
    segment_jobs: &mut SegmentJobs,
) -> SeekerSelection {
    let mut groups: BTreeMap<Segment, Vec<&ComplexLink>> = BTreeMap::new();
    for l in links {
        let seg = l.key.seeker_segment();
        if seg.contains(seeker) {
            groups.entry(seg).or_default().push(l);
        }
    }
    let mut candidates: Vec<SegmentMapping> = groups
        .into_iter()
        .map(|(segment, ls)| SegmentMapping {
            segment,
            score: ls.iter().map(|l| l.quality).sum::<f64>() / ls.len() as f64,
            links: ls.iter().map(|l| l.key.clone()).collect(),
        })
        .collect();
    // stable sort keeps segment order among equal scores
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut selection = SeekerSelection::default();
    let mut queue = candidates.into_iter();
    while selection.reachable_jobs.len() < theta {
        let Some(mapping) = queue.next() else { break };
        for key in &mapping.links {
            let members = segment_jobs.get(jobs, &key.job_segment());
            selection.reachable_jobs.extend(members.iter().cloned());
        }
        selection.mappings.push(mapping);
    }
    selection
}

/// How candidate links are scored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Scoring {
    Ratio,
    L1 { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub prune: PruneConfig,
    pub scoring: Scoring,
    /// Links with quality at or below this are dropped.
    pub quality_threshold: f64,
    pub l1: L1Options,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            prune: PruneConfig::default(),
            scoring: Scoring::L1 { lambda: 1e-3 },
            quality_threshold: 0.0,
            l1: L1Options::default(),
        }
    }
}

/// Output of the offline part of link learning (before per-seeker pruning).
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedLinks {
    /// Every candidate that passed support pruning, with its quality.
    pub scored: Vec<ComplexLink>,
    /// The candidates above the quality threshold.
    pub kept: Vec<ComplexLink>,
}

pub fn learn_links(
    data: &[TrainingPair],
    templates: &[LinkTemplate],
    config: &LearnerConfig,
) -> Result<LearnedLinks, LinkError> {
    validate_templates(templates)?;
    let mut scored = aggregate_and_prune(data, templates, config.prune)?;
    match config.scoring {
        Scoring::Ratio => score_links_ratio(&mut scored),
        Scoring::L1 { lambda } => {
            score_links_l1(
                &mut scored,
                data,
                templates,
                lambda,
                &config.l1,
                config.prune.max_meta_links,
            )?;
        }
    }
    let kept = prune_by_quality(scored.clone(), config.quality_threshold);
    Ok(LearnedLinks { scored, kept })
}

/// Runs liquidity pruning for every seeker and assembles the 4-layer graph:
/// seekers -> seeker segments -> job segments -> jobs.
pub fn build_link_graph(
    links: &[ComplexLink],
    seekers: &BTreeMap<String, AttrMap>,
    jobs: &JobCatalog,
    theta: usize,
) -> LinkGraph {
    let mut graph = LinkGraph::new();
    let mut seeker_seg_ids: BTreeMap<Segment, usize> = BTreeMap::new();
    let mut job_seg_ids: BTreeMap<Segment, usize> = BTreeMap::new();
    let mut segment_jobs = SegmentJobs::default();
    for (seeker_id, attrs) in seekers {
        let selection = select_links_for_seeker(attrs, links, theta, jobs, &mut segment_jobs);
        graph.add_seeker(seeker_id);
        for mapping in &selection.mappings {
            let next = seeker_seg_ids.len();
            let p = *seeker_seg_ids.entry(mapping.segment.clone()).or_insert(next);
            graph.map_seeker(seeker_id, p);
            for key in &mapping.links {
                let job_seg = key.job_segment();
                let next = job_seg_ids.len();
                let q = match job_seg_ids.get(&job_seg) {
                    Some(&q) => q,
                    None => {
                        job_seg_ids.insert(job_seg.clone(), next);
                        for job in segment_jobs.get(jobs, &job_seg) {
                            graph.add_job_member(next, job);
                        }
                        next
                    }
                };
                graph.add_link(p, q);
            }
        }
    }
    let mut seeker_labels: Vec<(usize, String)> =
        seeker_seg_ids.into_iter().map(|(s, i)| (i, s.to_string())).collect();
    seeker_labels.sort();
    let mut job_labels: Vec<(usize, String)> =
        job_seg_ids.into_iter().map(|(s, i)| (i, s.to_string())).collect();
    job_labels.sort();
    graph.set_labels(
        seeker_labels.into_iter().map(|(_, s)| s).collect(),
        job_labels.into_iter().map(|(_, s)| s).collect(),
    );
    graph
}

/// Recall and false-positive ratio of a link set on labeled pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkageReport {
    pub threshold: f64,
    pub num_links: usize,
    /// Share of hire pairs that are linked.
    pub recall: f64,
    /// Share of linked pairs that are no-hires.
    pub false_positive_ratio: f64,
    pub linked_pairs: usize,
}

/// Sweeps quality thresholds over scored links and measures linkage on
/// `eval` pairs. A pair is linked when any kept link fires on it.
pub fn threshold_sweep(
    scored: &[ComplexLink],
    eval: &[TrainingPair],
    templates: &[LinkTemplate],
    thresholds: &[f64],
    max_meta_links: usize,
) -> Result<Vec<LinkageReport>, LinkError> {
    // best quality of any link firing on each pair
    let quality: HashMap<&LinkKey, f64> = scored.iter().map(|l| (&l.key, l.quality)).collect();
    let mut best = Vec::with_capacity(eval.len());
    for p in eval {
        let metas = enumerate_meta_links(&p.seeker, &p.job, templates);
        let q = enumerate_complex_links(&metas, max_meta_links)?
            .iter()
            .filter_map(|k| quality.get(k).copied())
            .fold(f64::NEG_INFINITY, f64::max);
        best.push(q);
    }
    let hires = eval.iter().filter(|p| p.hire).count();
    Ok(thresholds
        .iter()
        .map(|&t| {
            let mut linked = 0;
            let mut linked_hires = 0;
            for (p, &q) in eval.iter().zip(&best) {
                if q > t {
                    linked += 1;
                    if p.hire {
                        linked_hires += 1;
                    }
                }
            }
            LinkageReport {
                threshold: t,
                num_links: scored.iter().filter(|l| l.quality > t).count(),
                recall: if hires == 0 { 0.0 } else { linked_hires as f64 / hires as f64 },
                false_positive_ratio: if linked == 0 {
                    0.0
                } else {
                    (linked - linked_hires) as f64 / linked as f64
                },
                linked_pairs: linked,
            }
        })
        .collect())
}

/// Line-delimited JSON training pairs: `{"seeker_id", "seeker", "job_id", "job", "label"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairRecord {
    pub seeker_id: String,
    pub seeker: AttrMap,
    pub job_id: String,
    pub job: AttrMap,
    pub label: u8,
}

impl From<&TrainingPair> for PairRecord {
    fn from(p: &TrainingPair) -> Self {
        Self {
            seeker_id: p.seeker_id.clone(),
            seeker: p.seeker.clone(),
            job_id: p.job_id.clone(),
            job: p.job.clone(),
            label: p.hire as u8,
        }
    }
}

pub fn parse_pairs(reader: impl std::io::BufRead) -> Result<Vec<TrainingPair>, LinkError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let err = |message: String| LinkError::Parse {
            line: i + 1,
            message,
        };
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: PairRecord = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        if r.label > 1 {
            return Err(err(format!("label must be 0 or 1, got {}", r.label)));
        }
        out.push(TrainingPair {
            seeker_id: r.seeker_id,
            seeker: r.seeker,
            job_id: r.job_id,
            job: r.job,
            hire: r.label == 1,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn attrs(kv: &[(&str, &str)]) -> AttrMap {
        let mut m = AttrMap::new();
        for (k, v) in kv {
            m.entry(k.to_string()).or_default().push(v.to_string());
        }
        m
    }

    fn templates() -> Vec<LinkTemplate> {
        vec![
            LinkTemplate::new("title", "title"),
            LinkTemplate::new("seniority", "seniority"),
        ]
    }

    fn pair(seeker: &[(&str, &str)], job: &[(&str, &str)], hire: bool) -> TrainingPair {
        TrainingPair {
            seeker_id: "s".into(),
            seeker: attrs(seeker),
            job_id: "j".into(),
            job: attrs(job),
            hire,
        }
    }

    fn meta(sa: &str, sv: &str, ja: &str, jv: &str) -> MetaLink {
        MetaLink {
            seeker_attr: sa.into(),
            seeker_value: sv.into(),
            job_attr: ja.into(),
            job_value: jv.into(),
        }
    }

    #[test]
    fn meta_links_for_both_templates() {
        let s = attrs(&[("title", "ML Engineer"), ("seniority", "Intern")]);
        let j = attrs(&[("title", "NLP Engineer"), ("seniority", "Entry")]);
        let metas = enumerate_meta_links(&s, &j, &templates());
        assert_eq!(metas.len(), 2);
        assert!(metas.contains(&meta("title", "ML Engineer", "title", "NLP Engineer")));
        assert!(metas.contains(&meta("seniority", "Intern", "seniority", "Entry")));
    }

    #[test]
    fn missing_attribute_skips_template() {
        let s = attrs(&[("title", "ML Engineer"), ("seniority", "Intern")]);
        let j = attrs(&[("seniority", "Entry")]);
        assert_eq!(
            enumerate_meta_links(&s, &j, &templates()),
            vec![meta("seniority", "Intern", "seniority", "Entry")]
        );
    }

    #[test]
    fn multi_valued_cross_product() {
        let s = attrs(&[("title", "A"), ("title", "B")]);
        let j = attrs(&[("title", "X")]);
        let metas = enumerate_meta_links(&s, &j, &templates()[..1]);
        assert_eq!(
            metas,
            vec![meta("title", "A", "title", "X"), meta("title", "B", "title", "X")]
        );
    }

    #[test]
    fn subset_counts() {
        let metas: Vec<MetaLink> = (0..4).map(|i| meta("a", &i.to_string(), "b", "x")).collect();
        assert_eq!(enumerate_complex_links(&metas[..2], 20).unwrap().len(), 3);
        assert!(enumerate_complex_links(&[], 20).unwrap().is_empty());

        // brute-force oracle: every non-empty subset exactly once
        let got: BTreeSet<LinkKey> = enumerate_complex_links(&metas, 20).unwrap().into_iter().collect();
        let mut want = BTreeSet::new();
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for d in 0..2 {
                        let picks: Vec<MetaLink> = [a, b, c, d]
                            .iter()
                            .zip(&metas)
                            .filter(|(f, _)| **f == 1)
                            .map(|(_, m)| m.clone())
                            .collect();
                        if !picks.is_empty() {
                            want.insert(LinkKey::new(picks));
                        }
                    }
                }
            }
        }
        assert_eq!(got.len(), 15);
        assert_eq!(got, want);
    }

    #[test]
    fn subset_cap_enforced() {
        let metas: Vec<MetaLink> = (0..5).map(|i| meta("a", &i.to_string(), "b", "x")).collect();
        assert_eq!(
            enumerate_complex_links(&metas, 4),
            Err(LinkError::TooManyMetaLinks { found: 5, cap: 4 })
        );
    }

    #[test]
    fn support_and_negative_pruning() {
        let t = &templates()[..1];
        let mut data = Vec::new();
        // A->X: 2 hires (too rare)
        for _ in 0..2 {
            data.push(pair(&[("title", "A")], &[("title", "X")], true));
        }
        // B->Y: 5 hires, 7 no-hires
        for _ in 0..5 {
            data.push(pair(&[("title", "B")], &[("title", "Y")], true));
        }
        for _ in 0..7 {
            data.push(pair(&[("title", "B")], &[("title", "Y")], false));
        }
        // C->Z: 4 hires, 4 no-hires (kept: ties are not "more")
        for _ in 0..4 {
            data.push(pair(&[("title", "C")], &[("title", "Z")], true));
            data.push(pair(&[("title", "C")], &[("title", "Z")], false));
        }
        let links = aggregate_and_prune(&data, t, PruneConfig::default()).unwrap();
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].key.metas(), &[meta("title", "C", "title", "Z")]);
        assert_eq!((links[0].support, links[0].neg_count), (4, 4));
    }

    #[test]
    fn ratio_scores() {
        let key = LinkKey::new(vec![meta("a", "1", "b", "2")]);
        let mut links = vec![
            ComplexLink {
                key: key.clone(),
                support: 10,
                neg_count: 0,
                quality: 0.0,
            },
            ComplexLink {
                key,
                support: 3,
                neg_count: 3,
                quality: 0.0,
            },
        ];
        score_links_ratio(&mut links);
        assert_eq!(links[0].quality, 10.0);
        assert_eq!(links[1].quality, 0.75);
    }

    #[test]
    fn negative_lambda_rejected() {
        let data = vec![pair(&[("title", "A")], &[("title", "X")], true)];
        let err = score_links_l1(&mut [], &data, &templates(), -1.0, &L1Options::default(), 20);
        assert_eq!(err.unwrap_err(), LinkError::InvalidLambda(-1.0));
    }

    fn link(seeker_title: &str, job_title: &str, quality: f64) -> ComplexLink {
        ComplexLink {
            key: LinkKey::new(vec![meta("title", seeker_title, "title", job_title)]),
            support: 10,
            neg_count: 0,
            quality,
        }
    }

    fn liquidity_setup() -> (AttrMap, Vec<ComplexLink>, JobCatalog) {
        let seeker = attrs(&[("title", "P1"), ("title", "P2")]);
        let links = vec![link("P1", "Q1", 0.9), link("P2", "Q2", 0.5), link("P3", "Q1", 2.0)];
        let mut jobs = JobCatalog::new();
        for i in 0..5 {
            jobs.insert(format!("q1-{i}"), attrs(&[("title", "Q1")]));
            jobs.insert(format!("q2-{i}"), attrs(&[("title", "Q2")]));
        }
        (seeker, links, jobs)
    }

    #[test]
    fn liquidity_adds_mappings_until_theta() {
        let (seeker, links, jobs) = liquidity_setup();
        let sel = select_links_for_seeker(&seeker, &links, 8, &jobs, &mut SegmentJobs::default());
        assert_eq!(sel.mappings.len(), 2);
        assert_eq!(sel.reachable_jobs.len(), 10);

        let sel = select_links_for_seeker(&seeker, &links, 3, &jobs, &mut SegmentJobs::default());
        assert_eq!(sel.mappings.len(), 1);
        assert_eq!(sel.mappings[0].score, 0.9);
        assert_eq!(sel.reachable_jobs.len(), 5);
    }

    #[test]
    fn incompatible_seeker_gets_nothing() {
        let (_, links, jobs) = liquidity_setup();
        let sel = select_links_for_seeker(
            &attrs(&[("title", "other")]),
            &links,
            100,
            &jobs,
            &mut SegmentJobs::default(),
        );
        assert!(sel.mappings.is_empty());
        assert!(sel.reachable_jobs.is_empty());
    }

    #[test]
    fn mapping_score_is_mean_quality() {
        let seeker = attrs(&[("title", "P1")]);
        let links = vec![link("P1", "Q1", 1.0), link("P1", "Q2", 0.5)];
        let sel = select_links_for_seeker(&seeker, &links, 1, &JobCatalog::new(), &mut SegmentJobs::default());
        assert_eq!(sel.mappings.len(), 1);
        assert_eq!(sel.mappings[0].score, 0.75);
    }

    #[test]
    fn parses_pair_records() {
        let text = r#"{"seeker_id":"s1","seeker":{"title":["A"]},"job_id":"j1","job":{"title":["X"]},"label":1}
{"seeker_id":"s2","seeker":{},"job_id":"j2","job":{},"label":2}"#;
        assert!(matches!(parse_pairs(text.as_bytes()), Err(LinkError::Parse { line: 2, .. })));
        let pairs = parse_pairs(text.lines().next().unwrap().as_bytes()).unwrap();
        assert!(pairs[0].hire);
    }
}
