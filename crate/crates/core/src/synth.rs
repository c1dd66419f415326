//! Synthetic data generators for tests, benchmarks and demos.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{CorpusError, DocumentInput, FrozenIndex, IndexBuilder, IndexSchema};
use crate::link_learner::{AttrMap, LinkKey, LinkTemplate, MetaLink, TrainingPair};
use crate::pipeline::HybridQuery;
use crate::quantizer::QuantCodec;
use crate::term_match::CnfQuery;
use crate::two_tower::{InventoryJob, PairExample};

/// Standard normal vector.
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Uniformly random unit vector.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v = gaussian(rng, dim);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// A random pair of unit vectors at angle `theta` with uniformly random
/// orientation.
pub fn unit_pair_at_angle<R: Rng + ?Sized>(rng: &mut R, dim: usize, theta: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(dim >= 2, "need two dimensions");
    let a = random_unit(rng, dim);
    let b = loop {
        let g = gaussian(rng, dim);
        let proj: f64 = g.iter().zip(&a).map(|(x, y)| x * y).sum();
        let r: Vec<f64> = g.iter().zip(&a).map(|(x, y)| x - proj * y).collect();
        let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            break r.into_iter().map(|x| x / n).collect::<Vec<_>>();
        }
    };
    let (c, s) = (theta.cos(), theta.sin());
    let v = a.iter().zip(&b).map(|(x, y)| c * x + s * y).collect();
    (a, v)
}

/// Parameters of a random hybrid corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub num_docs: usize,
    pub dim: usize,
    /// Vocabulary size per clause; ids are drawn from `1..=vocab`.
    pub clause_vocab: Vec<u32>,
    /// Each document gets `0..=max_per_clause` ids per clause.
    pub max_per_clause: usize,
    /// Number of embedding clusters; 0 draws isotropic gaussians.
    pub clusters: usize,
    /// Standard deviation of the per-coordinate noise around a centroid.
    pub cluster_noise: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            num_docs: 10_000,
            dim: 64,
            clause_vocab: vec![20, 50],
            max_per_clause: 3,
            clusters: 0,
            cluster_noise: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub spec: CorpusSpec,
    pub schema: IndexSchema,
    pub docs: Vec<DocumentInput>,
    pub centroids: Vec<Vec<f64>>,
}

impl SyntheticCorpus {
    pub fn generate(spec: CorpusSpec) -> Result<Self, CorpusError> {
        let names = (0..spec.clause_vocab.len()).map(|i| format!("c{i}")).collect();
        let schema = IndexSchema::new(names, spec.clause_vocab.len() * spec.max_per_clause, spec.dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let centroids: Vec<Vec<f64>> = (0..spec.clusters).map(|_| random_unit(&mut rng, spec.dim)).collect();
        let mut docs = Vec::with_capacity(spec.num_docs);
        for i in 0..spec.num_docs {
            let clauses = spec
                .clause_vocab
                .iter()
                .map(|&v| {
                    let n = rng.random_range(0..=spec.max_per_clause);
                    (0..n).map(|_| rng.random_range(1..=v)).collect()
                })
                .collect();
            let embedding = sample_embedding(&mut rng, &centroids, spec.dim, spec.cluster_noise);
            docs.push(DocumentInput {
                doc_id: format!("doc{i}"),
                clauses,
                embedding,
            });
        }
        Ok(Self {
            spec,
            schema,
            docs,
            centroids,
        })
    }

    pub fn build_index(&self, num_bits: usize, seed: u64) -> Result<FrozenIndex, CorpusError> {
        let mut b = IndexBuilder::new(self.schema.clone());
        for d in &self.docs {
            b.add_document(d.clone())?;
        }
        b.freeze(QuantCodec::new(self.spec.dim, num_bits, seed)?)
    }

    /// Embedding drawn like a document's.
    pub fn query_embedding<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        sample_embedding(rng, &self.centroids, self.spec.dim, self.spec.cluster_noise)
    }

    /// Random term constraints: each clause is included with probability
    /// `clause_prob` and lists 1 to 3 ids.
    pub fn random_terms<R: Rng + ?Sized>(&self, rng: &mut R, clause_prob: f64) -> CnfQuery {
        let mut raw: Vec<(usize, Vec<u32>)> = Vec::new();
        for (slot, &v) in self.spec.clause_vocab.iter().enumerate() {
            if rng.random_bool(clause_prob) {
                let n = rng.random_range(1..=3);
                raw.push((slot, (0..n).map(|_| rng.random_range(1..=v)).collect()));
            }
        }
        CnfQuery::normalize(self.schema.num_clauses(), raw).expect("generated clauses are valid")
    }

    pub fn random_query<R: Rng + ?Sized>(&self, rng: &mut R, k: usize, clause_prob: f64) -> HybridQuery {
        let terms = self.random_terms(rng, clause_prob);
        HybridQuery::new(terms, Some(self.query_embedding(rng)), k)
    }
}

fn sample_embedding<R: Rng + ?Sized>(rng: &mut R, centroids: &[Vec<f64>], dim: usize, noise: f64) -> Vec<f64> {
    match centroids.choose(rng) {
        None => gaussian(rng, dim),
        Some(c) => c
            .iter()
            .map(|x| {
                let z: f64 = StandardNormal.sample(rng);
                x + noise * z
            })
            .collect(),
    }
}

/// Single-clause corpus for pass-rate benchmarks: clause `bucket` holds one
/// id drawn uniformly from `1..=100`.
pub fn pass_rate_corpus(num_docs: usize, dim: usize, seed: u64) -> Result<FrozenIndex, CorpusError> {
    let schema = IndexSchema::new(vec!["bucket".into()], 1, dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = IndexBuilder::new(schema);
    for i in 0..num_docs {
        b.add_document(DocumentInput {
            doc_id: format!("doc{i}"),
            clauses: vec![vec![rng.random_range(1..=100)]],
            embedding: gaussian(&mut rng, dim),
        })?;
    }
    b.freeze(QuantCodec::new(dim, crate::quantizer::DEFAULT_NUM_BITS, seed)?)
}

/// Terms passing about `rate` of a [`pass_rate_corpus`].
pub fn pass_rate_terms(rate: f64) -> CnfQuery {
    let n = ((rate * 100.0).round() as u32).clamp(1, 100);
    CnfQuery::normalize(1, [(0, (1..=n).collect())]).expect("valid bucket clause")
}

/// Parameters of a link-learning corpus with known ground-truth links.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    pub num_links: usize,
    /// Hire pairs generated from each planted link.
    pub hires_per_link: usize,
    /// No-hire pairs per planted link that satisfy only part of the link.
    pub partial_decoys: usize,
    /// Unrelated no-hire pairs.
    pub noise_no_hires: usize,
    /// Unrelated hire pairs.
    pub noise_hires: usize,
    /// Size of the vocabulary random attribute values are drawn from.
    pub vocab: usize,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            num_links: 10,
            hires_per_link: 15,
            partial_decoys: 20,
            noise_no_hires: 1000,
            noise_hires: 100,
            vocab: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub templates: Vec<LinkTemplate>,
    pub planted: Vec<LinkKey>,
    pub pairs: Vec<TrainingPair>,
}

fn push(m: &mut AttrMap, k: &str, v: String) {
    m.entry(k.to_string()).or_default().push(v);
}

impl PlantedCorpus {
    /// Every planted link joins a title meta link and a skill meta link.
    /// Each of the other attributes gets a random value.
    pub fn generate(spec: &PlantedSpec) -> Self {
        let templates = vec![
            LinkTemplate::new("title", "title"),
            LinkTemplate::new("skill", "skill"),
            LinkTemplate::new("seniority", "seniority"),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let planted: Vec<LinkKey> = (0..spec.num_links)
            .map(|i| {
                LinkKey::new(vec![
                    MetaLink {
                        seeker_attr: "title".into(),
                        seeker_value: format!("T{i}"),
                        job_attr: "title".into(),
                        job_value: format!("JT{i}"),
                    },
                    MetaLink {
                        seeker_attr: "skill".into(),
                        seeker_value: format!("S{i}"),
                        job_attr: "skill".into(),
                        job_value: format!("JS{i}"),
                    },
                ])
            })
            .collect();

        let mut counter = 0usize;
        let mut pairs = Vec::new();
        let mut make = |rng: &mut ChaCha8Rng, seeker: [Option<String>; 2], job: [Option<String>; 2], hire: bool| {
            let v = |rng: &mut ChaCha8Rng, p: &str| format!("{p}{}", rng.random_range(0..spec.vocab));
            let mut s = AttrMap::new();
            let mut j = AttrMap::new();
            let [st, ss] = seeker;
            let [jt, js] = job;
            let st = st.unwrap_or_else(|| v(rng, "t"));
            let ss = ss.unwrap_or_else(|| v(rng, "s"));
            let jt = jt.unwrap_or_else(|| v(rng, "jt"));
            let js = js.unwrap_or_else(|| v(rng, "js"));
            push(&mut s, "title", st);
            push(&mut s, "skill", ss);
            push(&mut s, "seniority", v(rng, "sn"));
            push(&mut j, "title", jt);
            push(&mut j, "skill", js);
            push(&mut j, "seniority", v(rng, "jn"));
            counter += 1;
            TrainingPair {
                seeker_id: format!("seeker{counter}"),
                seeker: s,
                job_id: format!("job{counter}"),
                job: j,
                hire,
            }
        };

        for i in 0..spec.num_links {
            let t = || Some(format!("T{i}"));
            let s = || Some(format!("S{i}"));
            let jt = || Some(format!("JT{i}"));
            let js = || Some(format!("JS{i}"));
            for _ in 0..spec.hires_per_link {
                pairs.push(make(&mut rng, [t(), s()], [jt(), js()], true));
            }
            for _ in 0..spec.partial_decoys {
                pairs.push(make(&mut rng, [t(), None], [jt(), None], false));
                pairs.push(make(&mut rng, [None, s()], [None, js()], false));
            }
        }
        for _ in 0..spec.noise_no_hires {
            pairs.push(make(&mut rng, [None, None], [None, None], false));
        }
        for _ in 0..spec.noise_hires {
            pairs.push(make(&mut rng, [None, None], [None, None], true));
        }
        Self {
            templates,
            planted,
            pairs,
        }
    }
}

/// Parameters of a clustered seeker/job pair corpus for the two-tower model.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredSpec {
    pub clusters: usize,
    pub subclusters: usize,
    pub train_pairs: usize,
    pub validation_pairs: usize,
    pub inventory: usize,
    /// Probability that a feature bag carries its sub-cluster token.
    pub subcluster_rate: f64,
    /// Random noise tokens per feature bag.
    pub noise_tokens: usize,
    pub noise_vocab: usize,
    pub seed: u64,
}

impl Default for ClusteredSpec {
    fn default() -> Self {
        Self {
            clusters: 32,
            subclusters: 8,
            train_pairs: 20_000,
            validation_pairs: 2_560,
            inventory: 5_000,
            subcluster_rate: 0.8,
            noise_tokens: 2,
            noise_vocab: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClusteredPairs {
    pub train: Vec<PairExample>,
    pub validation: Vec<PairExample>,
    pub inventory: Vec<InventoryJob>,
}

impl ClusteredPairs {
    /// Seekers and jobs of a pair share a latent `(cluster, sub-cluster)`;
    /// each side sees it through its own tokens.
    pub fn generate(spec: &ClusteredSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let bag = |rng: &mut ChaCha8Rng, side: &str, c: usize, s: usize| {
            let mut f = vec![format!("{side}c{c}")];
            if rng.random_bool(spec.subcluster_rate) {
                f.push(format!("{side}s{c}_{s}"));
            }
            for _ in 0..spec.noise_tokens {
                f.push(format!("{side}n{}", rng.random_range(0..spec.noise_vocab)));
            }
            f
        };
        let mut next = 0usize;
        let mut pair = |rng: &mut ChaCha8Rng| {
            let c = rng.random_range(0..spec.clusters);
            let s = rng.random_range(0..spec.subclusters);
            next += 1;
            PairExample {
                seeker: bag(rng, "s", c, s),
                job_id: format!("job{next}"),
                job: bag(rng, "j", c, s),
            }
        };
        let train = (0..spec.train_pairs).map(|_| pair(&mut rng)).collect();
        let validation = (0..spec.validation_pairs).map(|_| pair(&mut rng)).collect();
        let inventory = (0..spec.inventory)
            .map(|i| {
                let p = pair(&mut rng);
                InventoryJob {
                    job_id: format!("inv{i}"),
                    features: p.job,
                }
            })
            .collect();
        Self {
            train,
            validation,
            inventory,
        }
    }
}

/// Unrelated seekers and jobs: every token is random.
pub fn random_pairs(n: usize, tokens: usize, vocab: usize, seed: u64) -> Vec<PairExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| PairExample {
            seeker: (0..tokens).map(|_| format!("s{}", rng.random_range(0..vocab))).collect(),
            job_id: format!("job{i}"),
            job: (0..tokens).map(|_| format!("j{}", rng.random_range(0..vocab))).collect(),
        })
        .collect()
}

/// Groups pairs by seeker id, for inspection.
pub fn hires_by_seeker(pairs: &[TrainingPair]) -> BTreeMap<String, Vec<String>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for p in pairs.iter().filter(|p| p.hire) {
        out.entry(p.seeker_id.clone()).or_default().push(p.job_id.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for theta in [0.0, 0.5, std::f64::consts::FRAC_PI_2, std::f64::consts::PI] {
            let (a, b) = unit_pair_at_angle(&mut rng, 16, theta);
            let cos: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            assert!((cos - theta.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn corpus_is_deterministic() {
        let spec = CorpusSpec {
            num_docs: 50,
            ..CorpusSpec::default()
        };
        let a = SyntheticCorpus::generate(spec.clone()).unwrap();
        let b = SyntheticCorpus::generate(spec).unwrap();
        assert_eq!(a.docs, b.docs);
        assert_eq!(a.build_index(64, 1).unwrap(), b.build_index(64, 1).unwrap());
    }

    #[test]
    fn pass_rate_terms_cover_buckets() {
        let idx = pass_rate_corpus(5000, 4, 0).unwrap();
        let q = pass_rate_terms(0.33);
        let passed = crate::term_match::full_scan_tbr(&idx, &q, 0).len() as f64 / 5000.0;
        assert!((passed - 0.33).abs() < 0.03, "{passed}");
    }

    #[test]
    fn planted_corpus_shape() {
        let spec = PlantedSpec::default();
        let c = PlantedCorpus::generate(&spec);
        let hires = c.pairs.iter().filter(|p| p.hire).count();
        assert_eq!(hires, spec.num_links * spec.hires_per_link + spec.noise_hires);
        for key in &c.planted {
            let fired = c.pairs.iter().filter(|p| p.hire && key.fires(&p.seeker, &p.job)).count();
            assert!(fired >= spec.hires_per_link);
        }
    }
}
