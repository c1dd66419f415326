//! Hash-embedding towers.
//!
//! Each tower maps a bag of string features to a unit vector:
//! features are hashed into `hash_buckets` rows of an embedding table, the
//! looked-up rows are averaged, passed through `tanh(W e + b)` and
//! L2-normalized. All parameters of both towers live in one flat vector so
//! optimizers and gradient checks can treat the model as a point in `R^n`.

use std::hash::Hasher;
use std::ops::Range;

use fnv::FnvHasher;
use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::TwoTowerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hash_buckets: usize,
    pub embed_dim: usize,
    pub out_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hash_buckets: 4096,
            embed_dim: 32,
            out_dim: 32,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), TwoTowerError> {
        if self.hash_buckets == 0 || self.embed_dim == 0 || self.out_dim == 0 {
            return Err(TwoTowerError::Config("model sizes must be positive".into()));
        }
        Ok(())
    }

    fn tower_len(&self) -> usize {
        self.hash_buckets * self.embed_dim + self.out_dim * self.embed_dim + self.out_dim
    }

    pub fn num_params(&self) -> usize {
        2 * self.tower_len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tower {
    Seeker,
    Job,
}

/// Parameter ranges of one tower inside the flat vector.
#[derive(Debug, Clone)]
pub(crate) struct TowerLayout {
    pub(crate) table: Range<usize>,
    pub(crate) weight: Range<usize>,
    pub(crate) bias: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerModel {
    pub config: ModelConfig,
    /// When set, both towers hash features identically.
    pub shared_hashing: bool,
    pub params: Vec<f64>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct TowerCache {
    tower: Tower,
    buckets: Vec<Vec<usize>>,
    mean: Array2<f64>,
    hidden: Array2<f64>,
    norms: Vec<f64>,
    /// Unit-length outputs, one row per input.
    pub output: Array2<f64>,
}

impl TowerModel {
    /// Random initialization: table entries `N(0, 1)`, weights
    /// `N(0, 1/embed_dim)`, zero biases.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, TwoTowerError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = Normal::new(0.0, 1.0).expect("valid normal");
        let mut params = vec![0.0; config.num_params()];
        let model = Self {
            config,
            shared_hashing: false,
            params: Vec::new(),
        };
        let w_scale = 1.0 / (config.embed_dim as f64).sqrt();
        for tower in [Tower::Seeker, Tower::Job] {
            let l = model.layout(tower);
            for p in &mut params[l.table] {
                *p = unit.sample(&mut rng);
            }
            for p in &mut params[l.weight] {
                *p = unit.sample(&mut rng) * w_scale;
            }
        }
        Ok(Self { params, ..model })
    }

    /// Both towers share initial parameters and hashing, so identical
    /// feature bags map to identical outputs.
    pub fn tied(config: ModelConfig, seed: u64) -> Result<Self, TwoTowerError> {
        let mut m = Self::new(config, seed)?;
        let half = config.tower_len();
        let (seeker, job) = m.params.split_at_mut(half);
        job.copy_from_slice(seeker);
        m.shared_hashing = true;
        Ok(m)
    }

    pub fn from_params(config: ModelConfig, params: Vec<f64>) -> Result<Self, TwoTowerError> {
        config.validate()?;
        if params.len() != config.num_params() {
            return Err(TwoTowerError::Config(format!(
                "expected {} parameters, got {}",
                config.num_params(),
                params.len()
            )));
        }
        Ok(Self {
            config,
            shared_hashing: false,
            params,
        })
    }

    pub(crate) fn layout(&self, tower: Tower) -> TowerLayout {
        let c = &self.config;
        let base = match tower {
            Tower::Seeker => 0,
            Tower::Job => c.tower_len(),
        };
        let t = c.hash_buckets * c.embed_dim;
        let w = c.out_dim * c.embed_dim;
        TowerLayout {
            table: base..base + t,
            weight: base + t..base + t + w,
            bias: base + t + w..base + t + w + c.out_dim,
        }
    }

    pub fn bucket(&self, tower: Tower, feature: &str) -> usize {
        let salt: u8 = match (tower, self.shared_hashing) {
            (Tower::Job, false) => 1,
            _ => 0,
        };
        let mut h = FnvHasher::default();
        h.write_u8(salt);
        h.write(feature.as_bytes());
        (h.finish() % self.config.hash_buckets as u64) as usize
    }

    pub fn forward<S: AsRef<str>>(&self, tower: Tower, inputs: &[&[S]]) -> TowerCache {
        let c = &self.config;
        let l = self.layout(tower);
        let table = &self.params[l.table];
        let n = inputs.len();

        let buckets: Vec<Vec<usize>> = inputs
            .iter()
            .map(|feats| feats.iter().map(|f| self.bucket(tower, f.as_ref())).collect())
            .collect();
        let mut mean = Array2::<f64>::zeros((n, c.embed_dim));
        for (i, bs) in buckets.iter().enumerate() {
            if bs.is_empty() {
                continue;
            }
            let inv = 1.0 / bs.len() as f64;
            let mut row = mean.row_mut(i);
            for &b in bs {
                let src = &table[b * c.embed_dim..(b + 1) * c.embed_dim];
                for (dst, s) in row.iter_mut().zip(src) {
                    *dst += s * inv;
                }
            }
        }

        let weight = ArrayView2::from_shape((c.out_dim, c.embed_dim), &self.params[l.weight])
            .expect("weight shape");
        let bias = &self.params[l.bias];
        let mut hidden = mean.dot(&weight.t());
        for mut row in hidden.rows_mut() {
            for (h, b) in row.iter_mut().zip(bias) {
                *h = (*h + b).tanh();
            }
        }

        let mut output = hidden.clone();
        let mut norms = Vec::with_capacity(n);
        for mut row in output.rows_mut() {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|x| x / norm);
            }
            norms.push(norm);
        }
        TowerCache {
            tower,
            buckets,
            mean,
            hidden,
            norms,
            output,
        }
    }

    /// Accumulates the parameter gradient for upstream gradient `d_output`
    /// (one row per input of `cache`) into `grad`.
    pub fn backward(&self, cache: &TowerCache, d_output: ArrayView2<f64>, grad: &mut [f64]) {
        let c = &self.config;
        let l = self.layout(cache.tower);

        // y = u / |u|  =>  du = (dy - y (y . dy)) / |u|
        let mut d_pre = d_output.to_owned();
        for (i, mut row) in d_pre.rows_mut().into_iter().enumerate() {
            let norm = cache.norms[i];
            if norm == 0.0 {
                row.fill(0.0);
                continue;
            }
            let y = cache.output.row(i);
            let proj: f64 = y.iter().zip(row.iter()).map(|(a, b)| a * b).sum();
            let u = cache.hidden.row(i);
            for ((d, yv), uv) in row.iter_mut().zip(y.iter()).zip(u.iter()) {
                // tanh' = 1 - tanh^2, u holds the tanh output
                *d = (*d - yv * proj) / norm * (1.0 - uv * uv);
            }
        }

        let d_weight = d_pre.t().dot(&cache.mean);
        for (g, d) in grad[l.weight.clone()].iter_mut().zip(d_weight.iter()) {
            *g += d;
        }
        let d_bias = d_pre.sum_axis(Axis(0));
        for (g, d) in grad[l.bias].iter_mut().zip(d_bias.iter()) {
            *g += d;
        }

        let weight = ArrayView2::from_shape((c.out_dim, c.embed_dim), &self.params[l.weight])
            .expect("weight shape");
        let d_mean = d_pre.dot(&weight);
        let table_grad = &mut grad[l.table];
        for (i, bs) in cache.buckets.iter().enumerate() {
            if bs.is_empty() {
                continue;
            }
            let inv = 1.0 / bs.len() as f64;
            let row = d_mean.row(i);
            for &b in bs {
                let dst = &mut table_grad[b * c.embed_dim..(b + 1) * c.embed_dim];
                for (g, d) in dst.iter_mut().zip(row.iter()) {
                    *g += d * inv;
                }
            }
        }
    }

    /// Unit-length tower output for one feature bag.
    pub fn encode<S: AsRef<str>>(&self, tower: Tower, features: &[S]) -> Vec<f64> {
        self.forward(tower, &[features]).output.row(0).to_vec()
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), TwoTowerError> {
        let json = serde_json::to_vec(self).map_err(|e| TwoTowerError::Io(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| TwoTowerError::Io(e.to_string()))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, TwoTowerError> {
        let bytes = std::fs::read(path).map_err(|e| TwoTowerError::Io(e.to_string()))?;
        let model: Self =
            serde_json::from_slice(&bytes).map_err(|e| TwoTowerError::Io(e.to_string()))?;
        if model.params.len() != model.config.num_params() {
            return Err(TwoTowerError::Config("parameter count does not match config".into()));
        }
        Ok(model)
    }
}
