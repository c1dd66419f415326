//! Two-stage training.
//!
//! Stage 1 trains on in-batch plus easy negatives. Stage 2 starts from the
//! stage-1 parameters `w*`, keeps only the `K` columns per row chosen by
//! [`hard_negative_filter`] under the current model, lowers the learning
//! rate, and adds the consolidation penalty `lambda_c * |w - w*|^2`.
//!
//! The penalty is applied as an exact proximal step after each gradient step
//! on the softmax loss, `w <- (w' + 2 a lambda_c w*) / (1 + 2 a lambda_c)`,
//! which stays stable for any `lambda_c` and pins `w` to `w*` as
//! `lambda_c` grows.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::{mix_easy_negatives, InventoryJob, PairExample, TrainingBatch};
use super::eval::mean_in_batch_recall;
use super::loss::{hard_negative_filter, softmax_loss, HardNegatives};
use super::model::{ModelConfig, Tower, TowerModel};
use super::TwoTowerError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    /// Positive pairs per batch (`m`).
    pub batch_size: usize,
    /// Easy negatives sampled per group of `easy_groups` batches (`n`).
    pub easy_negatives: usize,
    /// Number of batches the easy negatives are spread over (`p`).
    pub easy_groups: usize,
    /// Columns kept per row in stage 2 (`K`), positive included.
    pub hard_k: usize,
    pub learning_rate: f64,
    /// Stage-2 learning rate as a fraction of the stage-1 rate.
    pub stage2_lr_factor: f64,
    pub stage1_steps: usize,
    pub stage2_steps: usize,
    /// Consolidation strength `lambda_c`.
    pub consolidation: f64,
    /// Steps between validation evaluations (0 disables periodic ones).
    pub eval_every: usize,
    pub eval_k: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            batch_size: 256,
            easy_negatives: 512,
            easy_groups: 4,
            hard_k: 128,
            learning_rate: 1.0,
            stage2_lr_factor: 0.1,
            stage1_steps: 300,
            stage2_steps: 300,
            consolidation: 1e-3,
            eval_every: 50,
            eval_k: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Batch width `d = m + n/p`.
    pub fn width(&self) -> usize {
        self.batch_size + self.easy_negatives / self.easy_groups.max(1)
    }

    pub fn validate(&self) -> Result<(), TwoTowerError> {
        self.model.validate()?;
        let bad = |m: String| Err(TwoTowerError::Config(m));
        if self.batch_size < 2 {
            return bad("batch size must be at least 2".into());
        }
        if self.easy_groups == 0 || self.easy_negatives % self.easy_groups != 0 {
            return bad(format!(
                "easy negatives ({}) must be divisible by easy groups ({})",
                self.easy_negatives, self.easy_groups
            ));
        }
        if self.hard_k < 1 || self.hard_k >= self.width() {
            return bad(format!("K must be in 1..{}, got {}", self.width(), self.hard_k));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive".into());
        }
        if !(self.stage2_lr_factor > 0.0 && self.stage2_lr_factor.is_finite()) {
            return bad("stage-2 learning rate factor must be positive".into());
        }
        if !(self.consolidation >= 0.0) {
            return bad("consolidation strength must be non-negative".into());
        }
        if self.eval_k == 0 || self.eval_k > self.batch_size {
            return bad(format!("eval k must be in 1..={}", self.batch_size));
        }
        Ok(())
    }
}

/// Which columns the loss sees.
#[derive(Debug, Clone, Copy)]
pub enum Columns<'h> {
    /// Every column of the batch.
    All,
    /// A fixed hard-negative selection.
    Fixed(&'h HardNegatives),
    /// Hard negatives chosen under the current parameters.
    Hard(usize),
}

/// Consolidation anchor `(w*, lambda_c)`.
pub type Anchor<'a> = (&'a [f64], f64);

/// Loss value, its parameter gradient and the hard-negative selection used.
#[derive(Debug, Clone)]
pub struct Objective {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub selection: Option<HardNegatives>,
}

/// Softmax loss of a batch, optionally plus the consolidation penalty, and
/// its gradient by backpropagation through both towers.
pub fn batch_objective(
    model: &TowerModel,
    batch: &TrainingBatch<'_>,
    columns: Columns<'_>,
    anchor: Option<Anchor<'_>>,
) -> Result<Objective, TwoTowerError> {
    let s = model.forward(Tower::Seeker, &batch.seekers);
    let j = model.forward(Tower::Job, &batch.jobs);
    let z = s.output.dot(&j.output.t());
    let d = z.ncols();

    let (loss, dz, selection): (f64, Array2<f64>, Option<HardNegatives>) = match columns {
        Columns::All => {
            let (l, g) = softmax_loss(z.view(), &batch.positives)?;
            (l, g, None)
        }
        Columns::Fixed(h) => {
            let (l, g) = softmax_loss(h.gather(z.view()).view(), &h.positives())?;
            (l, h.scatter(g.view(), d), None)
        }
        Columns::Hard(k) => {
            let h = hard_negative_filter(z.view(), &batch.positives, k)?;
            let (l, g) = softmax_loss(h.z.view(), &h.positives())?;
            (l, h.scatter(g.view(), d), Some(h))
        }
    };

    let mut grad = vec![0.0; model.params.len()];
    let d_seeker = dz.dot(&j.output);
    let d_job = dz.t().dot(&s.output);
    model.backward(&s, d_seeker.view(), &mut grad);
    model.backward(&j, d_job.view(), &mut grad);

    let mut total = loss;
    if let Some((w0, lambda)) = anchor {
        for ((g, w), a) in grad.iter_mut().zip(&model.params).zip(w0) {
            let diff = w - a;
            total += lambda * diff * diff;
            *g += 2.0 * lambda * diff;
        }
    }
    Ok(Objective {
        loss: total,
        grad,
        selection,
    })
}

/// One line of the training metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub stage: u8,
    pub step: usize,
    pub loss: f64,
    pub learning_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_in_batch_recall: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Parameters at the end of stage 1.
    pub stage1: TowerModel,
    /// Parameters at the end of stage 2.
    pub model: TowerModel,
    pub history: Vec<MetricRecord>,
}

/// Cycles through shuffled training pairs, reshuffling each epoch.
struct BatchStream<'a> {
    pairs: &'a [PairExample],
    order: Vec<usize>,
    cursor: usize,
    scratch: Vec<PairExample>,
}

impl<'a> BatchStream<'a> {
    fn new(pairs: &'a [PairExample]) -> Self {
        Self {
            pairs,
            order: (0..pairs.len()).collect(),
            cursor: pairs.len(),
            scratch: Vec::new(),
        }
    }

    fn next(&mut self, m: usize, rng: &mut ChaCha8Rng) -> &[PairExample] {
        if self.cursor + m > self.order.len() {
            self.order.shuffle(rng);
            self.cursor = 0;
        }
        self.scratch.clear();
        self.scratch.extend(
            self.order[self.cursor..self.cursor + m]
                .iter()
                .map(|&i| self.pairs[i].clone()),
        );
        self.cursor += m;
        &self.scratch
    }
}

fn check_finite(
    loss: f64,
    model: &TowerModel,
    stage: u8,
    step: usize,
) -> Result<(), TwoTowerError> {
    if !loss.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
        return Err(TwoTowerError::Diverged {
            stage,
            step,
            loss,
            state: Box::new(model.clone()),
        });
    }
    Ok(())
}

fn diverged_on_nonfinite(e: TwoTowerError, model: &TowerModel, stage: u8, step: usize) -> TwoTowerError {
    match e {
        TwoTowerError::NonFinite => TwoTowerError::Diverged {
            stage,
            step,
            loss: f64::NAN,
            state: Box::new(model.clone()),
        },
        other => other,
    }
}

/// Proximal step for `lambda |w - anchor|^2` with step size `lr`.
pub fn consolidate(params: &mut [f64], anchor: &[f64], lr: f64, lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    let c = 2.0 * lr * lambda;
    if c.is_infinite() {
        params.copy_from_slice(anchor);
        return;
    }
    for (w, a) in params.iter_mut().zip(anchor) {
        *w = (*w + c * a) / (1.0 + c);
    }
}

pub fn train(
    config: &TrainConfig,
    pairs: &[PairExample],
    inventory: &[InventoryJob],
    validation: &[PairExample],
) -> Result<TrainOutput, TwoTowerError> {
    config.validate()?;
    let m = config.batch_size;
    if pairs.len() < m {
        return Err(TwoTowerError::Config(format!(
            "need at least {m} training pairs, got {}",
            pairs.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = TowerModel::new(config.model, config.seed)?;
    let mut history = Vec::new();
    let mut stream = BatchStream::new(pairs);

    let evaluate = |model: &TowerModel| -> Result<Option<f64>, TwoTowerError> {
        if validation.len() < m {
            return Ok(None);
        }
        mean_in_batch_recall(model, validation, m, config.eval_k).map(Some)
    };
    let due = |step: usize, last: usize| step == last || (config.eval_every > 0 && step % config.eval_every == 0);

    let lr1 = config.learning_rate;
    for step in 1..=config.stage1_steps {
        let batch_pairs = stream.next(m, &mut rng);
        let batch = mix_easy_negatives(batch_pairs, inventory, config.easy_negatives, config.easy_groups, &mut rng)?;
        let obj = batch_objective(&model, &batch, Columns::All, None)
            .map_err(|e| diverged_on_nonfinite(e, &model, 1, step))?;
        for (w, g) in model.params.iter_mut().zip(&obj.grad) {
            *w -= lr1 * g;
        }
        check_finite(obj.loss, &model, 1, step)?;
        if due(step, config.stage1_steps) {
            history.push(MetricRecord {
                stage: 1,
                step,
                loss: obj.loss,
                learning_rate: lr1,
                val_in_batch_recall: evaluate(&model)?,
            });
        }
    }
    let stage1 = model.clone();

    let lr2 = lr1 * config.stage2_lr_factor;
    for step in 1..=config.stage2_steps {
        let batch_pairs = stream.next(m, &mut rng);
        let batch = mix_easy_negatives(batch_pairs, inventory, config.easy_negatives, config.easy_groups, &mut rng)?;
        let obj = batch_objective(&model, &batch, Columns::Hard(config.hard_k), None)
            .map_err(|e| diverged_on_nonfinite(e, &model, 2, step))?;
        for (w, g) in model.params.iter_mut().zip(&obj.grad) {
            *w -= lr2 * g;
        }
        consolidate(&mut model.params, &stage1.params, lr2, config.consolidation);
        check_finite(obj.loss, &model, 2, step)?;
        if due(step, config.stage2_steps) {
            history.push(MetricRecord {
                stage: 2,
                step,
                loss: obj.loss,
                learning_rate: lr2,
                val_in_batch_recall: evaluate(&model)?,
            });
        }
    }
    Ok(TrainOutput {
        stage1,
        model,
        history,
    })
}

/// Relative error `|a - b| / max(|a|, |b|)` of two gradient vectors (0 when both vanish).
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Central finite-difference gradient of `f` at `params`.
pub fn finite_difference(params: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}
