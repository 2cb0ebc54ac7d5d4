use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, MlpModel};
use super::record::{Dataset, SampleRecord};
use super::Real;
use crate::error::{Error, Result};
use crate::scene::{derive_seed, rng_for};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    /// Per-sample mean squared error multiplied by the sample's alpha.
    SnrWeighted,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::SnrWeighted => "snr_weighted",
        }
    }

    fn weight(self, alpha: f64) -> f64 {
        match self {
            LossKind::Mse => 1.0,
            LossKind::SnrWeighted => alpha,
        }
    }
}

/// `w * (1/L) sum (pred - label)^2`, with `w = alpha` for the SNR-weighted kind.
pub fn loss(pred: &[f64], label: &[f64], alpha: f64, kind: LossKind) -> f64 {
    assert_eq!(pred.len(), label.len(), "loss operands differ in length");
    let mse = pred
        .iter()
        .zip(label)
        .map(|(p, l)| (p - l) * (p - l))
        .sum::<f64>()
        / pred.len() as f64;
    kind.weight(alpha) * mse
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss_kind: LossKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Emit a checkpoint every this many epochs; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            epochs: 500,
            batch_size: 1024,
            loss_kind: LossKind::SnrWeighted,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be finite and >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidConfig("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("Adam epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Stacks records into row-major input/label blocks plus per-row loss weights.
struct Batch<T> {
    inputs: Vec<T>,
    labels: Vec<T>,
    weights: Vec<f64>,
    len: usize,
}

impl<T: Real> Batch<T> {
    fn gather<'a, I>(records: I, kind: LossKind) -> Self
    where
        I: IntoIterator<Item = &'a SampleRecord>,
    {
        let mut b = Batch {
            inputs: Vec::new(),
            labels: Vec::new(),
            weights: Vec::new(),
            len: 0,
        };
        for r in records {
            b.inputs.extend(r.input.iter().map(|v| T::from_f64(*v)));
            b.labels.extend(r.label.iter().map(|v| T::from_f64(*v)));
            b.weights.push(kind.weight(r.alpha));
            b.len += 1;
        }
        b
    }
}

fn check_shapes<T: Real>(model: &MlpModel<T>, records: &[SampleRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Empty("batch"));
    }
    for r in records {
        if r.input.len() != model.input_len() || r.label.len() != model.grid_len() {
            return Err(Error::ShapeMismatch {
                expected: format!("input {}, label {}", model.input_len(), model.grid_len()),
                found: format!("input {}, label {}", r.input.len(), r.label.len()),
            });
        }
    }
    Ok(())
}

fn loss_and_grads<T: Real>(model: &MlpModel<T>, batch: &Batch<T>) -> Result<(f64, Gradients<T>)> {
    let cache = model.forward_cached(&batch.inputs, batch.len)?;
    let l = model.grid_len();
    let pred = cache.output();
    let mut d_out = Vec::with_capacity(pred.len());
    let mut total = 0.0;
    let scale = 2.0 / (l as f64 * batch.len as f64);
    for ((p_row, y_row), w) in pred
        .chunks_exact(l)
        .zip(batch.labels.chunks_exact(l))
        .zip(&batch.weights)
    {
        let mut sq = 0.0;
        for (p, y) in p_row.iter().zip(y_row) {
            let diff = (*p - *y).to_f64().unwrap();
            sq += diff * diff;
            d_out.push(T::from_f64(w * scale * diff));
        }
        total += w * sq / l as f64;
    }
    let grads = model.backprop(&cache, d_out);
    Ok((total / batch.len as f64, grads))
}

/// Mean-over-batch loss and its exact gradient with respect to every parameter.
pub fn backward<T: Real>(
    model: &MlpModel<T>,
    batch: &[SampleRecord],
    kind: LossKind,
) -> Result<(f64, Gradients<T>)> {
    check_shapes(model, batch)?;
    loss_and_grads(model, &Batch::gather(batch, kind))
}

/// Mean-over-records loss without gradients.
pub fn batch_loss<T: Real>(model: &MlpModel<T>, records: &[SampleRecord], kind: LossKind) -> Result<f64> {
    check_shapes(model, records)?;
    let mut total = 0.0;
    for chunk in records.chunks(1024) {
        let b = Batch::<T>::gather(chunk, kind);
        let pred = model.forward_batch(&b.inputs, b.len)?;
        for ((p, r), w) in pred.chunks_exact(model.grid_len()).zip(chunk).zip(&b.weights) {
            let p: Vec<f64> = p.iter().map(|v| v.to_f64().unwrap()).collect();
            total += w * loss(&p, &r.label, 1.0, LossKind::Mse);
        }
    }
    Ok(total / records.len() as f64)
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub m: Gradients<T>,
    pub v: Gradients<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(model: &MlpModel<T>, cfg: &TrainConfig) -> Self {
        Self {
            learning_rate: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            step: 0,
            m: model.zero_gradients(),
            v: model.zero_gradients(),
        }
    }

    pub fn update(&mut self, model: &mut MlpModel<T>, grads: &Gradients<T>) {
        self.step += 1;
        let t = self.step as i32;
        let k = AdamStep {
            b1: T::from_f64(self.beta1),
            b2: T::from_f64(self.beta2),
            c1: T::from_f64(1.0 / (1.0 - self.beta1.powi(t))),
            c2: T::from_f64(1.0 / (1.0 - self.beta2.powi(t))),
            lr: T::from_f64(self.learning_rate),
            eps: T::from_f64(self.epsilon),
        };
        for (((layer, g), m), v) in model
            .layers_mut()
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            k.apply(&mut layer.weight, &g.weight, &mut m.weight, &mut v.weight);
            k.apply(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias);
        }
    }
}

struct AdamStep<T> {
    b1: T,
    b2: T,
    c1: T,
    c2: T,
    lr: T,
    eps: T,
}

impl<T: Real> AdamStep<T> {
    /// Moments that decay below the smallest normal value are flushed to
    /// zero; subnormal arithmetic would otherwise dominate the step time once
    /// units go quiet.
    fn apply(&self, p: &mut [T], g: &[T], m: &mut [T], v: &mut [T]) {
        let one = T::one();
        let tiny = T::min_positive_value();
        for (((p, g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            let mut mi = self.b1 * *m + (one - self.b1) * *g;
            let mut vi = self.b2 * *v + (one - self.b2) * *g * *g;
            if mi.abs() < tiny {
                mi = T::zero();
            }
            if vi < tiny {
                vi = T::zero();
            }
            *m = mi;
            *v = vi;
            *p = *p - self.lr * (mi * self.c1) / ((vi * self.c2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState<T> {
    pub model: MlpModel<T>,
    pub adam: Adam<T>,
    pub epochs_done: usize,
}

impl<T: Real> TrainState<T> {
    pub fn fresh(model: MlpModel<T>, cfg: &TrainConfig) -> Self {
        let adam = Adam::new(&model, cfg);
        Self {
            model,
            adam,
            epochs_done: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based; continues across resumed runs.
    pub epoch: usize,
    pub train_loss: f64,
}

/// Trains a production-width `f32` network from scratch.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<(MlpModel<f32>, Vec<EpochLog>)> {
    let model = MlpModel::new(dataset.n_ch, dataset.l, cfg.seed);
    let (state, log) = train_from(TrainState::fresh(model, cfg), dataset, cfg, &mut |_, _| Ok(()))?;
    Ok((state.model, log))
}

/// Continues training until `cfg.epochs` epochs are done in total.
///
/// Epoch `e` shuffles with a stream derived from `(cfg.seed, e)`, so a resumed
/// run visits the same batches as an uninterrupted one. `on_epoch` runs after
/// every epoch (checkpointing, progress).
pub fn train_from<T: Real>(
    mut state: TrainState<T>,
    dataset: &Dataset,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&TrainState<T>, &EpochLog) -> Result<()>,
) -> Result<(TrainState<T>, Vec<EpochLog>)> {
    cfg.validate()?;
    check_shapes(&state.model, &dataset.records)?;
    state.adam.learning_rate = cfg.learning_rate;
    let mut log = Vec::new();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    while state.epochs_done < cfg.epochs {
        let epoch = state.epochs_done + 1;
        order.sort_unstable();
        order.shuffle(&mut rng_for(derive_seed(cfg.seed, epoch as u64)));
        let mut weighted = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let batch = Batch::<T>::gather(idx.iter().map(|&i| &dataset.records[i]), cfg.loss_kind);
            let (l, grads) = loss_and_grads(&state.model, &batch)?;
            if !l.is_finite() {
                return Err(Error::NonFinite);
            }
            weighted += l * batch.len as f64;
            state.adam.update(&mut state.model, &grads);
        }
        state.epochs_done = epoch;
        let entry = EpochLog {
            epoch,
            train_loss: weighted / dataset.len() as f64,
        };
        on_epoch(&state, &entry)?;
        log.push(entry);
    }
    Ok((state, log))
}
