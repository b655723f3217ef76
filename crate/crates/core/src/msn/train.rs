use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arch::MsnArch;
use super::data::{pair_tensor, PairSample, Side};
use super::net::{bce_with_logit, LayerParams, MsnModel};
use super::select::heuristic_select;
use crate::error::{Error, Result};
use crate::mask::PairTensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub arch: MsnArch,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub lr_decay: f64,
    pub decay_every: usize,
    pub shuffle_input_order: bool,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            arch: MsnArch::desk(),
            batch_size: 512,
            learning_rate: 0.01,
            epochs: 40,
            lr_decay: 0.1,
            decay_every: 10,
            shuffle_input_order: true,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(
                "learning_rate must be finite and non-negative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(
                "validation_fraction must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Step schedule: the base rate times `lr_decay` per completed
    /// `decay_every` epochs.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        match self.decay_every {
            0 => self.learning_rate,
            every => self.learning_rate * self.lr_decay.powi((epoch / every) as i32),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Order-symmetrized validation accuracy.
    pub val_accuracy: f64,
    /// Single-order validation accuracy.
    pub val_accuracy_raw: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: MsnModel,
    pub history: Vec<EpochStats>,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
}

/// Splits sample indices by their `source`, so every pair derived from one
/// ground-truth mask lands on the same side. Deterministic in `seed`.
pub fn split_dataset(
    samples: &[PairSample],
    validation_fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut sources: Vec<usize> = samples.iter().map(|s| s.source).collect();
    sources.sort_unstable();
    sources.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SPLIT_SALT);
    sources.shuffle(&mut rng);
    let n_val = (sources.len() as f64 * validation_fraction).round() as usize;
    let held_out: HashSet<usize> = sources[..n_val].iter().copied().collect();
    (0..samples.len()).partition(|&i| !held_out.contains(&samples[i].source))
}

const SPLIT_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Adaptive-moment optimizer state, one slot per parameter tensor.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<LayerParams>,
    v: Vec<LayerParams>,
}

impl Adam {
    pub fn new(model: &MsnModel) -> Self {
        let zeros: Vec<LayerParams> = model.layers().iter().map(LayerParams::zeros_like).collect();
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn update(&mut self, model: &mut MsnModel, gradients: &[LayerParams], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (((params, grads), m), v) in model
            .layers_mut()
            .iter_mut()
            .zip(gradients)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((w, g), m), v) in params
                .tensors_mut()
                .into_iter()
                .zip(grads.tensors())
                .zip(m.tensors_mut())
                .zip(v.tensors_mut())
            {
                for i in 0..w.len() {
                    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                    w[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                }
            }
        }
    }
}

/// Pair accuracy and loss of a model on a set of samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub loss: f64,
    pub accuracy: f64,
    pub accuracy_raw: f64,
    pub count: usize,
}

/// Scores `samples` with both symmetrized and single-order inference. The
/// loss is the single-order BCE.
pub fn evaluate_pairs(model: &MsnModel, samples: &[&PairSample]) -> Result<PairMetrics> {
    if samples.is_empty() {
        return Ok(PairMetrics::default());
    }
    let size = model.arch().input_size;
    let (mut loss, mut correct, mut correct_raw) = (0.0, 0usize, 0usize);
    for chunk in samples.chunks(EVAL_CHUNK) {
        let tensors = chunk
            .iter()
            .map(|s| s.tensor(size))
            .collect::<Result<Vec<_>>>()?;
        let swapped: Vec<PairTensor> = tensors.iter().map(PairTensor::swapped).collect();
        let refs: Vec<&PairTensor> = tensors.iter().chain(&swapped).collect();
        let out = model.forward_batch(&refs)?;
        let (direct, reversed) = out.split_at(chunk.len());
        for ((s, d), r) in chunk.iter().zip(direct).zip(reversed) {
            loss += bce_with_logit(d.logit, s.label.target());
            let raw = if d.probability >= 0.5 {
                Side::A
            } else {
                Side::B
            };
            let sym = if d.probability - r.probability >= 0.0 {
                Side::A
            } else {
                Side::B
            };
            correct_raw += usize::from(raw == s.label);
            correct += usize::from(sym == s.label);
        }
    }
    let n = samples.len() as f64;
    Ok(PairMetrics {
        loss: loss / n,
        accuracy: correct as f64 / n,
        accuracy_raw: correct_raw as f64 / n,
        count: samples.len(),
    })
}

const EVAL_CHUNK: usize = 128;

/// Fraction of samples on which [`heuristic_select`] picks the better mask.
pub fn heuristic_accuracy(samples: &[&PairSample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for s in samples {
        correct += usize::from(heuristic_select(&s.image, &s.mask_a, &s.mask_b)? == s.label);
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// Minibatch Adam on binary cross-entropy with a step learning-rate
/// schedule. Validation metrics are recorded after every epoch.
pub fn train(dataset: &[PairSample], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (train_indices, validation_indices) =
        split_dataset(dataset, config.validation_fraction, config.seed);
    if train_indices.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let validation: Vec<&PairSample> = validation_indices.iter().map(|&i| &dataset[i]).collect();
    let mut model = MsnModel::new(config.arch.clone(), config.seed)?;
    let mut adam = Adam::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let size = config.arch.input_size;
    let mut order = train_indices.clone();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = config.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut inputs = Vec::with_capacity(batch.len());
            let mut labels = Vec::with_capacity(batch.len());
            for &i in batch {
                let s = &dataset[i];
                let tensor = pair_tensor(&s.image, &s.mask_a, &s.mask_b, size)?;
                if config.shuffle_input_order && rng.gen_bool(0.5) {
                    inputs.push(tensor.swapped());
                    labels.push(s.label.flip().target());
                } else {
                    inputs.push(tensor);
                    labels.push(s.label.target());
                }
            }
            let refs: Vec<&PairTensor> = inputs.iter().collect();
            let step = model.loss_and_grad(&refs, &labels)?;
            loss_sum += step.loss * batch.len() as f64;
            adam.update(&mut model, &step.gradients, lr);
        }
        let val = evaluate_pairs(&model, &validation)?;
        let stats = EpochStats {
            epoch,
            learning_rate: lr,
            train_loss: loss_sum / order.len() as f64,
            val_loss: val.loss,
            val_accuracy: val.accuracy,
            val_accuracy_raw: val.accuracy_raw,
        };
        log::info!(
            "epoch {} lr {:.2e} train_loss {:.4} val_loss {:.4} val_acc {:.4} (raw {:.4})",
            stats.epoch,
            stats.learning_rate,
            stats.train_loss,
            stats.val_loss,
            stats.val_accuracy,
            stats.val_accuracy_raw
        );
        history.push(stats);
    }

    Ok(TrainOutcome {
        model,
        history,
        train_indices,
        validation_indices,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mask::{erode, DenseMask, Image};
    use crate::msn::data::label_pair;

    /// Bright disks on a dark background: the ground truth against the same
    /// disk eroded to well under half its area.
    fn separable_family(n: usize, seed: u64) -> Vec<PairSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let (cy, cx) = (rng.gen_range(12.0..20.0), rng.gen_range(12.0..20.0));
                let radius: f64 = rng.gen_range(6.0..10.0);
                let gt = DenseMask::from_fn(32, 32, |r, c| {
                    (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2) <= radius * radius
                });
                let mut img = Image::new(32, 32);
                for r in 0..32 {
                    for c in 0..32 {
                        let v = if gt.get(r, c) { 0.85 } else { 0.15 };
                        img.set_pixel(r, c, [v, v * 0.8, v]);
                    }
                }
                let eroded = erode(&gt, 3);
                let (mask_a, mask_b) = if i % 2 == 0 {
                    (gt.clone(), eroded)
                } else {
                    (eroded, gt.clone())
                };
                let (label, iou_a, iou_b) =
                    label_pair(&gt, &mask_a, &mask_b, 0.02).unwrap().unwrap();
                PairSample {
                    image: Arc::new(img),
                    mask_a,
                    mask_b,
                    gt_mask: Arc::new(gt),
                    label,
                    iou_a,
                    iou_b,
                    source: i,
                }
            })
            .collect()
    }

    fn toy_config() -> TrainConfig {
        TrainConfig {
            arch: MsnArch {
                input_size: 16,
                in_channels: crate::mask::PAIR_CHANNELS,
                layers: vec![
                    crate::msn::LayerSpec::new(8, 2, false),
                    crate::msn::LayerSpec::new(16, 2, true),
                    crate::msn::LayerSpec::new(1, 1, false),
                ],
            },
            batch_size: 16,
            learning_rate: 0.01,
            epochs: 5,
            validation_fraction: 0.25,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn learns_separable_family() {
        let data = separable_family(160, 1);
        for s in &data {
            assert!(
                (s.iou_a - s.iou_b).abs() > 0.4,
                "family must be trivially separable"
            );
        }
        let out = train(&data, &toy_config()).unwrap();
        let last = out.history.last().unwrap();
        assert!(last.val_accuracy >= 0.95, "{:?}", out.history);
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let data = separable_family(24, 2);
        let config = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            shuffle_input_order: false,
            ..toy_config()
        };
        let out = train(&data, &config).unwrap();
        let init = MsnModel::new(config.arch.clone(), config.seed).unwrap();
        assert_eq!(out.model, init);
        let first = &out.history[0];
        for h in &out.history {
            assert_eq!(h.val_loss, first.val_loss);
            assert_eq!(h.val_accuracy, first.val_accuracy);
        }
        // Reshuffling batches changes only the summation order of the
        // training loss.
        for h in &out.history {
            assert!((h.train_loss - first.train_loss).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let data = separable_family(40, 3);
        let config = TrainConfig {
            epochs: 2,
            ..toy_config()
        };
        let a = train(&data, &config).unwrap();
        let b = train(&data, &config).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert!(matches!(
            train(&[], &toy_config()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn split_keeps_sources_together() {
        let mut data = separable_family(30, 4);
        for (i, s) in data.iter_mut().enumerate() {
            s.source = i / 3;
        }
        let (train_idx, val_idx) = split_dataset(&data, 0.2, 9);
        assert_eq!(train_idx.len() + val_idx.len(), 30);
        assert_eq!(val_idx.len(), 6);
        for &v in &val_idx {
            assert!(train_idx.iter().all(|&t| data[t].source != data[v].source));
        }
        assert_eq!(split_dataset(&data, 0.2, 9), (train_idx, val_idx));
    }

    #[test]
    fn schedule_decays_stepwise() {
        let config = TrainConfig::default();
        assert_eq!(config.learning_rate_at(0), 0.01);
        assert_eq!(config.learning_rate_at(9), 0.01);
        assert!((config.learning_rate_at(10) - 0.001).abs() < 1e-15);
        assert!((config.learning_rate_at(39) - 1e-5).abs() < 1e-18);
    }
}
