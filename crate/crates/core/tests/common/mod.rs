#![allow(dead_code)]

pub mod admission;
pub mod reference;

use masktrack::mask::{PairTensor, PAIR_CHANNELS};
use masktrack::msn::{LayerSpec, MsnArch, MsnModel, TENSOR_NAMES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small stack exercising both strides, biased and normalized layers.
pub fn gradcheck_arch() -> MsnArch {
    MsnArch {
        input_size: 16,
        in_channels: PAIR_CHANNELS,
        layers: vec![
            LayerSpec::new(4, 2, false),
            LayerSpec::new(6, 2, true),
            LayerSpec::new(6, 1, true),
            LayerSpec::new(1, 1, false),
        ],
    }
}

pub fn random_tensor(size: usize, rng: &mut impl Rng) -> PairTensor {
    let data = (0..PAIR_CHANNELS * size * size)
        .map(|_| rng.gen_range(0.0..1.0))
        .collect();
    PairTensor::from_data(size, data).unwrap()
}

pub struct GradCheck {
    pub tensor: String,
    pub coords: usize,
    pub max_rel_error: f64,
}

/// Central finite differences on every coordinate of every tensor.
/// Relative error is `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
#[allow(clippy::needless_range_loop)]
pub fn finite_difference_check(arch: MsnArch, seed: u64, step: f64) -> Vec<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = MsnModel::new(arch.clone(), seed).unwrap();
    // Move scale/shift away from their initial values so their gradients are
    // generic.
    for layer in model.layers_mut() {
        for v in layer
            .gamma
            .iter_mut()
            .chain(layer.beta.iter_mut())
            .chain(layer.bias.iter_mut())
        {
            *v += rng.gen_range(-0.3..0.3);
        }
    }
    let inputs: Vec<PairTensor> = (0..3)
        .map(|_| random_tensor(arch.input_size, &mut rng))
        .collect();
    let refs: Vec<&PairTensor> = inputs.iter().collect();
    let labels = [1.0, 0.0, 1.0];
    let analytic = model.loss_and_grad(&refs, &labels).unwrap().gradients;

    let mut report = Vec::new();
    for l in 0..arch.layers.len() {
        for t in 0..4 {
            let len = model.layers()[l].tensors()[t].len();
            if len == 0 {
                continue;
            }
            let mut worst: f64 = 0.0;
            for i in 0..len {
                let original = model.layers()[l].tensors()[t][i];
                model.layers_mut()[l].tensors_mut()[t][i] = original + step;
                let plus = model.loss_and_grad(&refs, &labels).unwrap().loss;
                model.layers_mut()[l].tensors_mut()[t][i] = original - step;
                let minus = model.loss_and_grad(&refs, &labels).unwrap().loss;
                model.layers_mut()[l].tensors_mut()[t][i] = original;
                let numeric = (plus - minus) / (2.0 * step);
                let a = analytic[l].tensors()[t][i];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
                worst = worst.max(rel);
            }
            report.push(GradCheck {
                tensor: format!("layer{l}.{}", TENSOR_NAMES[t]),
                coords: len,
                max_rel_error: worst,
            });
        }
    }
    report
}
