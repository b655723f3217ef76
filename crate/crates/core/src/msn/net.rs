//! Patch-scoring convolutional network with exact backpropagation.
//!
//! Activations flow through the stack in `[channel][sample][row][col]`
//! layout so every convolution over a batch is one GEMM against an im2col
//! matrix.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::arch::{LayerSpec, MsnArch, KERNEL};
use crate::error::{Error, Result};
use crate::mask::PairTensor;

const LEAK: f64 = 0.2;
const NORM_EPS: f64 = 1e-5;
const TAPS: usize = KERNEL * KERNEL;

/// Learnable tensors of one block. `bias` is empty on normalized layers;
/// `gamma`/`beta` are empty on the others.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl LayerParams {
    fn zeros(spec: &LayerSpec, c_in: usize) -> Self {
        let c = spec.out_channels;
        let (bias, norm) = if spec.norm { (0, c) } else { (c, 0) };
        LayerParams {
            weight: vec![0.0; c * c_in * TAPS],
            bias: vec![0.0; bias],
            gamma: vec![0.0; norm],
            beta: vec![0.0; norm],
        }
    }

    pub fn tensors(&self) -> [&Vec<f64>; 4] {
        [&self.weight, &self.bias, &self.gamma, &self.beta]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [
            &mut self.weight,
            &mut self.bias,
            &mut self.gamma,
            &mut self.beta,
        ]
    }

    pub fn zeros_like(&self) -> Self {
        LayerParams {
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.bias.len()],
            gamma: vec![0.0; self.gamma.len()],
            beta: vec![0.0; self.beta.len()],
        }
    }
}

/// Names of the four tensors in [`LayerParams::tensors`] order.
pub const TENSOR_NAMES: [&str; 4] = ["weight", "bias", "gamma", "beta"];

#[derive(Clone, Debug, PartialEq)]
pub struct MsnModel {
    arch: MsnArch,
    layers: Vec<LayerParams>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    /// Row-major `s x s` patch logit map.
    pub patch_logits: Vec<f64>,
    pub map_size: usize,
    /// Mean patch logit.
    pub logit: f64,
    /// `sigmoid(logit)`: belief that mask A is the better mask.
    pub probability: f64,
}

#[derive(Clone, Debug)]
pub struct LossAndGrad {
    pub loss: f64,
    pub gradients: Vec<LayerParams>,
    pub logits: Vec<f64>,
}

struct Cache {
    cols: Vec<f64>,
    // Per sample normalized values and inverse std (normalized layers only).
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

impl MsnModel {
    /// He-initialized weights; unit scale and zero shift on normalized layers.
    pub fn new(arch: MsnArch, seed: u64) -> Result<Self> {
        let mut model = MsnModel::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = model.arch.layer_inputs();
        for (params, (c_in, _)) in model.layers.iter_mut().zip(inputs) {
            let fan_in = (c_in * TAPS) as f64;
            let std = (2.0 / ((1.0 + LEAK * LEAK) * fan_in)).sqrt();
            let normal = Normal::new(0.0, std).expect("finite std");
            for w in params.weight.iter_mut() {
                *w = normal.sample(&mut rng);
            }
            params.gamma.iter_mut().for_each(|g| *g = 1.0);
        }
        Ok(model)
    }

    pub fn zeros(arch: MsnArch) -> Result<Self> {
        arch.validate()?;
        let layers = arch
            .layers
            .iter()
            .zip(arch.layer_inputs())
            .map(|(spec, (c_in, _))| LayerParams::zeros(spec, c_in))
            .collect();
        Ok(MsnModel { arch, layers })
    }

    /// Rebuilds a model from stored tensors, checking every shape.
    pub fn from_parts(arch: MsnArch, layers: Vec<LayerParams>) -> Result<Self> {
        let template = MsnModel::zeros(arch)?;
        if layers.len() != template.layers.len() {
            return Err(Error::Shape {
                expected: format!("{} layers", template.layers.len()),
                got: format!("{} layers", layers.len()),
            });
        }
        for (i, (got, want)) in layers.iter().zip(&template.layers).enumerate() {
            for (name, (g, w)) in TENSOR_NAMES
                .iter()
                .zip(got.tensors().iter().zip(want.tensors()))
            {
                if g.len() != w.len() {
                    return Err(Error::Shape {
                        expected: format!("layer {i} {name}: {} values", w.len()),
                        got: format!("{} values", g.len()),
                    });
                }
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numeric { layer: i });
                }
            }
        }
        Ok(MsnModel {
            arch: template.arch,
            layers,
        })
    }

    pub fn arch(&self) -> &MsnArch {
        &self.arch
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.tensors())
            .map(Vec::len)
            .sum()
    }

    pub fn forward(&self, input: &PairTensor) -> Result<ForwardOutput> {
        Ok(self.forward_batch(&[input])?.remove(0))
    }

    /// Each sample is processed independently; batching only amortizes the
    /// matrix products.
    pub fn forward_batch(&self, inputs: &[&PairTensor]) -> Result<Vec<ForwardOutput>> {
        let (map, _, _) = self.run(inputs, false)?;
        let s = self.arch.patch_map_size();
        let p = s * s;
        Ok(map
            .chunks(p)
            .map(|patch| {
                let logit = mean(patch);
                ForwardOutput {
                    patch_logits: patch.to_vec(),
                    map_size: s,
                    logit,
                    probability: sigmoid(logit),
                }
            })
            .collect())
    }

    /// Mean binary cross-entropy over the batch and its exact gradient.
    /// `labels[i]` is 1.0 when mask A of sample `i` is the better mask.
    pub fn loss_and_grad(&self, inputs: &[&PairTensor], labels: &[f64]) -> Result<LossAndGrad> {
        if inputs.is_empty() || inputs.len() != labels.len() {
            return Err(Error::Shape {
                expected: "non-empty batch with one label per sample".into(),
                got: format!("{} inputs, {} labels", inputs.len(), labels.len()),
            });
        }
        let batch = inputs.len();
        let (map, outputs, caches) = self.run(inputs, true)?;
        let caches = caches.expect("cache requested");
        let s = self.arch.patch_map_size();
        let p = s * s;

        let mut loss = 0.0;
        let mut logits = Vec::with_capacity(batch);
        let mut grad_out = vec![0.0; batch * p];
        for (b, &y) in labels.iter().enumerate() {
            let z = mean(&map[b * p..(b + 1) * p]);
            logits.push(z);
            loss += bce_with_logit(z, y);
            let dz = (sigmoid(z) - y) / batch as f64;
            grad_out[b * p..(b + 1) * p]
                .iter_mut()
                .for_each(|g| *g = dz / p as f64);
        }
        loss /= batch as f64;

        let mut gradients: Vec<LayerParams> = self.layers.iter().map(|l| l.zeros_like()).collect();
        let inputs_meta = self.arch.layer_inputs();
        let last = self.arch.layers.len() - 1;
        for l in (0..=last).rev() {
            let spec = &self.arch.layers[l];
            let (c_in, in_size) = inputs_meta[l];
            let out_size = spec.output_size(in_size);
            let n = batch * out_size * out_size;
            let c_out = spec.out_channels;
            let params = &self.layers[l];
            let grads = &mut gradients[l];

            if l != last {
                let act = &outputs[l];
                for (g, &a) in grad_out.iter_mut().zip(act) {
                    if a <= 0.0 {
                        *g *= LEAK;
                    }
                }
            }
            let grad_pre = if spec.norm {
                norm_backward(
                    &grad_out,
                    &caches[l],
                    params,
                    grads,
                    c_out,
                    batch,
                    out_size * out_size,
                )
            } else {
                for c in 0..c_out {
                    grads.bias[c] = grad_out[c * n..(c + 1) * n].iter().sum();
                }
                grad_out
            };

            let k = c_in * TAPS;
            gemm(
                c_out,
                n,
                k,
                &grad_pre,
                false,
                &caches[l].cols,
                true,
                &mut grads.weight,
                0.0,
            );
            if l > 0 {
                let mut grad_cols = vec![0.0; k * n];
                gemm(
                    k,
                    c_out,
                    n,
                    &params.weight,
                    true,
                    &grad_pre,
                    false,
                    &mut grad_cols,
                    0.0,
                );
                grad_out = col2im(&grad_cols, c_in, batch, in_size, spec);
            } else {
                grad_out = Vec::new();
            }
        }

        Ok(LossAndGrad {
            loss,
            gradients,
            logits,
        })
    }

    #[allow(clippy::type_complexity)]
    fn run(
        &self,
        inputs: &[&PairTensor],
        keep: bool,
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>, Option<Vec<Cache>>)> {
        let batch = inputs.len();
        let size = self.arch.input_size;
        for t in inputs {
            if t.size() != size {
                return Err(Error::Shape {
                    expected: format!("8x{size}x{size}"),
                    got: format!("8x{0}x{0}", t.size()),
                });
            }
        }
        let plane = size * size;
        let mut x = vec![0.0; self.arch.in_channels * batch * plane];
        for (b, t) in inputs.iter().enumerate() {
            for c in 0..self.arch.in_channels {
                x[(c * batch + b) * plane..(c * batch + b + 1) * plane]
                    .copy_from_slice(t.channel(c));
            }
        }

        let last = self.arch.layers.len() - 1;
        let mut outputs = Vec::new();
        let mut caches = Vec::new();
        let mut in_size = size;
        let mut c_in = self.arch.in_channels;
        for (l, (spec, params)) in self.arch.layers.iter().zip(&self.layers).enumerate() {
            let out_size = spec.output_size(in_size);
            let p = out_size * out_size;
            let n = batch * p;
            let c_out = spec.out_channels;
            let cols = im2col(&x, c_in, batch, in_size, spec);
            let mut y = vec![0.0; c_out * n];
            gemm(
                c_out,
                c_in * TAPS,
                n,
                &params.weight,
                false,
                &cols,
                false,
                &mut y,
                0.0,
            );

            let mut cache = Cache {
                cols: Vec::new(),
                xhat: Vec::new(),
                inv_std: Vec::new(),
            };
            if spec.norm {
                let (xhat, inv_std) = norm_forward(&mut y, params, c_out, batch, p);
                if keep {
                    cache.xhat = xhat;
                    cache.inv_std = inv_std;
                }
            } else {
                for c in 0..c_out {
                    let b = params.bias[c];
                    y[c * n..(c + 1) * n].iter_mut().for_each(|v| *v += b);
                }
            }
            if l != last {
                y.iter_mut().for_each(|v| {
                    if *v <= 0.0 {
                        *v *= LEAK
                    }
                });
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric { layer: l });
            }
            if keep {
                cache.cols = cols;
                caches.push(cache);
                if l != last {
                    outputs.push(y.clone());
                }
            }
            x = y;
            in_size = out_size;
            c_in = c_out;
        }
        Ok((x, outputs, keep.then_some(caches)))
    }
}

// Normalizes each sample over all its channels and positions, then applies
// the per-channel scale and shift in place. Returns the normalized values and
// per-sample inverse standard deviations.
fn norm_forward(
    y: &mut [f64],
    params: &LayerParams,
    channels: usize,
    batch: usize,
    p: usize,
) -> (Vec<f64>, Vec<f64>) {
    let n = batch * p;
    let count = (channels * p) as f64;
    let mut xhat = vec![0.0; y.len()];
    let mut inv_stds = Vec::with_capacity(batch);
    for b in 0..batch {
        let sample = |c: usize| c * n + b * p..c * n + (b + 1) * p;
        let mu = (0..channels)
            .map(|c| y[sample(c)].iter().sum::<f64>())
            .sum::<f64>()
            / count;
        let var = (0..channels)
            .map(|c| {
                y[sample(c)]
                    .iter()
                    .map(|v| (v - mu) * (v - mu))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / count;
        let inv_std = 1.0 / (var + NORM_EPS).sqrt();
        inv_stds.push(inv_std);
        for c in 0..channels {
            let (g, bt) = (params.gamma[c], params.beta[c]);
            for i in sample(c) {
                let h = (y[i] - mu) * inv_std;
                xhat[i] = h;
                y[i] = g * h + bt;
            }
        }
    }
    (xhat, inv_stds)
}

fn norm_backward(
    grad: &[f64],
    cache: &Cache,
    params: &LayerParams,
    grads: &mut LayerParams,
    channels: usize,
    batch: usize,
    p: usize,
) -> Vec<f64> {
    let n = batch * p;
    let count = (channels * p) as f64;
    let mut out = vec![0.0; grad.len()];
    for c in 0..channels {
        let range = c * n..(c + 1) * n;
        grads.gamma[c] = grad[range.clone()]
            .iter()
            .zip(&cache.xhat[range.clone()])
            .map(|(g, h)| g * h)
            .sum();
        grads.beta[c] = grad[range].iter().sum();
    }
    for b in 0..batch {
        let sample = |c: usize| c * n + b * p..c * n + (b + 1) * p;
        let mut mean_d = 0.0;
        let mut mean_dh = 0.0;
        for c in 0..channels {
            let g = params.gamma[c];
            for i in sample(c) {
                let d = grad[i] * g;
                mean_d += d;
                mean_dh += d * cache.xhat[i];
            }
        }
        mean_d /= count;
        mean_dh /= count;
        let inv_std = cache.inv_std[b];
        for c in 0..channels {
            let g = params.gamma[c];
            for i in sample(c) {
                let d = grad[i] * g;
                out[i] = inv_std * (d - mean_d - cache.xhat[i] * mean_dh);
            }
        }
    }
    out
}

fn im2col(x: &[f64], c_in: usize, batch: usize, size: usize, spec: &LayerSpec) -> Vec<f64> {
    let out = spec.output_size(size);
    let p = out * out;
    let n = batch * p;
    let (pad, _) = spec.padding();
    let stride = spec.stride;
    let mut cols = vec![0.0; c_in * TAPS * n];
    for ci in 0..c_in {
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = (ci * TAPS + ky * KERNEL + kx) * n;
                for b in 0..batch {
                    let src =
                        &x[(ci * batch + b) * size * size..(ci * batch + b + 1) * size * size];
                    let dst = &mut cols[row + b * p..row + (b + 1) * p];
                    for oy in 0..out {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= size as isize {
                            continue;
                        }
                        let src_row = &src[iy as usize * size..(iy as usize + 1) * size];
                        for ox in 0..out {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix >= 0 && ix < size as isize {
                                dst[oy * out + ox] = src_row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], c_in: usize, batch: usize, size: usize, spec: &LayerSpec) -> Vec<f64> {
    let out = spec.output_size(size);
    let p = out * out;
    let n = batch * p;
    let (pad, _) = spec.padding();
    let stride = spec.stride;
    let mut x = vec![0.0; c_in * batch * size * size];
    for ci in 0..c_in {
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = (ci * TAPS + ky * KERNEL + kx) * n;
                for b in 0..batch {
                    let src = &cols[row + b * p..row + (b + 1) * p];
                    let base = (ci * batch + b) * size * size;
                    for oy in 0..out {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= size as isize {
                            continue;
                        }
                        for ox in 0..out {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix >= 0 && ix < size as isize {
                                x[base + iy as usize * size + ix as usize] += src[oy * out + ox];
                            }
                        }
                    }
                }
            }
        }
    }
    x
}

/// `c = a * b + beta * c` for row-major operands; `a` is `m x k` (or its
/// transpose stored `k x m`), `b` is `k x n` (or stored `n x k`).
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    beta: f64,
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_t {
        (1, m as isize)
    } else {
        (k as isize, 1)
    };
    let (rsb, csb) = if b_t {
        (1, k as isize)
    } else {
        (n as isize, 1)
    };
    // SAFETY: the asserts above guarantee every strided access stays within
    // the three slices, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of `sigmoid(z)` against label `y`, computed stably.
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
