use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::PAIR_CHANNELS;

/// Every convolution uses a 4x4 kernel.
pub const KERNEL: usize = 4;

/// One convolution block: 4x4 conv, optional per-sample normalization with
/// learned per-channel scale/shift, then LeakyReLU(0.2). The last block has
/// neither normalization nor activation and emits patch logits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub out_channels: usize,
    pub stride: usize,
    pub norm: bool,
}

impl LayerSpec {
    pub const fn new(out_channels: usize, stride: usize, norm: bool) -> Self {
        LayerSpec {
            out_channels,
            stride,
            norm,
        }
    }

    /// Stride 2 pads one pixel per side and halves the extent; stride 1 pads
    /// one pixel before and two after and preserves it.
    pub fn padding(&self) -> (usize, usize) {
        match self.stride {
            2 => (1, 1),
            _ => (1, 2),
        }
    }

    pub fn output_size(&self, input: usize) -> usize {
        let (lo, hi) = self.padding();
        (input + lo + hi - KERNEL) / self.stride + 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MsnArch {
    pub input_size: usize,
    pub in_channels: usize,
    pub layers: Vec<LayerSpec>,
}

impl MsnArch {
    /// Full-size selector at 256x256 input; sized against the reference
    /// budget of roughly 11.1 M parameters and 2.22 G multiply-accumulates.
    pub fn full() -> Self {
        MsnArch {
            input_size: 256,
            in_channels: PAIR_CHANNELS,
            layers: vec![
                LayerSpec::new(64, 2, false),
                LayerSpec::new(128, 2, true),
                LayerSpec::new(256, 2, true),
                LayerSpec::new(512, 2, true),
                LayerSpec::new(512, 2, true),
                LayerSpec::new(512, 1, true),
                LayerSpec::new(1, 1, false),
            ],
        }
    }

    /// Desk-scale variant: 64x64 input, a quarter of the channels.
    pub fn desk() -> Self {
        MsnArch {
            input_size: 64,
            in_channels: PAIR_CHANNELS,
            layers: vec![
                LayerSpec::new(16, 2, false),
                LayerSpec::new(32, 2, true),
                LayerSpec::new(64, 2, true),
                LayerSpec::new(128, 2, true),
                LayerSpec::new(128, 2, true),
                LayerSpec::new(128, 1, true),
                LayerSpec::new(1, 1, false),
            ],
        }
    }

    /// Small selector at 32x32 input used for fast training runs.
    pub fn reduced() -> Self {
        MsnArch {
            input_size: 32,
            in_channels: PAIR_CHANNELS,
            layers: vec![
                LayerSpec::new(16, 2, false),
                LayerSpec::new(32, 2, true),
                LayerSpec::new(64, 2, true),
                LayerSpec::new(64, 1, true),
                LayerSpec::new(1, 1, false),
            ],
        }
    }

    /// Two-layer network for gradient checks and unit tests.
    pub fn toy(input_size: usize) -> Self {
        MsnArch {
            input_size,
            in_channels: PAIR_CHANNELS,
            layers: vec![LayerSpec::new(3, 2, true), LayerSpec::new(1, 1, false)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels != PAIR_CHANNELS {
            return Err(Error::Arch(format!(
                "input must have {PAIR_CHANNELS} channels, got {}",
                self.in_channels
            )));
        }
        let last = self
            .layers
            .last()
            .ok_or_else(|| Error::Arch("no layers".into()))?;
        if last.out_channels != 1 || last.norm {
            return Err(Error::Arch(
                "final layer must emit one un-normalized channel".into(),
            ));
        }
        let mut size = self.input_size;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.out_channels == 0 {
                return Err(Error::Arch(format!("layer {i} has zero channels")));
            }
            match layer.stride {
                1 => {}
                2 if size.is_multiple_of(2) => {}
                2 => {
                    return Err(Error::Arch(format!(
                        "layer {i}: stride 2 needs an even input, got {size}"
                    )))
                }
                s => return Err(Error::Arch(format!("layer {i}: unsupported stride {s}"))),
            }
            size = layer.output_size(size);
            if size == 0 {
                return Err(Error::Arch(format!(
                    "layer {i} collapses the spatial extent"
                )));
            }
        }
        Ok(())
    }

    /// Spatial extent after each layer.
    pub fn output_sizes(&self) -> Vec<usize> {
        let mut size = self.input_size;
        self.layers
            .iter()
            .map(|l| {
                size = l.output_size(size);
                size
            })
            .collect()
    }

    pub fn patch_map_size(&self) -> usize {
        self.output_sizes()
            .last()
            .copied()
            .unwrap_or(self.input_size)
    }

    pub(crate) fn layer_inputs(&self) -> Vec<(usize, usize)> {
        let mut channels = self.in_channels;
        let mut size = self.input_size;
        self.layers
            .iter()
            .map(|l| {
                let out = (channels, size);
                channels = l.out_channels;
                size = l.output_size(size);
                out
            })
            .collect()
    }
}

/// Analytic parameter and multiply-accumulate counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub params: u64,
    pub macs: u64,
}

impl std::ops::Add for Budget {
    type Output = Budget;

    fn add(self, rhs: Budget) -> Budget {
        Budget {
            params: self.params + rhs.params,
            macs: self.macs + rhs.macs,
        }
    }
}

/// Per layer: `k*k*c_in*c_out` weights plus either a bias per output channel
/// or, on normalized layers, a scale and shift per output channel. MACs are
/// the weight count times the number of output positions.
pub fn count_params_flops(arch: &MsnArch) -> Budget {
    arch.layers
        .iter()
        .zip(arch.layer_inputs())
        .map(|(layer, (c_in, size))| layer_budget(layer, c_in, size))
        .fold(Budget::default(), |acc, b| acc + b)
}

pub fn layer_budget(layer: &LayerSpec, c_in: usize, input_size: usize) -> Budget {
    let weights = (KERNEL * KERNEL * c_in * layer.out_channels) as u64;
    let extra = if layer.norm {
        2 * layer.out_channels
    } else {
        layer.out_channels
    } as u64;
    let out = layer.output_size(input_size) as u64;
    Budget {
        params: weights + extra,
        macs: weights * out * out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_layer_budget() {
        let arch = MsnArch {
            input_size: 256,
            in_channels: 8,
            layers: vec![LayerSpec::new(1, 1, false)],
        };
        let b = count_params_flops(&arch);
        assert_eq!(b.params, 4 * 4 * 8 + 1);
        assert_eq!(b.macs, 128 * 65_536);
        assert_eq!(b.macs, 8_388_608);
    }

    #[test]
    fn zero_layer_budget() {
        let arch = MsnArch {
            input_size: 256,
            in_channels: 8,
            layers: vec![],
        };
        assert_eq!(count_params_flops(&arch), Budget { params: 0, macs: 0 });
        assert!(arch.validate().is_err());
    }

    #[test]
    fn budget_is_additive() {
        let arch = MsnArch::full();
        let whole = count_params_flops(&arch);
        let sum = arch
            .layers
            .iter()
            .zip(arch.layer_inputs())
            .map(|(l, (c, s))| layer_budget(l, c, s))
            .fold(Budget::default(), |a, b| a + b);
        assert_eq!(whole, sum);
        let head = MsnArch {
            layers: arch.layers[..3].to_vec(),
            ..arch.clone()
        };
        let head_budget = count_params_flops(&head);
        assert!(head_budget.params < whole.params && head_budget.macs < whole.macs);
    }

    #[test]
    fn spatial_sizes() {
        assert_eq!(
            MsnArch::full().output_sizes(),
            vec![128, 64, 32, 16, 8, 8, 8]
        );
        assert_eq!(MsnArch::desk().output_sizes(), vec![32, 16, 8, 4, 2, 2, 2]);
        assert!(MsnArch::full().patch_map_size() >= 4);
        MsnArch::full().validate().unwrap();
        MsnArch::desk().validate().unwrap();
        MsnArch::toy(8).validate().unwrap();
    }

    #[test]
    fn odd_input_rejected_for_stride_two() {
        let mut arch = MsnArch::toy(8);
        arch.input_size = 7;
        assert!(arch.validate().is_err());
    }
}
