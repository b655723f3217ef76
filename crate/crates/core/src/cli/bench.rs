//! Micro-benchmarks behind `masktrack bench`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assign::{hungarian, CostMatrix, Sense};
use crate::error::Result;
use crate::mask::{mask_iou, paint_disk, rle_decode, rle_encode, DenseMask, PairTensor};
use crate::msn::{count_params_flops, MsnArch, MsnModel};

/// Wall-time budget for one 200x200 assignment.
pub const HUNGARIAN_BUDGET_SECONDS: f64 = 1.0;

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub name: String,
    pub repetitions: usize,
    pub min_seconds: f64,
    pub mean_seconds: f64,
}

fn time<T>(name: &str, repetitions: usize, mut f: impl FnMut() -> Result<T>) -> Result<Timing> {
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions.max(1) {
        let start = Instant::now();
        std::hint::black_box(f()?);
        samples.push(start.elapsed().as_secs_f64());
    }
    Ok(Timing {
        name: name.to_string(),
        repetitions: samples.len(),
        min_seconds: samples.iter().copied().fold(f64::INFINITY, f64::min),
        mean_seconds: samples.iter().sum::<f64>() / samples.len() as f64,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HungarianBench {
    pub n: usize,
    pub timing: Timing,
    pub budget_seconds: f64,
    pub within_budget: bool,
}

/// Uniform random `n x n` costs, solved `repetitions` times.
pub fn bench_hungarian(n: usize, repetitions: usize, seed: u64) -> Result<HungarianBench> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cost = CostMatrix::from_fn(n, n, |_, _| rng.gen::<f64>());
    let timing = time("hungarian", repetitions, || hungarian(&cost, Sense::Minimize))?;
    Ok(HungarianBench {
        n,
        within_budget: timing.mean_seconds < HUNGARIAN_BUDGET_SECONDS,
        budget_seconds: HUNGARIAN_BUDGET_SECONDS,
        timing,
    })
}

/// Encode, decode and IoU over `count` random blob masks of `size x size`.
pub fn bench_rle(size: usize, count: usize, seed: u64) -> Result<Vec<Timing>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masks: Vec<DenseMask> = (0..count.max(2))
        .map(|_| {
            let mut m = DenseMask::new(size, size);
            for _ in 0..4 {
                let (r, c) = (rng.gen_range(0..size), rng.gen_range(0..size));
                paint_disk(&mut m, r, c, rng.gen_range(1.0..size as f64 / 4.0 + 1.0), true);
            }
            m
        })
        .collect();
    let rles: Vec<_> = masks.iter().map(rle_encode).collect();
    Ok(vec![
        time("rle_encode", masks.len(), {
            let mut i = 0;
            move || {
                i = (i + 1) % masks.len();
                Ok(rle_encode(&masks[i]))
            }
        })?,
        time("rle_decode", rles.len(), {
            let rles = rles.clone();
            let mut i = 0;
            move || {
                i = (i + 1) % rles.len();
                rle_decode(&rles[i])
            }
        })?,
        time("rle_iou", rles.len(), {
            let mut i = 0;
            move || {
                i = (i + 1) % rles.len();
                mask_iou(&rles[i], &rles[(i + 1) % rles.len()])
            }
        })?,
    ])
}

#[derive(Clone, Debug, Serialize)]
pub struct MsnBench {
    pub input_size: usize,
    pub params: u64,
    pub macs: u64,
    pub batch: usize,
    pub forward: Timing,
    pub forward_backward: Timing,
}

/// Forward and forward+backward time for a batch of random inputs.
pub fn bench_msn(arch: MsnArch, batch: usize, repetitions: usize, seed: u64) -> Result<MsnBench> {
    let model = MsnModel::new(arch.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = arch.input_size;
    let inputs = (0..batch.max(1))
        .map(|_| {
            let data = (0..8 * size * size).map(|_| rng.gen::<f64>()).collect();
            PairTensor::from_data(size, data)
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&PairTensor> = inputs.iter().collect();
    let labels: Vec<f64> = (0..refs.len()).map(|i| (i % 2) as f64).collect();
    let budget = count_params_flops(&arch);
    Ok(MsnBench {
        input_size: size,
        params: budget.params,
        macs: budget.macs,
        batch: refs.len(),
        forward: time("msn_forward", repetitions, || model.forward_batch(&refs))?,
        forward_backward: time("msn_forward_backward", repetitions, || {
            model.loss_and_grad(&refs, &labels)
        })?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hungarian_200_within_budget() {
        let b = bench_hungarian(200, 1, 0).unwrap();
        assert!(b.within_budget, "{:?}", b.timing);
    }

    #[test]
    fn small_benches_run() {
        assert_eq!(bench_rle(16, 4, 0).unwrap().len(), 3);
        let m = bench_msn(MsnArch::toy(16), 2, 1, 0).unwrap();
        assert_eq!(m.batch, 2);
        assert!(m.params > 0);
    }
}
