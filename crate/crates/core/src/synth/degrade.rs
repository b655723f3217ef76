use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::texture::splitmix;
use crate::categories::CATEGORIES;
use crate::error::{Error, Result};
use crate::eval::{GtTrack, VideoInfo};
use crate::mask::{jitter_boundary, mask_iou, paint_disk, translate, DenseMask};
use crate::pipeline::{InstanceProposal, VideoProposals};

/// Frames `start..end` use `p_miss` instead of the global miss rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dropout {
    pub start: usize,
    pub end: usize,
    pub p_miss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub p_miss: f64,
    /// Mean number of spurious blobs per frame.
    pub p_spurious: f64,
    pub p_classflip: f64,
    pub boundary_level: f64,
    pub score_base: f64,
    pub score_sigma: f64,
    pub dropout: Vec<Dropout>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            p_miss: 0.0,
            p_spurious: 0.0,
            p_classflip: 0.0,
            boundary_level: 0.0,
            score_base: 0.9,
            score_sigma: 0.0,
            dropout: Vec::new(),
        }
    }
}

impl NoiseConfig {
    /// Detector noise of the selection benchmark.
    pub fn benchmark() -> Self {
        NoiseConfig {
            p_miss: 0.1,
            p_spurious: 0.5,
            p_classflip: 0.02,
            boundary_level: 0.3,
            score_sigma: 0.05,
            ..NoiseConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p_miss", self.p_miss),
            ("p_classflip", self.p_classflip),
            ("boundary_level", self.boundary_level),
            ("score_base", self.score_base),
        ];
        for (name, p) in probs
            .into_iter()
            .chain(self.dropout.iter().map(|d| ("dropout.p_miss", d.p_miss)))
        {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if !(self.p_spurious >= 0.0 && self.p_spurious.is_finite()) {
            return Err(Error::Config("p_spurious must be non-negative".into()));
        }
        if !(self.score_sigma >= 0.0 && self.score_sigma.is_finite()) {
            return Err(Error::Config("score_sigma must be non-negative".into()));
        }
        Ok(())
    }

    pub fn miss_rate(&self, frame: usize) -> f64 {
        self.dropout
            .iter()
            .rev()
            .find(|d| (d.start..d.end).contains(&frame))
            .map_or(self.p_miss, |d| d.p_miss)
    }
}

/// Boundary jitter at `level`, then with probability `level` a one-pixel
/// shift in a random direction.
pub fn perturb_mask(mask: &DenseMask, level: f64, rng: &mut impl Rng) -> DenseMask {
    let level = level.clamp(0.0, 1.0);
    if level == 0.0 {
        return mask.clone();
    }
    let jittered = jitter_boundary(mask, level, rng);
    if rng.gen_bool(level) {
        let (dx, dy) = *[(1, 0), (-1, 0), (0, 1), (0, -1)].choose(rng).unwrap();
        translate(&jittered, dx, dy)
    } else {
        jittered
    }
}

/// Turns ground truth into a detector-like proposal stream. Each frame draws
/// from its own generator derived from `seed`, so frames are independent.
pub fn degrade(
    info: &VideoInfo,
    gt: &[GtTrack],
    noise: &NoiseConfig,
    seed: u64,
) -> Result<VideoProposals> {
    noise.validate()?;
    let (h, w) = (info.height, info.width);
    let mut proposals = Vec::new();
    for t in 0..info.length {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(t as u64 + 1)));
        let visible: Vec<(u32, DenseMask)> = gt
            .iter()
            .filter_map(|g| {
                let m = g.segmentations.get(t)?.as_ref()?;
                (m.size() == (h, w)).then(|| (g.category_id, m.to_dense()))
            })
            .collect();
        for (category, gt_mask) in &visible {
            if rng.gen_bool(noise.miss_rate(t)) {
                continue;
            }
            let mask = perturb_mask(gt_mask, noise.boundary_level, &mut rng);
            if mask.is_empty() {
                continue;
            }
            let category_id = if rng.gen_bool(noise.p_classflip) {
                other_category(*category, &mut rng)
            } else {
                *category
            };
            let iou = mask_iou(&mask, gt_mask)?;
            let mut score = noise.score_base * iou;
            if noise.score_sigma > 0.0 {
                score += Normal::new(0.0, noise.score_sigma)
                    .expect("finite sigma")
                    .sample(&mut rng);
            }
            proposals.push(InstanceProposal {
                frame: t,
                category_id,
                score: score.clamp(0.0, 1.0),
                segmentation: mask.to_rle(),
            });
        }
        if noise.p_spurious > 0.0 {
            let count = Poisson::new(noise.p_spurious)
                .expect("positive rate")
                .sample(&mut rng) as usize;
            for _ in 0..count {
                if let Some(p) = spurious_blob(t, h, w, gt, &visible, &mut rng)? {
                    proposals.push(p);
                }
            }
        }
    }
    Ok(VideoProposals {
        video_id: info.id,
        height: h,
        width: w,
        length: info.length,
        proposals,
    })
}

fn other_category(category: u32, rng: &mut impl Rng) -> u32 {
    loop {
        let (id, _) = CATEGORIES[rng.gen_range(0..CATEGORIES.len())];
        if id != category {
            return id;
        }
    }
}

/// A low-scoring disk at a uniform position and class drawn from the
/// video's ground truth. Positions covering more than half of the blob with
/// a same-class object are redrawn a few times, then given up.
fn spurious_blob(
    frame: usize,
    h: usize,
    w: usize,
    gt: &[GtTrack],
    visible: &[(u32, DenseMask)],
    rng: &mut impl Rng,
) -> Result<Option<InstanceProposal>> {
    let category_id = match gt.choose(rng) {
        Some(g) => g.category_id,
        None => CATEGORIES[rng.gen_range(0..CATEGORIES.len())].0,
    };
    let max_radius = (h.min(w) as f64 / 8.0).max(2.0);
    let score = rng.gen_range(0.05..0.45);
    for _ in 0..8 {
        let radius = rng.gen_range(1.5..=max_radius);
        let mut blob = DenseMask::new(h, w);
        paint_disk(&mut blob, rng.gen_range(0..h), rng.gen_range(0..w), radius, true);
        let area = blob.area();
        let mut ok = area > 0;
        for (c, m) in visible {
            if *c == category_id && 2 * blob.intersection(m)?.area() > area {
                ok = false;
            }
        }
        if ok {
            return Ok(Some(InstanceProposal {
                frame,
                category_id,
                score,
                segmentation: blob.to_rle(),
            }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, late10, BenchmarkConfig};

    fn video() -> crate::synth::SyntheticVideo {
        let scenes = crate::synth::benchmark_scenes(
            &BenchmarkConfig {
                videos: 1,
                ..BenchmarkConfig::default()
            },
            0,
        );
        generate(&scenes[0]).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let v = video();
        let p = degrade(&v.info(), &v.gt, &NoiseConfig::default(), 3).unwrap();
        let expected: usize = v
            .gt
            .iter()
            .map(|g| g.segmentations.iter().flatten().count())
            .sum();
        assert_eq!(p.proposals.len(), expected);
        for prop in &p.proposals {
            assert_eq!(prop.score, 0.9);
            assert!(v.gt.iter().any(|g| g.category_id == prop.category_id
                && g.segmentations[prop.frame].as_ref() == Some(&prop.segmentation)));
        }
    }

    #[test]
    fn full_miss_is_empty() {
        let v = video();
        let noise = NoiseConfig {
            p_miss: 1.0,
            ..NoiseConfig::default()
        };
        assert!(degrade(&v.info(), &v.gt, &noise, 0).unwrap().proposals.is_empty());
    }

    /// Golden band for boundary level 0.3; measured 0.785 on seeds 0..4.
    #[test]
    fn boundary_noise_band() {
        let v = video();
        let noise = NoiseConfig {
            boundary_level: 0.3,
            ..NoiseConfig::default()
        };
        let mut total = 0.0;
        let mut n = 0;
        for seed in 0..4 {
            for prop in degrade(&v.info(), &v.gt, &noise, seed).unwrap().proposals {
                total += prop.score / 0.9;
                n += 1;
            }
        }
        let mean = total / n as f64;
        assert!((0.76..0.81).contains(&mean), "mean IoU {mean}");
    }

    #[test]
    fn spurious_blobs_avoid_same_class_objects() {
        let v = video();
        let noise = NoiseConfig {
            p_spurious: 3.0,
            ..NoiseConfig::default()
        };
        let p = degrade(&v.info(), &v.gt, &noise, 5).unwrap();
        let mut blobs = 0;
        for prop in p.proposals.iter().filter(|p| p.score < 0.5) {
            blobs += 1;
            let m = prop.segmentation.to_dense();
            for g in v.gt.iter().filter(|g| g.category_id == prop.category_id) {
                if let Some(gm) = &g.segmentations[prop.frame] {
                    let inter = m.intersection(&gm.to_dense()).unwrap().area();
                    assert!(2 * inter <= m.area());
                }
            }
        }
        assert!(blobs > 0);
    }

    #[test]
    fn degrade_is_deterministic() {
        let v = video();
        let noise = NoiseConfig::benchmark();
        assert_eq!(
            degrade(&v.info(), &v.gt, &noise, 11).unwrap(),
            degrade(&v.info(), &v.gt, &noise, 11).unwrap()
        );
        assert_ne!(
            degrade(&v.info(), &v.gt, &noise, 11).unwrap(),
            degrade(&v.info(), &v.gt, &noise, 12).unwrap()
        );
    }

    #[test]
    fn late10_hides_first_ten_frames() {
        let (scene, noise) = late10();
        let v = generate(&scene).unwrap();
        let p = degrade(&v.info(), &v.gt, &noise, 0).unwrap();
        assert!(p.proposals.iter().all(|p| p.frame >= 10));
        assert!(p.proposals.iter().any(|p| p.frame == 10));
        assert!(v.gt[0].segmentations[0].is_some());
    }

    #[test]
    fn invalid_noise_is_rejected() {
        let v = video();
        let noise = NoiseConfig {
            p_miss: 1.5,
            ..NoiseConfig::default()
        };
        assert!(matches!(
            degrade(&v.info(), &v.gt, &noise, 0),
            Err(Error::Config(_))
        ));
    }
}
