//! Training pairs: two degraded versions of one ground-truth mask, labelled
//! by which one is closer to the truth.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mask::{
    boundary, crop_resize, dilate, erode, jitter_boundary, mask_iou, paint_disk, translate, BBox,
    DenseMask, Image, PairTensor,
};

/// Which of two candidates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }

    /// BCE target: 1.0 when A is better.
    pub fn target(self) -> f64 {
        match self {
            Side::A => 1.0,
            Side::B => 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PairSample {
    pub image: Arc<Image>,
    pub mask_a: DenseMask,
    pub mask_b: DenseMask,
    pub gt_mask: Arc<DenseMask>,
    pub label: Side,
    pub iou_a: f64,
    pub iou_b: f64,
    /// Index of the ground-truth entry the pair was derived from; pairs that
    /// share a source never straddle the train/validation split.
    pub source: usize,
}

impl PairSample {
    pub fn swapped(&self) -> PairSample {
        PairSample {
            mask_a: self.mask_b.clone(),
            mask_b: self.mask_a.clone(),
            label: self.label.flip(),
            iou_a: self.iou_b,
            iou_b: self.iou_a,
            ..self.clone()
        }
    }

    pub fn tensor(&self, size: usize) -> Result<PairTensor> {
        pair_tensor(&self.image, &self.mask_a, &self.mask_b, size)
    }
}

/// Union of both masks' tight boxes, grown 10% per side and clipped to the
/// canvas. Both masks must be non-empty.
pub fn selection_box(mask_a: &DenseMask, mask_b: &DenseMask) -> Result<BBox> {
    let bbox = mask_a.tight_bbox()?.union(&mask_b.tight_bbox()?);
    Ok(bbox.expand(0.1, mask_a.height(), mask_a.width()))
}

/// Selector input for a candidate pair.
pub fn pair_tensor(
    image: &Image,
    mask_a: &DenseMask,
    mask_b: &DenseMask,
    size: usize,
) -> Result<PairTensor> {
    let bbox = selection_box(mask_a, mask_b)?;
    crop_resize(image, mask_a, mask_b, bbox, size)
}

/// Concrete mask corruption.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Degradation {
    Identity,
    Dilate { radius: usize },
    Erode { radius: usize },
    Holes { count: usize, radius: f64 },
    BoundaryJitter { level: f64 },
    Shift { dx: i64, dy: i64 },
    Blob { add: bool, radius: f64 },
}

impl Degradation {
    pub fn apply(&self, mask: &DenseMask, rng: &mut impl Rng) -> DenseMask {
        match *self {
            Degradation::Identity => mask.clone(),
            Degradation::Dilate { radius } => dilate(mask, radius),
            Degradation::Erode { radius } => erode(mask, radius),
            Degradation::Holes { count, radius } => {
                let mut out = mask.clone();
                let set = set_pixels(mask);
                for _ in 0..count {
                    if let Some(&(r, c)) = set.choose(rng) {
                        paint_disk(&mut out, r, c, radius, false);
                    }
                }
                out
            }
            Degradation::BoundaryJitter { level } => jitter_boundary(mask, level, rng),
            Degradation::Shift { dx, dy } => translate(mask, dx, dy),
            Degradation::Blob { add, radius } => {
                let mut out = mask.clone();
                if let Some(&(r, c)) = set_pixels(&boundary(mask)).choose(rng) {
                    paint_disk(&mut out, r, c, radius, add);
                }
                out
            }
        }
    }
}

fn set_pixels(mask: &DenseMask) -> Vec<(usize, usize)> {
    (0..mask.height())
        .flat_map(|r| (0..mask.width()).map(move |c| (r, c)))
        .filter(|&(r, c)| mask.get(r, c))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradationKind {
    Dilate,
    Erode,
    Holes,
    BoundaryJitter,
    Shift,
    Blob,
}

impl DegradationKind {
    pub const ALL: [DegradationKind; 6] = [
        DegradationKind::Dilate,
        DegradationKind::Erode,
        DegradationKind::Holes,
        DegradationKind::BoundaryJitter,
        DegradationKind::Shift,
        DegradationKind::Blob,
    ];

    /// Draws a degradation of this kind with a random strength.
    pub fn sample(self, max_radius: usize, rng: &mut impl Rng) -> Degradation {
        let max_radius = max_radius.max(1);
        match self {
            DegradationKind::Dilate => Degradation::Dilate {
                radius: rng.gen_range(1..=max_radius),
            },
            DegradationKind::Erode => Degradation::Erode {
                radius: rng.gen_range(1..=max_radius),
            },
            DegradationKind::Holes => Degradation::Holes {
                count: rng.gen_range(1..=3),
                radius: rng.gen_range(1.0..=max_radius as f64 + 0.5),
            },
            DegradationKind::BoundaryJitter => Degradation::BoundaryJitter {
                level: rng.gen_range(0.1..0.7),
            },
            DegradationKind::Shift => {
                let m = max_radius as i64;
                loop {
                    let (dx, dy) = (rng.gen_range(-m..=m), rng.gen_range(-m..=m));
                    if (dx, dy) != (0, 0) {
                        break Degradation::Shift { dx, dy };
                    }
                }
            }
            DegradationKind::Blob => Degradation::Blob {
                add: rng.gen_bool(0.5),
                radius: rng.gen_range(1.5..=max_radius as f64 + 2.5),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbConfig {
    /// Pairs whose IoU gap is below this are discarded as ambiguous.
    pub margin: f64,
    pub pairs_per_mask: usize,
    pub max_radius: usize,
    /// Ground-truth masks smaller than this are skipped.
    pub min_area: u64,
    /// Probability that a candidate is a composition of two degradations.
    pub compose_probability: f64,
    pub kinds: Vec<DegradationKind>,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            margin: 0.02,
            pairs_per_mask: 4,
            max_radius: 3,
            min_area: 24,
            compose_probability: 0.3,
            kinds: DegradationKind::ALL.to_vec(),
        }
    }
}

/// Labels a candidate pair against the ground truth. `None` when the IoU gap
/// is below `margin`.
pub fn label_pair(
    gt: &DenseMask,
    mask_a: &DenseMask,
    mask_b: &DenseMask,
    margin: f64,
) -> Result<Option<(Side, f64, f64)>> {
    let iou_a = mask_iou(mask_a, gt)?;
    let iou_b = mask_iou(mask_b, gt)?;
    if (iou_a - iou_b).abs() < margin {
        return Ok(None);
    }
    let label = if iou_a > iou_b { Side::A } else { Side::B };
    Ok(Some((label, iou_a, iou_b)))
}

#[derive(Clone, Debug, Default)]
pub struct PairSet {
    pub samples: Vec<PairSample>,
    /// Candidate pairs rejected as ambiguous or empty.
    pub discarded: usize,
}

/// Draws `pairs_per_mask` candidate pairs per ground-truth mask.
pub fn generate_pairs(
    gt: &[(Arc<Image>, DenseMask)],
    config: &PerturbConfig,
    seed: u64,
) -> Result<PairSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = PairSet::default();
    if config.kinds.is_empty() {
        return Ok(set);
    }
    for (source, (image, mask)) in gt.iter().enumerate() {
        if mask.area() < config.min_area {
            continue;
        }
        let gt_mask = Arc::new(mask.clone());
        for _ in 0..config.pairs_per_mask {
            let a = random_candidate(mask, config, &mut rng);
            let b = random_candidate(mask, config, &mut rng);
            if a.is_empty() || b.is_empty() {
                set.discarded += 1;
                continue;
            }
            match label_pair(mask, &a, &b, config.margin)? {
                Some((label, iou_a, iou_b)) => set.samples.push(PairSample {
                    image: Arc::clone(image),
                    mask_a: a,
                    mask_b: b,
                    gt_mask: Arc::clone(&gt_mask),
                    label,
                    iou_a,
                    iou_b,
                    source,
                }),
                None => set.discarded += 1,
            }
        }
    }
    Ok(set)
}

fn random_candidate(mask: &DenseMask, config: &PerturbConfig, rng: &mut impl Rng) -> DenseMask {
    let kind = *config.kinds.choose(rng).expect("non-empty kinds");
    let out = kind.sample(config.max_radius, rng).apply(mask, rng);
    if rng.gen_bool(config.compose_probability.clamp(0.0, 1.0)) {
        let kind = *config.kinds.choose(rng).expect("non-empty kinds");
        kind.sample(config.max_radius, rng).apply(&out, rng)
    } else {
        out
    }
}
