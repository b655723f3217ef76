use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mask::{dilate, erode, jitter_boundary, mask_iou, translate, DenseMask, Image};

/// Consecutive frames of a run, in original indexing. `to` may precede
/// `from` on backward runs.
#[derive(Clone, Copy, Debug)]
pub struct FrameStep<'a> {
    pub from: usize,
    pub to: usize,
    pub prev_image: &'a Image,
    pub image: &'a Image,
}

/// Predicts each track's mask on the next frame from its current mask.
/// Must return exactly one mask per input mask, on the same canvas.
pub trait Propagator {
    fn propagate(
        &mut self,
        step: &FrameStep<'_>,
        prev_masks: &[DenseMask],
    ) -> Result<Vec<DenseMask>>;
}

pub const DEFAULT_SEARCH_RADIUS: usize = 16;

/// Translation-only propagation by normalized cross-correlation of luma over
/// each mask's support.
#[derive(Clone, Copy, Debug)]
pub struct ShiftPropagator {
    pub radius: usize,
}

impl Default for ShiftPropagator {
    fn default() -> Self {
        ShiftPropagator {
            radius: DEFAULT_SEARCH_RADIUS,
        }
    }
}

impl Propagator for ShiftPropagator {
    fn propagate(
        &mut self,
        step: &FrameStep<'_>,
        prev_masks: &[DenseMask],
    ) -> Result<Vec<DenseMask>> {
        Ok(shift_propagate(
            step.prev_image,
            step.image,
            prev_masks,
            self.radius,
        ))
    }
}

pub fn shift_propagate(
    prev_image: &Image,
    image: &Image,
    prev_masks: &[DenseMask],
    radius: usize,
) -> Vec<DenseMask> {
    prev_masks
        .iter()
        .map(|m| match estimate_shift(prev_image, image, m, radius) {
            Some((dx, dy)) => translate(m, dx, dy),
            None => DenseMask::new(m.height(), m.width()),
        })
        .collect()
}

/// Integer shift `(dx, dy)` within `radius` that maximizes the normalized
/// correlation between the previous frame on the mask support and the
/// current frame on the shifted support. Shifts keeping fewer than half the
/// support on the canvas are not considered; ties go to the smallest shift.
/// `None` for an empty mask.
pub fn estimate_shift(
    prev_image: &Image,
    image: &Image,
    mask: &DenseMask,
    radius: usize,
) -> Option<(i64, i64)> {
    let (h, w) = mask.size();
    let support: Vec<(usize, usize)> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .filter(|&(r, c)| mask.get(r, c))
        .collect();
    if support.is_empty() {
        return None;
    }
    let source: Vec<f64> = support
        .iter()
        .map(|&(r, c)| prev_image.luma(r, c) as f64)
        .collect();
    let rad = radius as i64;
    let mut best: Option<(f64, i64, (i64, i64))> = None;
    let mut a = Vec::with_capacity(support.len());
    let mut b = Vec::with_capacity(support.len());
    for dy in -rad..=rad {
        for dx in -rad..=rad {
            a.clear();
            b.clear();
            for (k, &(r, c)) in support.iter().enumerate() {
                let (rr, cc) = (r as i64 + dy, c as i64 + dx);
                if rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < w {
                    a.push(source[k]);
                    b.push(image.luma(rr as usize, cc as usize) as f64);
                }
            }
            if 2 * a.len() < support.len() {
                continue;
            }
            let score = ncc(&a, &b);
            let norm = dx * dx + dy * dy;
            let better = match best {
                None => true,
                Some((s, n, _)) => score > s + 1e-12 || ((score - s).abs() <= 1e-12 && norm < n),
            };
            if better {
                best = Some((score, norm, (dx, dy)));
            }
        }
    }
    best.map(|(_, _, d)| d)
}

/// Normalized correlation; 0 when either side is constant.
fn ncc(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x - ma, y - mb);
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    let denom = (saa * sbb).sqrt();
    if denom < 1e-12 {
        0.0
    } else {
        sab / denom
    }
}

/// Test-fixture propagator for synthetic video with known motion. Each
/// input mask is attributed to the object it overlaps most on the source
/// frame, moved by that object's true displacement, then corrupted by a
/// seeded random boundary jitter and one-pixel erosion or dilation.
/// Masks of objects that are not visible on the target frame come out empty;
/// masks that overlap no object stay in place.
#[derive(Clone, Debug)]
pub struct OraclePropagator {
    /// Per object, per frame: visible ground-truth mask.
    visible: Vec<Vec<Option<DenseMask>>>,
    /// Per object, per frame: integer position, when the object is present.
    positions: Vec<Vec<Option<(i64, i64)>>>,
    noise: PropagationNoise,
    rng: ChaCha8Rng,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PropagationNoise {
    /// Boundary jitter probability, also the chance of a one-pixel
    /// erosion or dilation, in `[0, 1]`.
    pub level: f64,
}

impl OraclePropagator {
    pub fn new(
        visible: Vec<Vec<Option<DenseMask>>>,
        positions: Vec<Vec<Option<(i64, i64)>>>,
        noise: PropagationNoise,
        seed: u64,
    ) -> Self {
        OraclePropagator {
            visible,
            positions,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn attribute(&self, frame: usize, mask: &DenseMask) -> Result<Option<usize>> {
        let mut best: Option<(usize, f64)> = None;
        for (obj, frames) in self.visible.iter().enumerate() {
            if let Some(Some(gt)) = frames.get(frame) {
                let iou = mask_iou(mask, gt)?;
                if iou > 0.0 && best.is_none_or(|(_, b)| iou > b) {
                    best = Some((obj, iou));
                }
            }
        }
        Ok(best.map(|(o, _)| o))
    }

    fn corrupt(&mut self, mask: &DenseMask) -> DenseMask {
        let level = self.noise.level.clamp(0.0, 1.0);
        if level == 0.0 {
            return mask.clone();
        }
        let jittered = jitter_boundary(mask, level, &mut self.rng);
        if self.rng.gen_bool(level) {
            if self.rng.gen_bool(0.5) {
                erode(&jittered, 1)
            } else {
                dilate(&jittered, 1)
            }
        } else {
            jittered
        }
    }
}

impl Propagator for OraclePropagator {
    fn propagate(
        &mut self,
        step: &FrameStep<'_>,
        prev_masks: &[DenseMask],
    ) -> Result<Vec<DenseMask>> {
        let mut out = Vec::with_capacity(prev_masks.len());
        for mask in prev_masks {
            let moved = match self.attribute(step.from, mask)? {
                Some(obj) => {
                    let visible = matches!(self.visible[obj].get(step.to), Some(Some(_)));
                    let from = self.positions[obj].get(step.from).copied().flatten();
                    let to = self.positions[obj].get(step.to).copied().flatten();
                    match (visible, from, to) {
                        (true, Some((x0, y0)), Some((x1, y1))) => translate(mask, x1 - x0, y1 - y0),
                        _ => DenseMask::new(mask.height(), mask.width()),
                    }
                }
                None => mask.clone(),
            };
            out.push(if moved.is_empty() {
                moved
            } else {
                self.corrupt(&moved)
            });
        }
        Ok(out)
    }
}
