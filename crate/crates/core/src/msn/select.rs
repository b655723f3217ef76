use crate::error::{Error, Result};
use crate::mask::{boundary, DenseMask, Image};

use super::data::{pair_tensor, Side};
use super::net::MsnModel;

/// Outcome of comparing two candidate masks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    pub winner: Side,
    /// Belief that A is the better mask, in `[0, 1]`.
    pub confidence: f64,
}

/// Order-symmetrized comparison. The network is queried with (A, B) and
/// (B, A); `confidence = 0.5 + 0.5 * (p_ab - p_ba)`, so swapping the inputs
/// mirrors the belief exactly. Ties go to A.
pub fn select(
    model: &MsnModel,
    image: &Image,
    mask_a: &DenseMask,
    mask_b: &DenseMask,
) -> Result<Selection> {
    let size = model.arch().input_size;
    let forward = pair_tensor(image, mask_a, mask_b, size)?;
    let backward = forward.swapped();
    let out = model.forward_batch(&[&forward, &backward])?;
    let confidence = 0.5 + 0.5 * (out[0].probability - out[1].probability);
    Ok(Selection {
        winner: if confidence >= 0.5 { Side::A } else { Side::B },
        confidence,
    })
}

/// Single-order comparison, without symmetrization.
pub fn select_raw(
    model: &MsnModel,
    image: &Image,
    mask_a: &DenseMask,
    mask_b: &DenseMask,
) -> Result<Selection> {
    let size = model.arch().input_size;
    let confidence = model
        .forward(&pair_tensor(image, mask_a, mask_b, size)?)?
        .probability;
    Ok(Selection {
        winner: if confidence >= 0.5 { Side::A } else { Side::B },
        confidence,
    })
}

/// Weight of the roughness penalty in [`heuristic_score`].
pub const ROUGHNESS_WEIGHT: f64 = 0.05;

/// Mean luminance gradient magnitude along the mask contour minus a
/// roughness penalty. Roughness is the contour length relative to that of
/// a disk of equal area.
pub fn heuristic_score(image: &Image, mask: &DenseMask) -> Result<f64> {
    if (image.height(), image.width()) != mask.size() {
        return Err(Error::Dimension {
            left: (image.height(), image.width()),
            right: mask.size(),
        });
    }
    let area = mask.area();
    if area == 0 {
        return Err(Error::EmptyMask);
    }
    let edge = boundary(mask);
    let (h, w) = mask.size();
    let mut total = 0.0;
    for r in 0..h {
        for c in 0..w {
            if edge.get(r, c) {
                total += luma_gradient(image, r, c);
            }
        }
    }
    let count = edge.area() as f64;
    let roughness = count / (2.0 * (std::f64::consts::PI * area as f64).sqrt());
    Ok(total / count - ROUGHNESS_WEIGHT * roughness)
}

fn luma_gradient(image: &Image, r: usize, c: usize) -> f64 {
    let (h, w) = (image.height(), image.width());
    let l = |r: usize, c: usize| image.luma(r, c) as f64;
    let gx = (l(r, (c + 1).min(w - 1)) - l(r, c.saturating_sub(1))) / 2.0;
    let gy = (l((r + 1).min(h - 1), c) - l(r.saturating_sub(1), c)) / 2.0;
    gx.hypot(gy)
}

/// Picks the candidate with the higher [`heuristic_score`]; ties go to A.
pub fn heuristic_select(image: &Image, mask_a: &DenseMask, mask_b: &DenseMask) -> Result<Side> {
    let a = heuristic_score(image, mask_a)?;
    let b = heuristic_score(image, mask_b)?;
    Ok(if a >= b { Side::A } else { Side::B })
}
