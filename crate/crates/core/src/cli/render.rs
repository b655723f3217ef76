//! Overlay rendering of result tracks onto video frames.

use super::font::{lit, GLYPH_HEIGHT, GLYPH_WIDTH};
use crate::categories::category_name;
use crate::error::{Error, Result};
use crate::eval::ResultEntry;
use crate::mask::Image;
use crate::synth::hue_color;

pub const MASK_ALPHA: f32 = 0.5;

/// Colour of a track; depends only on its id.
pub fn track_color(track_id: u64) -> [f32; 3] {
    let hue = ((track_id + 1) as f64 * 0.618_033_988_75).fract() as f32;
    hue_color(hue, 1.0)
}

/// Draws `text` with its top-left corner at `(row, col)` on a black box,
/// clipped to the canvas.
pub fn draw_text(image: &mut Image, row: usize, col: usize, text: &str, color: [f32; 3]) {
    let (h, w) = image.size();
    let box_w = text.chars().count() * (GLYPH_WIDTH + 1) + 1;
    for r in row..(row + GLYPH_HEIGHT + 2).min(h) {
        for c in col..(col + box_w).min(w) {
            image.set_pixel(r, c, [0.0; 3]);
        }
    }
    for (k, ch) in text.chars().enumerate() {
        let x0 = col + 1 + k * (GLYPH_WIDTH + 1);
        for gr in 0..GLYPH_HEIGHT {
            for gc in 0..GLYPH_WIDTH {
                let (r, c) = (row + 1 + gr, x0 + gc);
                if r < h && c < w && lit(ch, gr, gc) {
                    image.set_pixel(r, c, color);
                }
            }
        }
    }
}

/// Overlays of every entry of one video. Entries without a track id are
/// coloured by their position in `entries`. A video with no entries gets a
/// "0 tracks" banner and is otherwise unchanged.
pub fn render_video(frames: &[Image], entries: &[&ResultEntry]) -> Result<Vec<Image>> {
    let mut out = frames.to_vec();
    let Some(first) = frames.first() else {
        return Ok(out);
    };
    let size = first.size();
    if entries.is_empty() {
        for img in &mut out {
            draw_text(img, 0, 0, "0 tracks", [1.0; 3]);
        }
        return Ok(out);
    }
    for (k, e) in entries.iter().enumerate() {
        if e.segmentations.len() != frames.len() {
            return Err(Error::Shape {
                expected: format!("{} frames", frames.len()),
                got: format!("{} segmentations", e.segmentations.len()),
            });
        }
        let color = track_color(e.track_id.unwrap_or(k as u64));
        let label = format!(
            "{} {:.2}",
            category_name(e.category_id).unwrap_or("?"),
            e.score
        );
        for (img, seg) in out.iter_mut().zip(&e.segmentations) {
            let Some(seg) = seg else { continue };
            if seg.size() != size {
                return Err(Error::Dimension {
                    left: size,
                    right: seg.size(),
                });
            }
            if seg.is_empty() {
                continue;
            }
            let mask = seg.to_dense();
            for r in 0..size.0 {
                for c in 0..size.1 {
                    if mask.get(r, c) {
                        let p = img.pixel(r, c);
                        let blended: [f32; 3] =
                            std::array::from_fn(|i| (1.0 - MASK_ALPHA) * p[i] + MASK_ALPHA * color[i]);
                        img.set_pixel(r, c, blended);
                    }
                }
            }
            let bbox = mask.tight_bbox()?;
            let row = bbox.y0.saturating_sub(GLYPH_HEIGHT + 2);
            draw_text(img, row, bbox.x0, &label, color);
        }
    }
    Ok(out)
}
