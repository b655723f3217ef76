use super::{check_canvas, BBox, DenseMask, Image};
use crate::error::{Error, Result};

pub const PAIR_CHANNELS: usize = 8;

/// Channel-major `8 x size x size` input for the mask selector.
///
/// Channel layout: `[R, G, B, mask_a, R, G, B, mask_b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairTensor {
    size: usize,
    data: Vec<f64>,
}

impl PairTensor {
    pub const MASK_A: usize = 3;
    pub const MASK_B: usize = 7;

    pub fn from_data(size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != PAIR_CHANNELS * size * size {
            return Err(Error::Shape {
                expected: format!("{PAIR_CHANNELS}x{size}x{size}"),
                got: format!("{} values", data.len()),
            });
        }
        Ok(PairTensor { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.size * self.size;
        &self.data[c * n..(c + 1) * n]
    }

    /// Same tensor with the two candidate masks exchanged.
    pub fn swapped(&self) -> PairTensor {
        let n = self.size * self.size;
        let mut data = self.data.clone();
        let (a, b) = (Self::MASK_A * n, Self::MASK_B * n);
        for i in 0..n {
            data.swap(a + i, b + i);
        }
        PairTensor {
            size: self.size,
            data,
        }
    }
}

/// Crops `bbox` from the image and both masks and resamples to
/// `out_size x out_size`.
///
/// Sampling uses pixel centres: output pixel `d` maps to source coordinate
/// `(d + 0.5) * scale - 0.5`. Image channels are bilinear with clamping at
/// the crop edge; mask channels take the nearest source pixel, so they stay
/// binary.
pub fn crop_resize(
    img: &Image,
    mask_a: &DenseMask,
    mask_b: &DenseMask,
    bbox: BBox,
    out_size: usize,
) -> Result<PairTensor> {
    check_canvas(img.size(), mask_a.size())?;
    check_canvas(img.size(), mask_b.size())?;
    let (h, w) = img.size();
    if bbox.is_degenerate() || out_size == 0 {
        return Err(Error::DegenerateBox([bbox.x0, bbox.y0, bbox.x1, bbox.y1]));
    }
    if bbox.x1 > w || bbox.y1 > h {
        return Err(Error::Dimension {
            left: (h, w),
            right: (bbox.y1, bbox.x1),
        });
    }

    let n = out_size * out_size;
    let mut data = vec![0.0; PAIR_CHANNELS * n];
    let sx = bbox.width() as f64 / out_size as f64;
    let sy = bbox.height() as f64 / out_size as f64;

    let nearest_x: Vec<usize> = (0..out_size)
        .map(|d| nearest(d, sx, bbox.x0, bbox.x1))
        .collect();
    let nearest_y: Vec<usize> = (0..out_size)
        .map(|d| nearest(d, sy, bbox.y0, bbox.y1))
        .collect();
    let lerp_x: Vec<(usize, usize, f64)> = (0..out_size)
        .map(|d| linear(d, sx, bbox.x0, bbox.x1))
        .collect();
    let lerp_y: Vec<(usize, usize, f64)> = (0..out_size)
        .map(|d| linear(d, sy, bbox.y0, bbox.y1))
        .collect();

    for oy in 0..out_size {
        let (y0, y1, fy) = lerp_y[oy];
        for ox in 0..out_size {
            let (x0, x1, fx) = lerp_x[ox];
            let idx = oy * out_size + ox;
            for ch in 0..3 {
                let top = lerp(img.get(y0, x0, ch) as f64, img.get(y0, x1, ch) as f64, fx);
                let bottom = lerp(img.get(y1, x0, ch) as f64, img.get(y1, x1, ch) as f64, fx);
                let v = lerp(top, bottom, fy);
                data[ch * n + idx] = v;
                data[(4 + ch) * n + idx] = v;
            }
            let (my, mx) = (nearest_y[oy], nearest_x[ox]);
            data[PairTensor::MASK_A * n + idx] = mask_a.get(my, mx) as u8 as f64;
            data[PairTensor::MASK_B * n + idx] = mask_b.get(my, mx) as u8 as f64;
        }
    }
    Ok(PairTensor {
        size: out_size,
        data,
    })
}

fn nearest(d: usize, scale: f64, lo: usize, hi: usize) -> usize {
    let offset = ((d as f64 + 0.5) * scale).floor() as usize;
    (lo + offset).min(hi - 1)
}

fn linear(d: usize, scale: f64, lo: usize, hi: usize) -> (usize, usize, f64) {
    let src = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (hi - lo - 1) as f64);
    let base = src.floor();
    let i0 = lo + base as usize;
    let i1 = (i0 + 1).min(hi - 1);
    (i0, i1, src - base)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + (b - a) * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_image(h: usize, w: usize) -> Image {
        let data = (0..h * w * 3)
            .map(|i| ((i * 7) % 256) as f32 / 255.0)
            .collect();
        Image::from_data(h, w, data).unwrap()
    }

    #[test]
    fn full_canvas_at_native_size_is_identity() {
        let img = gradient_image(5, 5);
        let a = DenseMask::from_fn(5, 5, |r, c| (r + c) % 3 == 0);
        let b = DenseMask::from_fn(5, 5, |r, _| r < 2);
        let t = crop_resize(&img, &a, &b, BBox::new(0, 0, 5, 5), 5).unwrap();
        for r in 0..5 {
            for c in 0..5 {
                let i = r * 5 + c;
                for ch in 0..3 {
                    assert_eq!(t.channel(ch)[i], img.get(r, c, ch) as f64);
                    assert_eq!(t.channel(4 + ch)[i], img.get(r, c, ch) as f64);
                }
                assert_eq!(t.channel(PairTensor::MASK_A)[i], a.get(r, c) as u8 as f64);
                assert_eq!(t.channel(PairTensor::MASK_B)[i], b.get(r, c) as u8 as f64);
            }
        }
    }

    #[test]
    fn constant_mask_survives_any_resize() {
        let img = gradient_image(9, 9);
        let ones = DenseMask::from_fn(9, 9, |_, _| true);
        for out in [1, 3, 4, 13, 32] {
            let t = crop_resize(&img, &ones, &ones, BBox::new(1, 2, 8, 7), out).unwrap();
            assert!(t.channel(PairTensor::MASK_A).iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn nearest_upsample_of_corner_pixel() {
        // Index-mapping oracle: floor((d + 0.5) * 2 / 4) = 0 for d < 2.
        let oracle: Vec<usize> = (0..4).map(|d| (2 * d + 1) / 4).collect();
        assert_eq!(oracle, vec![0, 0, 1, 1]);

        let img = Image::new(2, 2);
        let mut m = DenseMask::new(2, 2);
        m.set(0, 0, true);
        let t = crop_resize(&img, &m, &m, BBox::new(0, 0, 2, 2), 4).unwrap();
        let ch = t.channel(PairTensor::MASK_A);
        for r in 0..4 {
            for c in 0..4 {
                let expected = m.get(oracle[r], oracle[c]);
                assert_eq!(ch[r * 4 + c] == 1.0, expected);
                assert_eq!(expected, r < 2 && c < 2);
            }
        }
    }

    #[test]
    fn bilinear_stays_in_range_and_interpolates() {
        let mut img = Image::new(1, 2);
        img.set_pixel(0, 0, [0.0, 0.0, 0.0]);
        img.set_pixel(0, 1, [1.0, 1.0, 1.0]);
        let m = DenseMask::new(1, 2);
        let t = crop_resize(&img, &m, &m, BBox::new(0, 0, 2, 1), 4).unwrap();
        // Source x for d in 0..4 at scale 0.5: -0.25, 0.25, 0.75, 1.25 (clamped).
        assert_eq!(&t.channel(0)[..4], &[0.0, 0.25, 0.75, 1.0]);
    }

    #[test]
    fn degenerate_box_rejected() {
        let img = Image::new(4, 4);
        let m = DenseMask::new(4, 4);
        assert!(matches!(
            crop_resize(&img, &m, &m, BBox::new(2, 0, 2, 4), 8),
            Err(Error::DegenerateBox(_))
        ));
    }

    #[test]
    fn swapped_exchanges_masks_only() {
        let img = gradient_image(4, 4);
        let a = DenseMask::from_rect(4, 4, 0..2, 0..4);
        let b = DenseMask::from_rect(4, 4, 2..4, 0..4);
        let t = crop_resize(&img, &a, &b, BBox::new(0, 0, 4, 4), 4).unwrap();
        let s = t.swapped();
        assert_eq!(s.channel(PairTensor::MASK_A), t.channel(PairTensor::MASK_B));
        assert_eq!(s.channel(0), t.channel(0));
        assert_eq!(
            crop_resize(&img, &b, &a, BBox::new(0, 0, 4, 4), 4).unwrap(),
            s
        );
    }
}
