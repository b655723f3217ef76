//! Binary instance masks, their run-length form, and the geometric kernels
//! shared by association, selection, and evaluation.
//!
//! [`DenseMask`] stores pixels row-major. [`RleMask`] follows the COCO
//! uncompressed convention: alternating zero/one runs over a column-major
//! scan, always starting with a (possibly empty) run of zeros.

mod morph;
mod resize;
mod rle;

pub use morph::{boundary, dilate, erode, jitter_boundary, paint_disk, translate};
pub use resize::{crop_resize, PairTensor, PAIR_CHANNELS};
pub use rle::{rle_decode, rle_encode};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major binary occupancy grid.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DenseMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl DenseMask {
    pub fn new(height: usize, width: usize) -> Self {
        assert!(
            height >= 1 && width >= 1,
            "mask canvas must be at least 1x1"
        );
        DenseMask {
            height,
            width,
            bits: vec![false; height * width],
        }
    }

    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 || bits.len() != height * width {
            return Err(Error::Shape {
                expected: format!("{height}x{width} bits"),
                got: format!("{} bits", bits.len()),
            });
        }
        Ok(DenseMask {
            height,
            width,
            bits,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut mask = DenseMask::new(height, width);
        for r in 0..height {
            for c in 0..width {
                mask.bits[r * width + c] = f(r, c);
            }
        }
        mask
    }

    /// Mask with the rectangle `rows x cols` (half-open) set.
    pub fn from_rect(
        height: usize,
        width: usize,
        rows: std::ops::Range<usize>,
        cols: std::ops::Range<usize>,
    ) -> Self {
        DenseMask::from_fn(height, width, |r, c| rows.contains(&r) && cols.contains(&c))
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn size(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn area(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    /// Minimal box containing every set pixel.
    pub fn tight_bbox(&self) -> Result<BBox> {
        let mut bbox: Option<BBox> = None;
        for r in 0..self.height {
            for c in 0..self.width {
                if self.get(r, c) {
                    let pixel = BBox::pixel(c, r);
                    bbox = Some(match bbox {
                        Some(b) => b.union(&pixel),
                        None => pixel,
                    });
                }
            }
        }
        bbox.ok_or(Error::EmptyMask)
    }

    pub fn union(&self, other: &DenseMask) -> Result<DenseMask> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &DenseMask) -> Result<DenseMask> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &DenseMask) -> Result<DenseMask> {
        self.zip_with(other, |a, b| a && !b)
    }

    fn zip_with(&self, other: &DenseMask, op: impl Fn(bool, bool) -> bool) -> Result<DenseMask> {
        check_canvas(self.size(), other.size())?;
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| op(*a, *b))
            .collect();
        Ok(DenseMask {
            height: self.height,
            width: self.width,
            bits,
        })
    }

    pub fn to_rle(&self) -> RleMask {
        rle_encode(self)
    }
}

pub(crate) fn check_canvas(left: (usize, usize), right: (usize, usize)) -> Result<()> {
    if left != right {
        return Err(Error::Dimension { left, right });
    }
    Ok(())
}

/// Run-length encoded mask in COCO's uncompressed column-major form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RleJson", into = "RleJson")]
pub struct RleMask {
    height: usize,
    width: usize,
    counts: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct RleJson {
    size: [usize; 2],
    counts: Vec<u32>,
}

impl TryFrom<RleJson> for RleMask {
    type Error = Error;

    fn try_from(json: RleJson) -> Result<Self> {
        RleMask::new(json.size[0], json.size[1], json.counts)
    }
}

impl From<RleMask> for RleJson {
    fn from(rle: RleMask) -> Self {
        RleJson {
            size: [rle.height, rle.width],
            counts: rle.counts,
        }
    }
}

impl RleMask {
    /// Validates the canonical-form invariants: counts cover the canvas
    /// exactly and only the leading run may be zero.
    pub fn new(height: usize, width: usize, counts: Vec<u32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::MalformedRle(format!(
                "canvas {height}x{width} is empty"
            )));
        }
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        if total != (height * width) as u64 {
            return Err(Error::MalformedRle(format!(
                "counts sum to {total}, canvas has {} pixels",
                height * width
            )));
        }
        if let Some(pos) = counts.iter().skip(1).position(|&c| c == 0) {
            return Err(Error::MalformedRle(format!(
                "zero-length run at position {}",
                pos + 1
            )));
        }
        Ok(RleMask {
            height,
            width,
            counts,
        })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        RleMask {
            height,
            width,
            counts: vec![(height * width) as u32],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn size(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    pub fn to_dense(&self) -> DenseMask {
        // Validated on construction, so decoding cannot fail.
        rle_decode(self).expect("RleMask invariants hold")
    }

    /// Tight box computed directly from the runs.
    pub fn tight_bbox(&self) -> Result<BBox> {
        let h = self.height;
        let mut pos = 0usize;
        let mut bbox: Option<BBox> = None;
        for (i, &run) in self.counts.iter().enumerate() {
            let run = run as usize;
            if i % 2 == 1 && run > 0 {
                let (start, end) = (pos, pos + run - 1);
                let (c0, r0) = (start / h, start % h);
                let (c1, r1) = (end / h, end % h);
                let (y0, y1) = if c0 == c1 { (r0, r1 + 1) } else { (0, h) };
                let run_box = BBox::new(c0, y0, c1 + 1, y1);
                bbox = Some(match bbox {
                    Some(b) => b.union(&run_box),
                    None => run_box,
                });
            }
            pos += run;
        }
        bbox.ok_or(Error::EmptyMask)
    }
}

impl AsRef<RleMask> for RleMask {
    fn as_ref(&self) -> &RleMask {
        self
    }
}

/// Common interface for pixel-count geometry on either mask form.
pub trait BinaryMask {
    fn canvas(&self) -> (usize, usize);
    fn pixel_area(&self) -> u64;
    fn intersection_area(&self, other: &Self) -> Result<u64>;
}

impl BinaryMask for DenseMask {
    fn canvas(&self) -> (usize, usize) {
        self.size()
    }

    fn pixel_area(&self) -> u64 {
        self.area()
    }

    fn intersection_area(&self, other: &Self) -> Result<u64> {
        check_canvas(self.size(), other.size())?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| **a && **b)
            .count() as u64)
    }
}

impl BinaryMask for RleMask {
    fn canvas(&self) -> (usize, usize) {
        self.size()
    }

    fn pixel_area(&self) -> u64 {
        self.area()
    }

    fn intersection_area(&self, other: &Self) -> Result<u64> {
        check_canvas(self.size(), other.size())?;
        Ok(rle::run_intersection(&self.counts, &other.counts))
    }
}

impl RleMask {
    pub fn area(&self) -> u64 {
        self.counts
            .iter()
            .skip(1)
            .step_by(2)
            .map(|&c| c as u64)
            .sum()
    }
}

/// Intersection-over-union from exact pixel counts. Two empty masks give 0.
pub fn mask_iou<M: BinaryMask>(a: &M, b: &M) -> Result<f64> {
    let inter = a.intersection_area(b)?;
    let union = a.pixel_area() + b.pixel_area() - inter;
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}

pub fn intersects<M: BinaryMask>(a: &M, b: &M) -> Result<bool> {
    Ok(a.intersection_area(b)? > 0)
}

/// Axis-aligned box with inclusive `x0, y0` and exclusive `x1, y1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BBox {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        BBox { x0, y0, x1, y1 }
    }

    fn pixel(x: usize, y: usize) -> Self {
        BBox::new(x, y, x + 1, y + 1)
    }

    pub fn width(&self) -> usize {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> usize {
        self.y1.saturating_sub(self.y0)
    }

    pub fn is_degenerate(&self) -> bool {
        self.width() == 0 || self.height() == 0
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox::new(
            self.x0.min(other.x0),
            self.y0.min(other.y0),
            self.x1.max(other.x1),
            self.y1.max(other.y1),
        )
    }

    pub fn overlaps(&self, other: &BBox) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    /// Grows each side by `frac` of the box extent (rounded up), clipped to
    /// a `height x width` canvas.
    pub fn expand(&self, frac: f64, height: usize, width: usize) -> BBox {
        let dx = (self.width() as f64 * frac).ceil() as usize;
        let dy = (self.height() as f64 * frac).ceil() as usize;
        BBox::new(
            self.x0.saturating_sub(dx),
            self.y0.saturating_sub(dy),
            (self.x1 + dx).min(width),
            (self.y1 + dy).min(height),
        )
    }
}

/// RGB image with channel values in `[0, 1]`, stored row-major and
/// channel-interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Image {
    pub const CHANNELS: usize = 3;

    pub fn new(height: usize, width: usize) -> Self {
        Image {
            height,
            width,
            data: vec![0.0; height * width * 3],
        }
    }

    pub fn from_data(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * 3 {
            return Err(Error::Shape {
                expected: format!("{height}x{width}x3"),
                got: format!("{} values", data.len()),
            });
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Config("image values must lie in [0, 1]".into()));
        }
        Ok(Image {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn size(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f32 {
        self.data[(row * self.width + col) * 3 + channel]
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> [f32; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: [f32; 3]) {
        let i = (row * self.width + col) * 3;
        for (k, v) in rgb.iter().enumerate() {
            self.data[i + k] = v.clamp(0.0, 1.0);
        }
    }

    /// Rec. 601 luma.
    #[inline]
    pub fn luma(&self, row: usize, col: usize) -> f32 {
        let [r, g, b] = self.pixel(row, col);
        0.299 * r + 0.587 * g + 0.114 * b
    }

    pub fn to_rgb8(&self) -> image::RgbImage {
        image::RgbImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let [r, g, b] = self.pixel(y as usize, x as usize);
            image::Rgb([quantize(r), quantize(g), quantize(b)])
        })
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let data = img
            .pixels()
            .flat_map(|p| p.0.map(|v| v as f32 / 255.0))
            .collect();
        Image {
            height: h,
            width: w,
            data,
        }
    }
}

pub(crate) fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(n: usize, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> DenseMask {
        DenseMask::from_rect(n, n, rows, cols)
    }

    #[test]
    fn iou_identity_and_disjoint() {
        let a = square(4, 0..2, 0..2);
        let b = square(4, 2..4, 2..4);
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        assert_eq!(mask_iou(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn iou_of_offset_squares_matches_pixel_count() {
        // Pixel-counting oracle: A has 4 px, B has 4 px, they share (1,1).
        let a = square(4, 0..2, 0..2);
        let b = square(4, 1..3, 1..3);
        let inter = (0..4)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .filter(|&(r, c)| a.get(r, c) && b.get(r, c))
            .count();
        let union = (0..4)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .filter(|&(r, c)| a.get(r, c) || b.get(r, c))
            .count();
        assert_eq!((inter, union), (1, 7));
        let iou = mask_iou(&a, &b).unwrap();
        assert_eq!(iou, 1.0 / 7.0);
        assert_eq!(mask_iou(&a.to_rle(), &b.to_rle()).unwrap(), iou);
    }

    #[test]
    fn empty_masks_have_zero_iou() {
        let e = DenseMask::new(3, 3);
        assert_eq!(mask_iou(&e, &e).unwrap(), 0.0);
        assert_eq!(mask_iou(&e.to_rle(), &e.to_rle()).unwrap(), 0.0);
    }

    #[test]
    fn canvas_mismatch_is_rejected() {
        let a = DenseMask::new(3, 3);
        let b = DenseMask::new(3, 4);
        assert!(matches!(mask_iou(&a, &b), Err(Error::Dimension { .. })));
        assert!(matches!(
            mask_iou(&a.to_rle(), &b.to_rle()),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn area_intersects_and_bbox() {
        let full = square(2, 0..2, 0..2);
        assert_eq!(full.area(), 4);
        assert!(intersects(&full, &full).unwrap());

        let mut single = DenseMask::new(4, 4);
        single.set(1, 2, true);
        assert_eq!(single.tight_bbox().unwrap(), BBox::new(2, 1, 3, 2));
        assert_eq!(single.to_rle().tight_bbox().unwrap(), BBox::new(2, 1, 3, 2));
        assert!(matches!(
            DenseMask::new(4, 4).tight_bbox(),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn rle_bbox_spanning_columns() {
        let m = DenseMask::from_fn(5, 6, |r, c| (c == 1 && r >= 3) || (c == 2 && r <= 1));
        assert_eq!(m.tight_bbox().unwrap(), m.to_rle().tight_bbox().unwrap());
    }

    #[test]
    fn bbox_expand_clips_to_canvas() {
        let b = BBox::new(0, 2, 10, 12);
        assert_eq!(b.expand(0.1, 13, 20), BBox::new(0, 1, 11, 13));
    }

    #[test]
    fn rle_json_shape() {
        let rle = RleMask::new(2, 2, vec![0, 1, 3]).unwrap();
        let json = serde_json::to_string(&rle).unwrap();
        assert_eq!(json, r#"{"size":[2,2],"counts":[0,1,3]}"#);
        let back: RleMask = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rle);
        assert!(serde_json::from_str::<RleMask>(r#"{"size":[2,2],"counts":[1,1]}"#).is_err());
    }
}
