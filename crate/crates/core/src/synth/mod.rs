//! Deterministic synthetic videos of moving textured shapes with exact
//! ground truth, plus noise models that turn ground truth into detector-like
//! proposal streams.

pub mod dataset;
mod degrade;
mod presets;
mod texture;

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use degrade::{degrade, perturb_mask, Dropout, NoiseConfig};
pub use presets::{benchmark_scenes, late10, random_scene, BenchmarkConfig, BENCHMARK_CATEGORIES};
pub use texture::{fractal_noise, hue_color, value_noise};
pub(crate) use texture::splitmix;

use crate::categories::category_name;
use crate::error::{Error, Result};
use crate::eval::{GtTrack, VideoInfo};
use crate::mask::{quantize, DenseMask, Image};
use crate::msn::{generate_pairs, PairSet, PerturbConfig};
use crate::pipeline::{OraclePropagator, PropagationNoise};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Rectangle { width: f64, height: f64 },
    Ellipse { rx: f64, ry: f64 },
    /// Vertices relative to the object position.
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Shape {
    /// Whether the offset `(dx, dy)` from the object position lies inside the
    /// shape scaled by `scale`.
    pub fn contains(&self, dx: f64, dy: f64, scale: f64) -> bool {
        let (x, y) = (dx / scale, dy / scale);
        match self {
            Shape::Rectangle { width, height } => x.abs() <= width / 2.0 && y.abs() <= height / 2.0,
            Shape::Ellipse { rx, ry } => (x / rx).powi(2) + (y / ry).powi(2) <= 1.0,
            Shape::Polygon { vertices } => point_in_polygon(vertices, x, y),
        }
    }

    /// Half-extents `(x, y)` at unit scale.
    pub fn half_extent(&self) -> (f64, f64) {
        match self {
            Shape::Rectangle { width, height } => (width / 2.0, height / 2.0),
            Shape::Ellipse { rx, ry } => (*rx, *ry),
            Shape::Polygon { vertices } => vertices.iter().fold((0.0, 0.0), |(hx, hy), v| {
                (f64::max(hx, v[0].abs()), f64::max(hy, v[1].abs()))
            }),
        }
    }
}

fn point_in_polygon(vertices: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = vertices.len();
    for i in 0..n {
        let [xi, yi] = vertices[i];
        let [xj, yj] = vertices[(i + n - 1) % n];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
    }
    inside
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: Shape,
    pub category: u32,
    /// Smaller is nearer the camera.
    pub depth: u32,
    /// Position `(x, y)` at frame 0.
    pub start: [f64; 2],
    /// Displacement per frame.
    pub velocity: [f64; 2],
    /// Multiplicative scale change per frame.
    #[serde(default = "unit")]
    pub scale_rate: f64,
    /// Present on frames `entry..exit`.
    pub entry: usize,
    pub exit: usize,
    pub texture_seed: u64,
}

fn unit() -> f64 {
    1.0
}

impl ObjectSpec {
    pub fn present(&self, frame: usize) -> bool {
        (self.entry..self.exit).contains(&frame)
    }

    /// Integer pixel position at `frame`; shapes are rasterized around it,
    /// so displacement between frames is an exact integer translation.
    pub fn position(&self, frame: usize) -> (i64, i64) {
        let t = frame as f64;
        (
            (self.start[0] + self.velocity[0] * t).round() as i64,
            (self.start[1] + self.velocity[1] * t).round() as i64,
        )
    }

    pub fn scale(&self, frame: usize) -> f64 {
        self.scale_rate.powi(frame as i32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub video_id: u64,
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub objects: Vec<ObjectSpec>,
    pub background_seed: u64,
    /// Untextured fills: every object and the background are flat colours.
    #[serde(default)]
    pub flat: bool,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::Config("canvas must be non-empty".into()));
        }
        let mut depths = HashSet::new();
        for (i, o) in self.objects.iter().enumerate() {
            if !(o.entry < o.exit && o.exit <= self.frames) {
                return Err(Error::Config(format!(
                    "object {i}: need entry < exit <= frames, got {}..{} of {}",
                    o.entry, o.exit, self.frames
                )));
            }
            if !depths.insert(o.depth) {
                return Err(Error::Config(format!("object {i}: duplicate depth {}", o.depth)));
            }
            if category_name(o.category).is_none() {
                return Err(Error::UnknownCategory(o.category));
            }
            if !(o.scale_rate > 0.0 && o.scale_rate.is_finite()) {
                return Err(Error::Config(format!("object {i}: scale_rate must be positive")));
            }
            let (hx, hy) = o.shape.half_extent();
            let scale = (o.entry..o.exit).map(|t| o.scale(t)).fold(0.0, f64::max);
            if 2.0 * hx * scale > self.width as f64 || 2.0 * hy * scale > self.height as f64 {
                return Err(Error::Config(format!("object {i} is larger than the canvas")));
            }
        }
        Ok(())
    }
}

/// Rendered video with ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticVideo {
    pub video_id: u64,
    pub frames: Vec<Image>,
    /// One entry per object that is visible on at least one frame; `id` is
    /// the object index.
    pub gt: Vec<GtTrack>,
    /// Per object, per frame: visible region.
    pub visible: Vec<Vec<Option<DenseMask>>>,
    /// Per object, per frame: position while present.
    pub positions: Vec<Vec<Option<(i64, i64)>>>,
}

impl SyntheticVideo {
    pub fn height(&self) -> usize {
        self.frames.first().map_or(0, Image::height)
    }

    pub fn width(&self) -> usize {
        self.frames.first().map_or(0, Image::width)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn info(&self) -> VideoInfo {
        VideoInfo {
            id: self.video_id,
            height: self.height(),
            width: self.width(),
            length: self.len(),
        }
    }

    /// Propagator that knows this video's true motion.
    pub fn oracle_propagator(&self, noise: PropagationNoise, seed: u64) -> OraclePropagator {
        OraclePropagator::new(self.visible.clone(), self.positions.clone(), noise, seed)
    }
}

/// Renders the scene. Nearer objects overwrite farther ones; each object's
/// ground-truth mask is exactly its visible region.
pub fn generate(scene: &SceneConfig) -> Result<SyntheticVideo> {
    scene.validate()?;
    let (h, w) = (scene.height, scene.width);
    let n_obj = scene.objects.len();
    let mut frames = Vec::with_capacity(scene.frames);
    let mut visible = vec![vec![None; scene.frames]; n_obj];
    let mut positions = vec![vec![None; scene.frames]; n_obj];

    // Far to near, so nearer objects paint last.
    let mut order: Vec<usize> = (0..n_obj).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(scene.objects[i].depth));

    for t in 0..scene.frames {
        let mut owner: Vec<Option<usize>> = vec![None; h * w];
        for &i in &order {
            let o = &scene.objects[i];
            if !o.present(t) {
                continue;
            }
            let (px, py) = o.position(t);
            positions[i][t] = Some((px, py));
            let scale = o.scale(t);
            let (hx, hy) = o.shape.half_extent();
            let (ex, ey) = ((hx * scale).ceil() as i64 + 1, (hy * scale).ceil() as i64 + 1);
            for y in (py - ey).max(0)..(py + ey + 1).min(h as i64) {
                for x in (px - ex).max(0)..(px + ex + 1).min(w as i64) {
                    if o.shape.contains((x - px) as f64, (y - py) as f64, scale) {
                        owner[y as usize * w + x as usize] = Some(i);
                    }
                }
            }
        }

        let mut image = Image::new(h, w);
        for r in 0..h {
            for c in 0..w {
                let rgb = match owner[r * w + c] {
                    Some(i) => object_color(scene, i, t, r, c),
                    None => background_color(scene, r, c),
                };
                image.set_pixel(r, c, rgb.map(|v| quantize(v) as f32 / 255.0));
            }
        }
        frames.push(image);

        for (i, vis) in visible.iter_mut().enumerate() {
            let mask = DenseMask::from_fn(h, w, |r, c| owner[r * w + c] == Some(i));
            if !mask.is_empty() {
                vis[t] = Some(mask);
            }
        }
    }

    let gt = scene
        .objects
        .iter()
        .enumerate()
        .filter(|(i, _)| visible[*i].iter().any(Option::is_some))
        .map(|(i, o)| GtTrack {
            id: i as u64,
            video_id: scene.video_id,
            category_id: o.category,
            segmentations: visible[i]
                .iter()
                .map(|m| m.as_ref().map(DenseMask::to_rle))
                .collect(),
        })
        .collect();

    Ok(SyntheticVideo {
        video_id: scene.video_id,
        frames,
        gt,
        visible,
        positions,
    })
}

/// `(video_id, object, frame)` of every visible ground-truth mask, in the
/// order used for [`selection_pairs`] sources.
pub fn selection_sources(videos: &[SyntheticVideo]) -> Vec<(u64, usize, usize)> {
    let mut out = Vec::new();
    for v in videos {
        for (obj, vis) in v.visible.iter().enumerate() {
            for (t, m) in vis.iter().enumerate() {
                if m.is_some() {
                    out.push((v.video_id, obj, t));
                }
            }
        }
    }
    out
}

/// Selection-training pairs drawn from every visible ground-truth mask of
/// `videos`. A sample's `source` indexes [`selection_sources`].
pub fn selection_pairs(
    videos: &[SyntheticVideo],
    perturb: &PerturbConfig,
    seed: u64,
) -> Result<PairSet> {
    let mut gt = Vec::new();
    for v in videos {
        let frames: Vec<Arc<Image>> = v.frames.iter().cloned().map(Arc::new).collect();
        for vis in &v.visible {
            for (t, m) in vis.iter().enumerate() {
                if let Some(m) = m {
                    gt.push((Arc::clone(&frames[t]), m.clone()));
                }
            }
        }
    }
    generate_pairs(&gt, perturb, seed)
}

fn object_color(scene: &SceneConfig, i: usize, t: usize, r: usize, c: usize) -> [f32; 3] {
    let o = &scene.objects[i];
    let base = hue_color(o.category as f32 * 0.618_034, 0.9);
    if scene.flat {
        return base;
    }
    let (px, py) = o.position(t);
    let n = fractal_noise(o.texture_seed, c as i64 - px, r as i64 - py, 6);
    base.map(|v| v * (0.45 + 0.55 * n))
}

fn background_color(scene: &SceneConfig, r: usize, c: usize) -> [f32; 3] {
    if scene.flat {
        return [0.5, 0.5, 0.5];
    }
    let n = fractal_noise(scene.background_seed, c as i64, r as i64, 10);
    let v = 0.3 + 0.4 * n;
    [v, v * 0.95, v * 0.9]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_object(depth: u32, start: [f64; 2], velocity: [f64; 2]) -> ObjectSpec {
        ObjectSpec {
            shape: Shape::Rectangle {
                width: 8.0,
                height: 6.0,
            },
            category: 5,
            depth,
            start,
            velocity,
            scale_rate: 1.0,
            entry: 0,
            exit: 5,
            texture_seed: depth as u64,
        }
    }

    fn scene(objects: Vec<ObjectSpec>) -> SceneConfig {
        SceneConfig {
            video_id: 1,
            height: 32,
            width: 40,
            frames: 5,
            objects,
            background_seed: 7,
            flat: false,
        }
    }

    #[test]
    fn static_rectangle() {
        let v = generate(&scene(vec![rect_object(0, [20.0, 16.0], [0.0, 0.0])])).unwrap();
        assert_eq!(v.gt.len(), 1);
        let first = v.gt[0].segmentations[0].clone().unwrap();
        assert!(v.gt[0].segmentations.iter().all(|m| m.as_ref() == Some(&first)));
        assert_eq!(first.area(), 9 * 7);
    }

    #[test]
    fn occlusion_follows_depth() {
        let near = rect_object(0, [20.0, 16.0], [0.0, 0.0]);
        let far = rect_object(1, [24.0, 16.0], [0.0, 0.0]);
        let v = generate(&scene(vec![near.clone(), far.clone()])).unwrap();
        // Independent z-buffer: a pixel belongs to the far object iff it is
        // inside the far shape and outside the near one.
        let far_mask = v.gt[1].segmentations[0].as_ref().unwrap().to_dense();
        for r in 0..32 {
            for c in 0..40 {
                let inside = |o: &ObjectSpec| {
                    let (px, py) = o.position(0);
                    o.shape.contains(c as f64 - px as f64, r as f64 - py as f64, 1.0)
                };
                assert_eq!(far_mask.get(r, c), inside(&far) && !inside(&near));
            }
        }
        let near_mask = v.gt[0].segmentations[0].as_ref().unwrap().to_dense();
        assert!(near_mask.intersection(&far_mask).unwrap().is_empty());
    }

    #[test]
    fn empty_scene() {
        let v = generate(&scene(vec![])).unwrap();
        assert_eq!(v.len(), 5);
        assert!(v.gt.is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let s = scene(vec![
            rect_object(0, [10.0, 10.0], [1.3, 0.4]),
            rect_object(1, [30.0, 20.0], [-0.7, -0.2]),
        ]);
        assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
    }

    #[test]
    fn texture_moves_with_object() {
        let v = generate(&scene(vec![rect_object(0, [12.0, 12.0], [2.0, 1.0])])).unwrap();
        for dy in -2..=2i64 {
            for dx in -3..=3i64 {
                let (r0, c0) = ((12 + dy) as usize, (12 + dx) as usize);
                let (r1, c1) = ((13 + dy) as usize, (14 + dx) as usize);
                assert_eq!(v.frames[0].pixel(r0, c0), v.frames[1].pixel(r1, c1));
            }
        }
    }

    #[test]
    fn invalid_scenes_are_rejected() {
        let mut big = rect_object(0, [20.0, 16.0], [0.0, 0.0]);
        big.shape = Shape::Rectangle {
            width: 50.0,
            height: 4.0,
        };
        assert!(generate(&scene(vec![big])).is_err());
        let dup = vec![
            rect_object(0, [10.0, 10.0], [0.0, 0.0]),
            rect_object(0, [30.0, 10.0], [0.0, 0.0]),
        ];
        assert!(generate(&scene(dup)).is_err());
        let mut late = rect_object(0, [10.0, 10.0], [0.0, 0.0]);
        late.entry = 5;
        assert!(generate(&scene(vec![late])).is_err());
    }

    #[test]
    fn polygon_containment() {
        let tri = Shape::Polygon {
            vertices: vec![[-4.0, 4.0], [4.0, 4.0], [0.0, -4.0]],
        };
        assert!(tri.contains(0.0, 2.0, 1.0));
        assert!(!tri.contains(3.5, -3.0, 1.0));
        assert!(tri.contains(7.0, 7.0, 2.0));
        assert_eq!(tri.half_extent(), (4.0, 4.0));
    }

    #[test]
    fn frames_survive_png_quantization() {
        let v = generate(&scene(vec![rect_object(0, [20.0, 16.0], [0.0, 0.0])])).unwrap();
        let back = Image::from_rgb8(&v.frames[0].to_rgb8());
        assert_eq!(back, v.frames[0]);
    }
}
