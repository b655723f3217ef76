use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::texture::splitmix;
use super::{Dropout, NoiseConfig, ObjectSpec, SceneConfig, Shape};

/// Classes used by random benchmark scenes: person, two rider classes and
/// two others.
pub const BENCHMARK_CATEGORIES: [u32; 5] = [26, 23, 31, 8, 14];

/// One textured ellipse visible on every frame whose detections are all
/// missing on frames 0..10.
pub fn late10() -> (SceneConfig, NoiseConfig) {
    let scene = SceneConfig {
        video_id: 10,
        height: 64,
        width: 64,
        frames: 24,
        objects: vec![ObjectSpec {
            shape: Shape::Ellipse { rx: 9.0, ry: 7.0 },
            category: 26,
            depth: 0,
            start: [16.0, 30.0],
            velocity: [1.25, 0.25],
            scale_rate: 1.0,
            entry: 0,
            exit: 24,
            texture_seed: 1010,
        }],
        background_seed: 10,
        flat: false,
    };
    let noise = NoiseConfig {
        dropout: vec![Dropout {
            start: 0,
            end: 10,
            p_miss: 1.0,
        }],
        ..NoiseConfig::default()
    };
    (scene, noise)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub videos: usize,
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub min_objects: usize,
    pub max_objects: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            videos: 6,
            height: 64,
            width: 80,
            frames: 20,
            min_objects: 2,
            max_objects: 4,
        }
    }
}

/// Independent random scenes; video ids count from 1.
pub fn benchmark_scenes(config: &BenchmarkConfig, seed: u64) -> Vec<SceneConfig> {
    (0..config.videos)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(i as u64)));
            let n = rng.gen_range(config.min_objects..=config.max_objects.max(config.min_objects));
            random_scene(i as u64 + 1, config.height, config.width, config.frames, n, &mut rng)
        })
        .collect()
}

/// Random textured shapes with linear motion; some enter late or leave early.
pub fn random_scene(
    video_id: u64,
    height: usize,
    width: usize,
    frames: usize,
    objects: usize,
    rng: &mut impl Rng,
) -> SceneConfig {
    let extent = (height.min(width) as f64 / 5.0).max(3.0);
    let mut depths: Vec<u32> = (0..objects as u32).collect();
    depths.shuffle(rng);
    let objects = depths
        .into_iter()
        .map(|depth| {
            let shape = match rng.gen_range(0..3) {
                0 => Shape::Rectangle {
                    width: rng.gen_range(0.8..2.0) * extent,
                    height: rng.gen_range(0.8..2.0) * extent,
                },
                1 => Shape::Ellipse {
                    rx: rng.gen_range(0.5..1.0) * extent,
                    ry: rng.gen_range(0.5..1.0) * extent,
                },
                _ => {
                    let k = rng.gen_range(5..8);
                    let vertices = (0..k)
                        .map(|j| {
                            let a = std::f64::consts::TAU * j as f64 / k as f64;
                            let r = rng.gen_range(0.5..1.0) * extent;
                            [r * a.cos(), r * a.sin()]
                        })
                        .collect();
                    Shape::Polygon { vertices }
                }
            };
            let entry = if frames > 2 && rng.gen_bool(0.3) {
                rng.gen_range(1..frames / 2)
            } else {
                0
            };
            let exit = if frames > 2 && rng.gen_bool(0.3) {
                rng.gen_range(frames / 2 + 1..=frames)
            } else {
                frames
            };
            ObjectSpec {
                shape,
                category: *BENCHMARK_CATEGORIES.choose(rng).unwrap(),
                depth,
                start: [
                    rng.gen_range(extent..width as f64 - extent),
                    rng.gen_range(extent..height as f64 - extent),
                ],
                velocity: [rng.gen_range(-1.5..1.5), rng.gen_range(-1.0..1.0)],
                scale_rate: 1.0,
                entry,
                exit,
                texture_seed: rng.gen::<u32>().into(),
            }
        })
        .collect();
    SceneConfig {
        video_id,
        height,
        width,
        frames,
        objects,
        background_seed: rng.gen::<u32>().into(),
        flat: false,
    }
}
