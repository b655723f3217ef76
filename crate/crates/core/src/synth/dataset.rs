//! On-disk layout of a generated dataset:
//!
//! ```text
//! gt.json                 annotations (eval::GtFile)
//! motion.json             per-object true positions
//! scenes.json             scene configs that produced the videos
//! frames/v{id}/{t:04}.png frames
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{SceneConfig, SyntheticVideo};
use crate::categories::CATEGORIES;
use crate::error::{Error, Result};
use crate::eval::{CategoryInfo, GtFile};
use crate::json::{read_json, write_json};
use crate::mask::Image;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionFile {
    pub videos: Vec<VideoMotion>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoMotion {
    pub video_id: u64,
    /// Per object, per frame.
    pub positions: Vec<Vec<Option<(i64, i64)>>>,
}

pub fn frame_path(dir: &Path, video_id: u64, frame: usize) -> PathBuf {
    dir.join("frames")
        .join(format!("v{video_id}"))
        .join(format!("{frame:04}.png"))
}

pub fn save_png(path: &Path, image: &Image) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    image.to_rgb8().save(path)?;
    Ok(())
}

pub fn load_png(path: &Path) -> Result<Image> {
    let img = image::open(path)?.to_rgb8();
    Ok(Image::from_rgb8(&img))
}

/// Annotation file for a set of videos, listing every known category.
pub fn gt_file(videos: &[SyntheticVideo]) -> GtFile {
    GtFile {
        videos: videos.iter().map(SyntheticVideo::info).collect(),
        categories: CATEGORIES
            .iter()
            .map(|&(id, name)| CategoryInfo {
                id,
                name: name.to_string(),
            })
            .collect(),
        annotations: videos.iter().flat_map(|v| v.gt.iter().cloned()).collect(),
    }
}

pub fn save_dataset(dir: &Path, scenes: &[SceneConfig], videos: &[SyntheticVideo]) -> Result<()> {
    write_json(&dir.join("gt.json"), &gt_file(videos))?;
    write_json(&dir.join("scenes.json"), scenes)?;
    let motion = MotionFile {
        videos: videos
            .iter()
            .map(|v| VideoMotion {
                video_id: v.video_id,
                positions: v.positions.clone(),
            })
            .collect(),
    };
    write_json(&dir.join("motion.json"), &motion)?;
    for v in videos {
        for (t, frame) in v.frames.iter().enumerate() {
            save_png(&frame_path(dir, v.video_id, t), frame)?;
        }
    }
    Ok(())
}

/// Reloads a dataset written by [`save_dataset`]. Visible masks are rebuilt
/// from the annotations; objects that were never visible come back empty.
pub fn load_dataset(dir: &Path) -> Result<(GtFile, Vec<SyntheticVideo>)> {
    let gt: GtFile = read_json(&dir.join("gt.json"))?;
    let motion: MotionFile = read_json(&dir.join("motion.json"))?;
    let mut videos = Vec::with_capacity(gt.videos.len());
    for info in &gt.videos {
        let positions = motion
            .videos
            .iter()
            .find(|m| m.video_id == info.id)
            .map(|m| m.positions.clone())
            .ok_or(Error::UnknownVideo(info.id))?;
        let tracks: Vec<_> = gt
            .annotations
            .iter()
            .filter(|a| a.video_id == info.id)
            .cloned()
            .collect();
        let mut visible = vec![vec![None; info.length]; positions.len()];
        for track in &tracks {
            let slot = visible
                .get_mut(track.id as usize)
                .ok_or_else(|| Error::Config(format!("track {} has no motion", track.id)))?;
            for (t, seg) in track.segmentations.iter().enumerate().take(info.length) {
                slot[t] = seg.as_ref().map(|m| m.to_dense());
            }
        }
        let frames = (0..info.length)
            .map(|t| load_png(&frame_path(dir, info.id, t)))
            .collect::<Result<Vec<_>>>()?;
        videos.push(SyntheticVideo {
            video_id: info.id,
            frames,
            gt: tracks,
            visible,
            positions,
        });
    }
    Ok((gt, videos))
}
