//! Online tracker. Per frame: propagate every live track, associate the
//! propagated masks with the frame's segmentation proposals, keep the better
//! mask of each matched pair, and admit unmatched proposals as new objects.

mod propagate;
mod selector;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use propagate::{
    estimate_shift, shift_propagate, FrameStep, OraclePropagator, PropagationNoise, Propagator,
    ShiftPropagator, DEFAULT_SEARCH_RADIUS,
};
pub use selector::{
    AlwaysPropagation, AlwaysSegmentation, HeuristicSelector, MsnSelector, OracleSelector,
    Selector, SelectorKind,
};

use crate::assign::{associate, DEFAULT_IOU_FLOOR};
use crate::error::{Error, Result};
use crate::eval::ResultEntry;
use crate::mask::{check_canvas, BinaryMask, DenseMask, Image, RleMask};
use crate::msn::Side;

/// One segmentation proposal from the per-frame detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceProposal {
    pub frame: usize,
    pub category_id: u32,
    pub score: f64,
    pub segmentation: RleMask,
}

/// All proposals of one video.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoProposals {
    pub video_id: u64,
    pub height: usize,
    pub width: usize,
    pub length: usize,
    pub proposals: Vec<InstanceProposal>,
}

/// Proposal stream file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProposalFile {
    pub videos: Vec<VideoProposals>,
}

/// Tracks of one video from one pass, or from a merge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoTracks {
    pub video_id: u64,
    pub length: usize,
    pub tracks: Vec<Track>,
}

/// Track file: the full tracker state needed for merging, unlike the
/// result file which keeps only what evaluation needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackFile {
    pub videos: Vec<VideoTracks>,
}

impl TrackFile {
    pub fn to_results(&self) -> Vec<ResultEntry> {
        self.videos
            .iter()
            .flat_map(|v| v.tracks.iter().map(|t| t.to_result(v.video_id, v.length)))
            .filter(|r| r.segmentations.iter().any(Option::is_some))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSource {
    Detected,
    Propagated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: u64,
    pub category: u32,
    /// Running mean of the matched detection scores.
    pub score: f64,
    pub birth: usize,
    /// Frame index (in original video order) to mask; empty masks allowed.
    pub masks: BTreeMap<usize, RleMask>,
    pub sources: BTreeMap<usize, MaskSource>,
    /// Number of detections folded into `score`.
    pub detections: usize,
}

impl Track {
    pub fn mask(&self, frame: usize) -> Option<&RleMask> {
        self.masks.get(&frame)
    }

    /// Frames carrying a non-empty mask.
    pub fn covered_frames(&self) -> impl Iterator<Item = usize> + '_ {
        self.masks
            .iter()
            .filter(|(_, m)| !m.is_empty())
            .map(|(&f, _)| f)
    }

    pub fn first_frame(&self) -> Option<usize> {
        self.masks.keys().next().copied()
    }

    pub fn last_frame(&self) -> Option<usize> {
        self.masks.keys().next_back().copied()
    }

    pub fn to_result(&self, video_id: u64, length: usize) -> ResultEntry {
        ResultEntry {
            video_id,
            track_id: Some(self.id),
            category_id: self.category,
            score: self.score,
            segmentations: (0..length)
                .map(|f| self.masks.get(&f).filter(|m| !m.is_empty()).cloned())
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn frame_order(self, length: usize) -> Vec<usize> {
        match self {
            Direction::Forward => (0..length).collect(),
            Direction::Backward => (0..length).rev().collect(),
        }
    }

    fn next(self, cursor: usize) -> Option<usize> {
        match self {
            Direction::Forward => cursor.checked_add(1),
            Direction::Backward => cursor.checked_sub(1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub score_threshold: f64,
    /// Seg/prop pairs associate only when their IoU is strictly above this.
    pub iou_floor: f64,
    pub max_objects: usize,
    /// A new object may overlap an existing same-class mask by at most this
    /// fraction of its own area.
    pub intersection_tolerance: f64,
    /// Retire a track after this many consecutive empty masks; `None` keeps
    /// it for the rest of the video.
    pub patience: Option<usize>,
    pub selector: SelectorKind,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            score_threshold: 0.5,
            iou_floor: DEFAULT_IOU_FLOOR,
            max_objects: 15,
            intersection_tolerance: 0.0,
            patience: None,
            selector: SelectorKind::Msn,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("score_threshold", self.score_threshold)?;
        unit("iou_floor", self.iou_floor)?;
        unit("intersection_tolerance", self.intersection_tolerance)?;
        if self.max_objects == 0 {
            return Err(Error::Config("max_objects must be at least 1".into()));
        }
        if self.patience == Some(0) {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Status {
    active: bool,
    empty_streak: usize,
}

/// Tracker state for one video, advanced one frame at a time.
#[derive(Clone, Debug)]
pub struct TrackerState {
    tracks: Vec<Track>,
    status: Vec<Status>,
    next_id: u64,
    cursor: usize,
    direction: Direction,
    config: PipelineConfig,
}

impl TrackerState {
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn active_tracks(&self) -> impl Iterator<Item = &Track> {
        self.tracks
            .iter()
            .zip(&self.status)
            .filter(|(_, s)| s.active)
            .map(|(t, _)| t)
    }

    pub fn num_active(&self) -> usize {
        self.status.iter().filter(|s| s.active).count()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn into_tracks(self) -> Vec<Track> {
        self.tracks
    }

    /// Admits candidates in descending score order (ties by position) while
    /// capacity remains, rejecting any that overlap a same-class mask at
    /// `frame` by more than the tolerance.
    fn admit(&mut self, frame: usize, mut candidates: Vec<&InstanceProposal>) -> Result<()> {
        candidates.sort_by(|a, b| b.score.total_cmp(&a.score));
        for cand in candidates {
            if self.num_active() >= self.config.max_objects {
                break;
            }
            let area = cand.segmentation.pixel_area();
            if area == 0 {
                continue;
            }
            let limit = self.config.intersection_tolerance * area as f64;
            let mut blocked = false;
            for track in self.active_tracks() {
                if track.category != cand.category_id {
                    continue;
                }
                if let Some(m) = track.mask(frame) {
                    if m.intersection_area(&cand.segmentation)? as f64 > limit {
                        blocked = true;
                        break;
                    }
                }
            }
            if blocked {
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            self.tracks.push(Track {
                id,
                category: cand.category_id,
                score: cand.score,
                birth: frame,
                masks: BTreeMap::from([(frame, cand.segmentation.clone())]),
                sources: BTreeMap::from([(frame, MaskSource::Detected)]),
                detections: 1,
            });
            self.status.push(Status {
                active: true,
                empty_streak: 0,
            });
        }
        Ok(())
    }
}

fn confident<'a>(
    proposals: &'a [InstanceProposal],
    config: &PipelineConfig,
) -> Vec<&'a InstanceProposal> {
    proposals
        .iter()
        .filter(|p| p.score >= config.score_threshold && !p.segmentation.is_empty())
        .collect()
}

/// Starts a tracker at `frame` from that frame's proposals.
pub fn init_tracks(
    frame: usize,
    proposals: &[InstanceProposal],
    direction: Direction,
    config: &PipelineConfig,
) -> Result<TrackerState> {
    config.validate()?;
    let mut state = TrackerState {
        tracks: Vec::new(),
        status: Vec::new(),
        next_id: 0,
        cursor: frame,
        direction,
        config: config.clone(),
    };
    state.admit(frame, confident(proposals, config))?;
    Ok(state)
}

/// Advances the tracker to `frame`, which must follow the cursor in the
/// run's direction.
pub fn step(
    state: &mut TrackerState,
    frame: usize,
    prev_image: &Image,
    image: &Image,
    proposals: &[InstanceProposal],
    propagator: &mut dyn Propagator,
    selector: &mut dyn Selector,
) -> Result<()> {
    let expected = state.direction.next(state.cursor);
    if expected != Some(frame) {
        return Err(Error::Sequencing {
            expected: expected.unwrap_or(usize::MAX),
            got: frame,
        });
    }
    check_canvas(prev_image.size(), image.size())?;
    let prev = state.cursor;
    let live: Vec<usize> = (0..state.tracks.len())
        .filter(|&i| state.status[i].active)
        .collect();
    let prev_masks: Vec<DenseMask> = live
        .iter()
        .map(|&i| state.tracks[i].masks[&prev].to_dense())
        .collect();
    let step = FrameStep {
        from: prev,
        to: frame,
        prev_image,
        image,
    };
    let propagated = propagator.propagate(&step, &prev_masks)?;
    if propagated.len() != prev_masks.len() {
        return Err(Error::Shape {
            expected: format!("{} propagated masks", prev_masks.len()),
            got: format!("{}", propagated.len()),
        });
    }
    let propagated_rle: Vec<RleMask> = propagated.iter().map(DenseMask::to_rle).collect();

    let seg = confident(proposals, &state.config);
    for s in &seg {
        check_canvas(s.segmentation.size(), image.size())?;
    }
    let seg_rle: Vec<&RleMask> = seg.iter().map(|p| &p.segmentation).collect();
    let association = associate(&seg_rle, &propagated_rle, state.config.iou_floor)?;

    for m in &association.matches {
        let idx = live[m.prop];
        let detection = seg[m.seg];
        let seg_dense = detection.segmentation.to_dense();
        let choice = if propagated[m.prop].is_empty() {
            Side::A
        } else {
            selector.choose(frame, image, &seg_dense, &propagated[m.prop])?
        };
        let track = &mut state.tracks[idx];
        let (mask, source) = match choice {
            Side::A => (detection.segmentation.clone(), MaskSource::Detected),
            Side::B => (propagated_rle[m.prop].clone(), MaskSource::Propagated),
        };
        track.masks.insert(frame, mask);
        track.sources.insert(frame, source);
        track.score = (track.score * track.detections as f64 + detection.score)
            / (track.detections + 1) as f64;
        track.detections += 1;
        state.status[idx].empty_streak = 0;
    }
    for &j in &association.unmatched_prop {
        let idx = live[j];
        let track = &mut state.tracks[idx];
        track.masks.insert(frame, propagated_rle[j].clone());
        track.sources.insert(frame, MaskSource::Propagated);
        let status = &mut state.status[idx];
        if propagated_rle[j].is_empty() {
            status.empty_streak += 1;
            if state
                .config
                .patience
                .is_some_and(|k| status.empty_streak >= k)
            {
                status.active = false;
            }
        } else {
            status.empty_streak = 0;
        }
    }
    state.cursor = frame;
    let unmatched: Vec<&InstanceProposal> =
        association.unmatched_seg.iter().map(|&i| seg[i]).collect();
    state.admit(frame, unmatched)
}

/// Runs the tracker over a whole video. Proposals carry original frame
/// indices; tracks are reported in original indexing for either direction.
pub fn run(
    frames: &[Image],
    proposals: &[InstanceProposal],
    direction: Direction,
    config: &PipelineConfig,
    propagator: &mut dyn Propagator,
    selector: &mut dyn Selector,
) -> Result<Vec<Track>> {
    config.validate()?;
    let mut by_frame: Vec<Vec<InstanceProposal>> = vec![Vec::new(); frames.len()];
    for p in proposals {
        by_frame
            .get_mut(p.frame)
            .ok_or(Error::MissingFrame(p.frame))?
            .push(p.clone());
    }
    let order = direction.frame_order(frames.len());
    let Some((&first, rest)) = order.split_first() else {
        return Ok(Vec::new());
    };
    let mut state = init_tracks(first, &by_frame[first], direction, config)?;
    for &f in rest {
        let prev = state.cursor();
        step(
            &mut state,
            f,
            &frames[prev],
            &frames[f],
            &by_frame[f],
            propagator,
            selector,
        )?;
    }
    Ok(state.into_tracks())
}
