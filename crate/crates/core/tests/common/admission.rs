//! Adversarial proposal streams for the tracker's admission rules.

use masktrack::mask::{intersects, DenseMask, Image, RleMask};
use masktrack::pipeline::{
    run, AlwaysSegmentation, Direction, FrameStep, InstanceProposal, PipelineConfig, Propagator,
    Track,
};
use proptest::prelude::*;

pub const CANVAS: usize = 24;

/// Objects stay where they are.
pub struct StillPropagator;

impl Propagator for StillPropagator {
    fn propagate(
        &mut self,
        _: &FrameStep<'_>,
        prev: &[DenseMask],
    ) -> masktrack::Result<Vec<DenseMask>> {
        Ok(prev.to_vec())
    }
}

#[derive(Clone, Debug)]
pub struct Stream {
    pub frames: usize,
    pub proposals: Vec<InstanceProposal>,
}

fn rect(r: usize, c: usize, h: usize, w: usize) -> RleMask {
    DenseMask::from_rect(CANVAS, CANVAS, r..(r + h).min(CANVAS), c..(c + w).min(CANVAS)).to_rle()
}

/// Many overlapping boxes of two classes with scores bunched around the
/// threshold, including exact duplicates and ties.
pub fn stream() -> impl Strategy<Value = Stream> {
    (1usize..6).prop_flat_map(|frames| {
        let proposal = (
            0..frames,
            prop_oneof![Just(1u32), Just(2u32)],
            prop_oneof![Just(0.5), Just(0.9), 0.45f64..1.0],
            0..CANVAS - 1,
            0..CANVAS - 1,
            1usize..10,
            1usize..10,
        )
            .prop_map(|(frame, category_id, score, r, c, h, w)| InstanceProposal {
                frame,
                category_id,
                score,
                segmentation: rect(r, c, h, w),
            });
        prop::collection::vec(proposal, 0..60).prop_map(move |mut proposals| {
            // Repeat a few proposals verbatim.
            let copies: Vec<_> = proposals.iter().step_by(7).cloned().collect();
            proposals.extend(copies);
            Stream { frames, proposals }
        })
    })
}

/// Many disjoint small boxes on the first frame, more than the cap allows.
pub fn crowd() -> impl Strategy<Value = Stream> {
    (16usize..36, prop::collection::vec(0.5f64..1.0, 36)).prop_map(|(n, scores)| Stream {
        frames: 2,
        proposals: (0..n)
            .map(|k| InstanceProposal {
                frame: 0,
                category_id: 1,
                score: scores[k],
                segmentation: rect(4 * (k / 6), 4 * (k % 6), 3, 3),
            })
            .collect(),
    })
}

pub fn track(stream: &Stream, config: &PipelineConfig) -> masktrack::Result<Vec<Track>> {
    let frames = vec![Image::new(CANVAS, CANVAS); stream.frames];
    run(
        &frames,
        &stream.proposals,
        Direction::Forward,
        config,
        &mut StillPropagator,
        &mut AlwaysSegmentation,
    )
}

/// With zero tolerance, a track's first mask never touches a same-class
/// track that already existed on that frame.
pub fn check_no_intersecting_births(tracks: &[Track]) -> Result<(), String> {
    for t in tracks {
        let born = &t.masks[&t.birth];
        for other in tracks.iter().filter(|o| o.id < t.id && o.category == t.category) {
            if let Some(m) = other.mask(t.birth) {
                if intersects(born, m).map_err(|e| e.to_string())? {
                    return Err(format!(
                        "track {} born on frame {} intersects track {}",
                        t.id, t.birth, other.id
                    ));
                }
            }
        }
    }
    Ok(())
}

pub fn check_cap(tracks: &[Track], cap: usize) -> Result<(), String> {
    if tracks.len() > cap {
        return Err(format!("{} tracks exceed the cap of {cap}", tracks.len()));
    }
    Ok(())
}

/// The admitted crowd is exactly the `cap` highest-scoring boxes.
pub fn check_crowd(stream: &Stream, tracks: &[Track], cap: usize) -> Result<(), String> {
    let mut scores: Vec<f64> = stream.proposals.iter().map(|p| p.score).collect();
    scores.sort_by(|a, b| b.total_cmp(a));
    let mut kept: Vec<f64> = tracks.iter().map(|t| t.score).collect();
    kept.sort_by(|a, b| b.total_cmp(a));
    let expect = &scores[..cap.min(scores.len())];
    if kept != expect {
        return Err(format!("kept {kept:?}, expected {expect:?}"));
    }
    Ok(())
}

pub fn default_config() -> PipelineConfig {
    PipelineConfig {
        intersection_tolerance: 0.0,
        max_objects: 15,
        patience: None,
        ..PipelineConfig::default()
    }
}
