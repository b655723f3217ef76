//! Merging of forward and backward tracking passes, and rider/person
//! fragment linking.

mod link;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use link::{human_object_link, RiderLink};

use crate::assign::associate;
use crate::error::{Error, Result};
use crate::mask::{Image, RleMask};
use crate::msn::Side;
use crate::pipeline::{Selector, Track};

pub const DEFAULT_MERGE_IOU: f64 = 0.5;

/// Forward track `forward` and backward track `backward` were associated
/// with IoU above the merge threshold on `votes` frames.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub forward: usize,
    pub backward: usize,
    pub votes: usize,
}

/// Bipartite vote graph between the two passes. Nodes are indices into the
/// forward and backward track lists.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MergeGraph {
    pub num_forward: usize,
    pub num_backward: usize,
    /// Sorted by `(forward, backward)`; every edge has at least one vote.
    pub edges: Vec<Edge>,
}

/// Per frame, matches non-empty forward masks against non-empty backward
/// masks by IoU-maximizing assignment; each matched pair with IoU above
/// `merge_iou` is one vote.
pub fn associate_passes(fwd: &[Track], bwd: &[Track], merge_iou: f64) -> Result<MergeGraph> {
    if !(0.0..1.0).contains(&merge_iou) {
        return Err(Error::Config(format!("merge_iou must be in [0, 1), got {merge_iou}")));
    }
    let frames: BTreeSet<usize> = fwd
        .iter()
        .chain(bwd)
        .flat_map(|t| t.covered_frames())
        .collect();
    let mut votes: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for f in frames {
        let live = |tracks: &[Track]| -> (Vec<usize>, Vec<RleMask>) {
            tracks
                .iter()
                .enumerate()
                .filter_map(|(i, t)| t.mask(f).filter(|m| !m.is_empty()).map(|m| (i, m.clone())))
                .unzip()
        };
        let (fi, fm) = live(fwd);
        let (bi, bm) = live(bwd);
        if fm.is_empty() || bm.is_empty() {
            continue;
        }
        for m in associate(&fm, &bm, merge_iou)?.matches {
            *votes.entry((fi[m.seg], bi[m.prop])).or_default() += 1;
        }
    }
    Ok(MergeGraph {
        num_forward: fwd.len(),
        num_backward: bwd.len(),
        edges: votes
            .into_iter()
            .map(|((forward, backward), votes)| Edge {
                forward,
                backward,
                votes,
            })
            .collect(),
    })
}

/// One-to-one pairing chosen from the graph: edges by descending votes,
/// ties by earlier forward birth, then earlier backward birth, then index.
pub fn resolve(graph: &MergeGraph, fwd: &[Track], bwd: &[Track]) -> Vec<Edge> {
    let mut edges = graph.edges.clone();
    edges.sort_by_key(|e| {
        (
            std::cmp::Reverse(e.votes),
            fwd[e.forward].birth,
            bwd[e.backward].birth,
            e.forward,
            e.backward,
        )
    });
    let mut used_f = vec![false; graph.num_forward];
    let mut used_b = vec![false; graph.num_backward];
    let mut chosen = Vec::new();
    for e in edges {
        if !used_f[e.forward] && !used_b[e.backward] {
            used_f[e.forward] = true;
            used_b[e.backward] = true;
            chosen.push(e);
        }
    }
    chosen.sort_by_key(|e| (e.forward, e.backward));
    chosen
}

/// Chooses between forward (A) and backward (B) masks on frames both cover.
pub struct Arbiter<'a> {
    pub frames: &'a [Image],
    pub selector: &'a mut dyn Selector,
}

/// Unions resolved pairs into single tracks and passes everything else
/// through. Without an arbiter, dual-coverage frames keep the forward mask.
/// Output ids are renumbered from 0 in order of first frame.
pub fn merge_tracks(
    graph: &MergeGraph,
    fwd: &[Track],
    bwd: &[Track],
    mut arbiter: Option<Arbiter<'_>>,
) -> Result<Vec<Track>> {
    if graph.num_forward != fwd.len() || graph.num_backward != bwd.len() {
        return Err(Error::Config("merge graph does not match the track sets".into()));
    }
    let pairs = resolve(graph, fwd, bwd);
    let mut paired_f = vec![None; fwd.len()];
    let mut paired_b = vec![false; bwd.len()];
    for e in &pairs {
        paired_f[e.forward] = Some(e.backward);
        paired_b[e.backward] = true;
    }

    let mut out = Vec::with_capacity(fwd.len() + bwd.len() - pairs.len());
    for (i, f) in fwd.iter().enumerate() {
        match paired_f[i] {
            Some(j) => out.push(combine(f, &bwd[j], arbiter.as_mut())?),
            None => out.push(f.clone()),
        }
    }
    out.extend(
        bwd.iter()
            .zip(&paired_b)
            .filter(|(_, &p)| !p)
            .map(|(b, _)| b.clone()),
    );
    // Stable, so re-merging an already merged set keeps its order.
    out.sort_by_key(|t| t.covered_frames().next().unwrap_or(t.birth));
    for (id, t) in out.iter_mut().enumerate() {
        t.id = id as u64;
    }
    Ok(out)
}

fn combine(f: &Track, b: &Track, arbiter: Option<&mut Arbiter<'_>>) -> Result<Track> {
    let mut masks = f.masks.clone();
    let mut sources = f.sources.clone();
    let mut arbiter = arbiter;
    for (&frame, bm) in &b.masks {
        let take_b = match masks.get(&frame) {
            None => true,
            Some(fm) if fm.is_empty() => !bm.is_empty(),
            Some(_) if bm.is_empty() => false,
            Some(fm) => match arbiter.as_deref_mut() {
                Some(a) => {
                    let image = a.frames.get(frame).ok_or(Error::MissingFrame(frame))?;
                    let side = a
                        .selector
                        .choose(frame, image, &fm.to_dense(), &bm.to_dense())?;
                    side == Side::B
                }
                None => false,
            },
        };
        if take_b {
            masks.insert(frame, bm.clone());
            if let Some(s) = b.sources.get(&frame) {
                sources.insert(frame, *s);
            }
        }
    }
    let category = if b.score > f.score { b.category } else { f.category };
    let birth = masks
        .iter()
        .find(|(_, m)| !m.is_empty())
        .map_or(f.birth.min(b.birth), |(&k, _)| k);
    Ok(Track {
        id: f.id,
        category,
        score: f.score.max(b.score),
        birth,
        masks,
        sources,
        detections: f.detections.max(b.detections),
    })
}

/// Diagnostic written next to merged results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeReport {
    pub video_id: u64,
    pub merge_iou: f64,
    pub graph: MergeGraph,
    pub resolutions: Vec<Edge>,
    pub rider_links: Vec<RiderLink>,
}
