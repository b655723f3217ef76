use serde::{Deserialize, Serialize};

use crate::categories::{is_rider_class, PERSON};
use crate::error::Result;
use crate::mask::BBox;
use crate::pipeline::Track;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiderLink {
    pub rider: u64,
    pub person: u64,
    /// Frames on which both tracks have masks with overlapping boxes.
    pub frames: Vec<usize>,
}

fn boxes(track: &Track) -> Result<Vec<(usize, BBox)>> {
    track
        .masks
        .iter()
        .filter(|(_, m)| !m.is_empty())
        .map(|(&f, m)| Ok((f, m.tight_bbox()?)))
        .collect()
}

fn co_occurrence(a: &[(usize, BBox)], b: &[(usize, BBox)]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut frames = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                if a[i].1.overlaps(&b[j].1) {
                    frames.push(a[i].0);
                }
                i += 1;
                j += 1;
            }
        }
    }
    frames
}

/// Links each rider-class track to the person track whose box overlaps it
/// on the most frames, then joins fragments of the same class linked to the
/// same person whose covered frame ranges do not overlap. A joined fragment
/// is absorbed into the earliest one (which keeps its id); nothing is
/// deleted or reclassified otherwise.
pub fn human_object_link(tracks: Vec<Track>) -> Result<(Vec<Track>, Vec<RiderLink>)> {
    let all_boxes: Vec<Vec<(usize, BBox)>> = tracks.iter().map(boxes).collect::<Result<_>>()?;
    let persons: Vec<usize> = (0..tracks.len())
        .filter(|&i| tracks[i].category == PERSON)
        .collect();

    let mut links = Vec::new();
    let mut linked_person: Vec<Option<usize>> = vec![None; tracks.len()];
    for (r, rider) in tracks.iter().enumerate() {
        if !is_rider_class(rider.category) {
            continue;
        }
        let mut best: Option<(usize, Vec<usize>)> = None;
        for &p in &persons {
            let frames = co_occurrence(&all_boxes[r], &all_boxes[p]);
            if !frames.is_empty() && best.as_ref().is_none_or(|(_, b)| frames.len() > b.len()) {
                best = Some((p, frames));
            }
        }
        if let Some((p, frames)) = best {
            linked_person[r] = Some(p);
            links.push(RiderLink {
                rider: rider.id,
                person: tracks[p].id,
                frames,
            });
        }
    }

    // Fragments in order of first covered frame; each joins the first
    // compatible identity that ends before it starts.
    let span = |i: usize| {
        let b = &all_boxes[i];
        b.first().zip(b.last()).map(|(f, l)| (f.0, l.0))
    };
    let mut riders: Vec<usize> = (0..tracks.len())
        .filter(|&i| linked_person[i].is_some() && span(i).is_some())
        .collect();
    riders.sort_by_key(|&i| (span(i).unwrap().0, i));
    let mut absorbed_into: Vec<Option<usize>> = vec![None; tracks.len()];
    // (head track, category, person, last covered frame)
    let mut identities: Vec<(usize, u32, usize, usize)> = Vec::new();
    for i in riders {
        let (first, last) = span(i).unwrap();
        let key = (tracks[i].category, linked_person[i].unwrap());
        match identities
            .iter_mut()
            .find(|(_, c, p, end)| (*c, *p) == key && *end < first)
        {
            Some(identity) => {
                absorbed_into[i] = Some(identity.0);
                identity.3 = last;
            }
            None => identities.push((i, key.0, key.1, last)),
        }
    }

    let mut out: Vec<Option<Track>> = tracks.into_iter().map(Some).collect();
    for i in 0..out.len() {
        if let Some(head) = absorbed_into[i] {
            let frag = out[i].take().expect("fragments are absorbed once");
            let target = out[head].as_mut().expect("heads are never absorbed");
            for (f, m) in frag.masks {
                let keep = target.masks.get(&f).is_some_and(|t| !t.is_empty());
                if !keep {
                    if let Some(s) = frag.sources.get(&f) {
                        target.sources.insert(f, *s);
                    }
                    target.masks.insert(f, m);
                }
            }
            target.score = target.score.max(frag.score);
            target.detections += frag.detections;
            target.birth = target.birth.min(frag.birth);
        }
    }
    Ok((out.into_iter().flatten().collect(), links))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::categories::category_id;
    use crate::mask::{DenseMask, RleMask};
    use crate::pipeline::MaskSource;

    fn rect(x: usize) -> RleMask {
        DenseMask::from_rect(32, 32, 8..20, x..x + 8).to_rle()
    }

    fn track(id: u64, category: u32, frames: std::ops::Range<usize>, x: usize) -> Track {
        Track {
            id,
            category,
            score: 0.8,
            birth: frames.start,
            masks: frames.clone().map(|f| (f, rect(x))).collect(),
            sources: frames.map(|f| (f, MaskSource::Detected)).collect(),
            detections: 1,
        }
    }

    #[test]
    fn no_person_leaves_tracks_unchanged() {
        let surf = category_id("surfboard").unwrap();
        let tracks = vec![track(0, surf, 0..10, 2), track(1, surf, 15..31, 2)];
        let (out, links) = human_object_link(tracks.clone()).unwrap();
        assert_eq!(out, tracks);
        assert!(links.is_empty());
    }

    #[test]
    fn surfboard_fragments_join() {
        let surf = category_id("surfboard").unwrap();
        let tracks = vec![
            track(0, PERSON, 0..31, 4),
            track(1, surf, 0..10, 6),
            track(2, surf, 15..31, 6),
        ];
        let (out, links) = human_object_link(tracks).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].id, 1);
        assert_eq!(out[1].covered_frames().count(), 26);
        assert_eq!(links.len(), 2);
        assert!(links.iter().all(|l| l.person == 0));
        assert_eq!(links[0].frames, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn overlapping_fragments_stay_apart() {
        let surf = category_id("surfboard").unwrap();
        let tracks = vec![
            track(0, PERSON, 0..31, 4),
            track(1, surf, 0..10, 6),
            track(2, surf, 5..31, 6),
        ];
        assert_eq!(human_object_link(tracks).unwrap().0.len(), 3);
    }

    #[test]
    fn non_rider_classes_are_not_linked() {
        let dog = category_id("dog").unwrap();
        let tracks = vec![
            track(0, PERSON, 0..31, 4),
            track(1, dog, 0..10, 6),
            track(2, dog, 15..31, 6),
        ];
        let (out, links) = human_object_link(tracks.clone()).unwrap();
        assert_eq!(out, tracks);
        assert!(links.is_empty());
    }

    #[test]
    fn links_pick_most_co_occurring_person() {
        let boat = category_id("boat").unwrap();
        let tracks = vec![
            track(0, PERSON, 0..3, 4),
            track(1, PERSON, 0..8, 8),
            track(2, boat, 0..8, 6),
        ];
        let (_, links) = human_object_link(tracks).unwrap();
        assert_eq!(links[0].person, 1);
    }
}
