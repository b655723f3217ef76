use std::collections::{BTreeMap, BTreeSet};

use masktrack::eval::{evaluate, CategoryInfo, GtFile, GtTrack, ResultEntry, VideoInfo};
use masktrack::mask::{DenseMask, RleMask};
use masktrack::pipeline::{MaskSource, Track};
use masktrack::postproc::{associate_passes, merge_tracks, resolve};
use proptest::prelude::*;

const H: usize = 12;
const W: usize = 16;
const FRAMES: usize = 6;

fn rect(r: usize, c: usize, h: usize, w: usize) -> RleMask {
    DenseMask::from_rect(H, W, r..(r + h).min(H), c..(c + w).min(W)).to_rle()
}

fn boxes() -> impl Strategy<Value = (usize, usize, usize, usize)> {
    (0..H - 2, 0..W - 2, 2usize..6, 2usize..6)
}

fn segs() -> impl Strategy<Value = Vec<Option<RleMask>>> {
    prop::collection::vec(
        prop::option::weighted(0.7, boxes().prop_map(|(r, c, h, w)| rect(r, c, h, w))),
        FRAMES,
    )
}

fn gt_file(tracks: &[(u32, Vec<Option<RleMask>>)]) -> GtFile {
    GtFile {
        videos: vec![VideoInfo {
            id: 1,
            height: H,
            width: W,
            length: FRAMES,
        }],
        categories: (1..=2)
            .map(|id| CategoryInfo {
                id,
                name: format!("c{id}"),
            })
            .collect(),
        annotations: tracks
            .iter()
            .enumerate()
            .map(|(i, (c, s))| GtTrack {
                id: i as u64,
                video_id: 1,
                category_id: *c,
                segmentations: s.clone(),
            })
            .collect(),
    }
}

fn predictions(raw: &[(u32, f64, Vec<Option<RleMask>>)]) -> Vec<ResultEntry> {
    raw.iter()
        .enumerate()
        .map(|(i, (c, s, m))| ResultEntry {
            video_id: 1,
            track_id: Some(i as u64),
            category_id: *c,
            score: *s,
            segmentations: m.clone(),
        })
        .collect()
}

fn track_set(max: usize) -> impl Strategy<Value = Vec<Track>> {
    prop::collection::vec(
        (
            1u32..3,
            0.0f64..1.0,
            0..FRAMES,
            1..=FRAMES,
            boxes(),
            -1i64..=1,
        ),
        0..max,
    )
    .prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(id, (category, score, start, len, (r, c, h, w), dx))| {
                let end = (start + len).min(FRAMES);
                let masks: BTreeMap<usize, RleMask> = (start..end)
                    .map(|f| {
                        let shift = (c as i64 + dx * (f - start) as i64).clamp(0, W as i64 - 2);
                        (f, rect(r, shift as usize, h, w))
                    })
                    .collect();
                Track {
                    id: id as u64,
                    category,
                    score,
                    birth: start,
                    sources: masks.keys().map(|&f| (f, MaskSource::Detected)).collect(),
                    masks,
                    detections: len,
                }
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn map_is_a_fraction(
        gt in prop::collection::vec((1u32..3, segs()), 1..4),
        preds in prop::collection::vec((1u32..3, 0.0f64..1.0, segs()), 0..5),
    ) {
        let r = evaluate(&predictions(&preds), &gt_file(&gt)).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.map));
    }

    #[test]
    fn appending_a_lowest_ranked_prediction_never_lowers_map(
        gt in prop::collection::vec((1u32..3, segs()), 1..4),
        preds in prop::collection::vec((1u32..3, 0.1f64..1.0, segs()), 0..5),
        extra in (1u32..3, segs()),
    ) {
        let gt = gt_file(&gt);
        let base = evaluate(&predictions(&preds), &gt).unwrap();
        let mut more = preds.clone();
        more.push((extra.0, 0.0, extra.1));
        let after = evaluate(&predictions(&more), &gt).unwrap();
        prop_assert!(after.map >= base.map - 1e-12, "{} -> {}", base.map, after.map);
    }

    #[test]
    fn file_order_does_not_matter(
        gt in prop::collection::vec((1u32..3, segs()), 1..4),
        preds in prop::collection::vec((1u32..3, 0.0f64..1.0, segs()), 0..5),
    ) {
        let gt = gt_file(&gt);
        let forward = predictions(&preds);
        let mut reversed = forward.clone();
        reversed.reverse();
        prop_assert_eq!(evaluate(&forward, &gt).unwrap(), evaluate(&reversed, &gt).unwrap());
    }

    #[test]
    fn merge_invariants(fwd in track_set(5), bwd in track_set(5), merge_iou in 0.0f64..0.9) {
        let graph = associate_passes(&fwd, &bwd, merge_iou).unwrap();
        let pairs = resolve(&graph, &fwd, &bwd);
        let used_f: BTreeSet<usize> = pairs.iter().map(|e| e.forward).collect();
        let used_b: BTreeSet<usize> = pairs.iter().map(|e| e.backward).collect();
        prop_assert_eq!(used_f.len(), pairs.len());
        prop_assert_eq!(used_b.len(), pairs.len());

        let merged = merge_tracks(&graph, &fwd, &bwd, None).unwrap();
        prop_assert_eq!(merged.len(), fwd.len() + bwd.len() - pairs.len());
        for (i, t) in merged.iter().enumerate() {
            prop_assert_eq!(t.id, i as u64);
        }
        let starts: Vec<usize> = merged
            .iter()
            .map(|t| t.covered_frames().next().unwrap_or(t.birth))
            .collect();
        prop_assert!(starts.windows(2).all(|w| w[0] <= w[1]));

        // Every input frame is still covered by some output track, and every
        // output mask comes from an input.
        for t in fwd.iter().chain(&bwd) {
            for f in t.covered_frames() {
                prop_assert!(merged.iter().any(|m| m.mask(f).is_some_and(|x| !x.is_empty())));
            }
        }
        for m in &merged {
            for (f, mask) in &m.masks {
                prop_assert!(fwd.iter().chain(&bwd).any(|t| t.mask(*f) == Some(mask)));
            }
        }
    }

    #[test]
    fn merging_with_nothing_is_identity(fwd in track_set(6)) {
        let graph = associate_passes(&fwd, &[], 0.5).unwrap();
        let merged = merge_tracks(&graph, &fwd, &[], None).unwrap();
        let strip = |ts: &[Track]| -> Vec<(u32, BTreeMap<usize, RleMask>)> {
            let mut v: Vec<_> = ts.iter().map(|t| (t.category, t.masks.clone())).collect();
            v.sort_by(|a, b| format!("{a:?}").cmp(&format!("{b:?}")));
            v
        };
        prop_assert_eq!(strip(&merged), strip(&fwd));
    }
}
