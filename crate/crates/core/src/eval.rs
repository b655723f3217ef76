//! Video instance segmentation metrics: spatiotemporal track IoU and
//! COCO-style average precision and recall over IoU thresholds 0.50:0.05:0.95.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, RleMask};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoInfo {
    pub id: u64,
    pub height: usize,
    pub width: usize,
    pub length: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryInfo {
    pub id: u32,
    pub name: String,
}

/// One ground-truth object: a mask per frame, `None` where it is absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtTrack {
    pub id: u64,
    pub video_id: u64,
    pub category_id: u32,
    pub segmentations: Vec<Option<RleMask>>,
}

/// Ground-truth annotation file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GtFile {
    pub videos: Vec<VideoInfo>,
    pub categories: Vec<CategoryInfo>,
    pub annotations: Vec<GtTrack>,
}

/// One predicted track in a result file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub video_id: u64,
    /// Used to break score ties; entries without one rank after those with one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_id: Option<u64>,
    pub category_id: u32,
    pub score: f64,
    pub segmentations: Vec<Option<RleMask>>,
}

/// Sum of per-frame intersections over sum of per-frame unions. Missing
/// frames count as empty; two tracks that are empty everywhere score 0.
pub fn track_iou(pred: &[Option<RleMask>], gt: &[Option<RleMask>]) -> Result<f64> {
    let (mut inter, mut union) = (0u64, 0u64);
    for t in 0..pred.len().max(gt.len()) {
        let p = pred.get(t).and_then(Option::as_ref);
        let g = gt.get(t).and_then(Option::as_ref);
        match (p, g) {
            (Some(p), Some(g)) => {
                let i = p.intersection_area(g)?;
                inter += i;
                union += p.pixel_area() + g.pixel_area() - i;
            }
            (Some(m), None) | (None, Some(m)) => union += m.pixel_area(),
            (None, None) => {}
        }
    }
    Ok(if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    })
}

pub const NUM_THRESHOLDS: usize = 10;

/// `0.50, 0.55, ..., 0.95`, each computed as an exact decimal ratio.
pub fn iou_thresholds() -> [f64; NUM_THRESHOLDS] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

const RECALL_POINTS: usize = 101;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub category_id: u32,
    pub name: String,
    pub num_gt: usize,
    pub num_predictions: usize,
    /// AP at each threshold of [`iou_thresholds`].
    pub ap_by_threshold: Vec<f64>,
    pub ap: f64,
    pub ar1: f64,
    pub ar10: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    #[serde(rename = "mAP")]
    pub map: f64,
    #[serde(rename = "AP50")]
    pub ap50: f64,
    #[serde(rename = "AP75")]
    pub ap75: f64,
    #[serde(rename = "AR1")]
    pub ar1: f64,
    #[serde(rename = "AR10")]
    pub ar10: f64,
    /// Class-averaged AP at each threshold.
    pub ap_by_threshold: Vec<f64>,
    pub per_class: Vec<ClassReport>,
}

impl ApReport {
    /// Aligned plain-text table: the summary row, then one row per class.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>6} {:>6} {:>6} {:>6} {:>6}",
            "", "mAP", "AP50", "AP75", "AR1", "AR10"
        );
        let row = |out: &mut String, name: &str, m: f64, a50: f64, a75: f64, r1: f64, r10: f64| {
            let _ = writeln!(
                out,
                "{:<16} {:>6.1} {:>6.1} {:>6.1} {:>6.1} {:>6.1}",
                name,
                100.0 * m,
                100.0 * a50,
                100.0 * a75,
                100.0 * r1,
                100.0 * r10
            );
        };
        row(
            &mut out, "all", self.map, self.ap50, self.ap75, self.ar1, self.ar10,
        );
        for c in &self.per_class {
            let (a50, a75) = (c.ap_by_threshold[0], c.ap_by_threshold[5]);
            row(&mut out, &c.name, c.ap, a50, a75, c.ar1, c.ar10);
        }
        out
    }
}

impl fmt::Display for ApReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_table())
    }
}

/// Ranking key: higher score first, then lower track id, then file order.
fn rank(entries: &[ResultEntry], i: usize) -> (std::cmp::Reverse<OrdF64>, u64, u64, usize) {
    let e = &entries[i];
    (
        std::cmp::Reverse(OrdF64(e.score)),
        e.track_id.unwrap_or(u64::MAX),
        e.video_id,
        i,
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn validate(predictions: &[ResultEntry], gt: &GtFile) -> Result<()> {
    let categories: HashSet<u32> = gt.categories.iter().map(|c| c.id).collect();
    let videos: BTreeMap<u64, &VideoInfo> = gt.videos.iter().map(|v| (v.id, v)).collect();
    let mut seen = HashSet::new();
    for a in &gt.annotations {
        if !categories.contains(&a.category_id) {
            return Err(Error::UnknownCategory(a.category_id));
        }
        if !videos.contains_key(&a.video_id) {
            return Err(Error::UnknownVideo(a.video_id));
        }
        if !seen.insert((a.video_id, a.id)) {
            return Err(Error::DuplicateTrack {
                video: a.video_id,
                track: a.id,
            });
        }
    }
    let mut seen = HashSet::new();
    for p in predictions {
        if !categories.contains(&p.category_id) {
            return Err(Error::UnknownCategory(p.category_id));
        }
        if !videos.contains_key(&p.video_id) {
            return Err(Error::UnknownVideo(p.video_id));
        }
        if !(0.0..=1.0).contains(&p.score) {
            return Err(Error::Config(format!(
                "prediction score {} outside [0, 1]",
                p.score
            )));
        }
        if let Some(id) = p.track_id {
            if !seen.insert((p.video_id, id)) {
                return Err(Error::DuplicateTrack {
                    video: p.video_id,
                    track: id,
                });
            }
        }
    }
    Ok(())
}

/// Greedy matching in rank order: each prediction takes the unmatched
/// ground truth with the highest IoU at or above `threshold` (lowest index
/// on ties). Returns, per prediction, whether it matched.
pub fn greedy_match(ious: &[Vec<f64>], num_gt: usize, threshold: f64) -> Vec<bool> {
    let mut taken = vec![false; num_gt];
    ious.iter()
        .map(|row| {
            let mut best: Option<(usize, f64)> = None;
            for (g, &iou) in row.iter().enumerate() {
                if taken[g] || iou < threshold {
                    continue;
                }
                if best.is_none_or(|(_, b)| iou > b) {
                    best = Some((g, iou));
                }
            }
            match best {
                Some((g, _)) => {
                    taken[g] = true;
                    true
                }
                None => false,
            }
        })
        .collect()
}

/// 101-point interpolated AP from ranked true/false-positive flags.
pub fn interpolated_ap(tp: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(tp.len());
    let mut recall = Vec::with_capacity(tp.len());
    let (mut hits, mut seen) = (0usize, 0usize);
    for &t in tp {
        seen += 1;
        hits += usize::from(t);
        precision.push(hits as f64 / seen as f64);
        recall.push(hits as f64 / num_gt as f64);
    }
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let total: f64 = (0..RECALL_POINTS)
        .map(|k| {
            let r = k as f64 / (RECALL_POINTS - 1) as f64;
            let idx = recall.partition_point(|&x| x < r);
            precision.get(idx).copied().unwrap_or(0.0)
        })
        .sum();
    total / RECALL_POINTS as f64
}

struct VideoClass {
    preds: Vec<usize>,
    ious: Vec<Vec<f64>>,
    num_gt: usize,
}

pub fn evaluate(predictions: &[ResultEntry], gt: &GtFile) -> Result<ApReport> {
    validate(predictions, gt)?;
    let thresholds = iou_thresholds();
    let classes: BTreeSet<u32> = gt.annotations.iter().map(|a| a.category_id).collect();
    let mut per_class = Vec::new();

    for &category in &classes {
        let videos: BTreeSet<u64> = gt
            .annotations
            .iter()
            .filter(|a| a.category_id == category)
            .map(|a| a.video_id)
            .chain(
                predictions
                    .iter()
                    .filter(|p| p.category_id == category)
                    .map(|p| p.video_id),
            )
            .collect();
        let mut groups = Vec::new();
        for &video_id in &videos {
            let gts: Vec<&GtTrack> = gt
                .annotations
                .iter()
                .filter(|a| a.category_id == category && a.video_id == video_id)
                .collect();
            let mut preds: Vec<usize> = (0..predictions.len())
                .filter(|&i| {
                    predictions[i].category_id == category && predictions[i].video_id == video_id
                })
                .collect();
            preds.sort_by_key(|&i| rank(predictions, i));
            let ious = preds
                .iter()
                .map(|&i| {
                    gts.iter()
                        .map(|g| track_iou(&predictions[i].segmentations, &g.segmentations))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            groups.push(VideoClass {
                preds,
                ious,
                num_gt: gts.len(),
            });
        }
        let num_gt: usize = groups.iter().map(|g| g.num_gt).sum();
        let num_predictions: usize = groups.iter().map(|g| g.preds.len()).sum();

        let mut ap_by_threshold = Vec::with_capacity(NUM_THRESHOLDS);
        let (mut ar1, mut ar10) = (0.0, 0.0);
        for &theta in &thresholds {
            let mut ranked: Vec<(usize, bool)> = Vec::with_capacity(num_predictions);
            let (mut hits1, mut hits10) = (0usize, 0usize);
            for g in &groups {
                let matched = greedy_match(&g.ious, g.num_gt, theta);
                ranked.extend(g.preds.iter().copied().zip(matched.iter().copied()));
                for (k, hits) in [(1, &mut hits1), (10, &mut hits10)] {
                    let top = &g.ious[..g.ious.len().min(k)];
                    *hits += greedy_match(top, g.num_gt, theta)
                        .into_iter()
                        .filter(|&m| m)
                        .count();
                }
            }
            ranked.sort_by_key(|&(i, _)| rank(predictions, i));
            let flags: Vec<bool> = ranked.into_iter().map(|(_, m)| m).collect();
            ap_by_threshold.push(interpolated_ap(&flags, num_gt));
            ar1 += hits1 as f64 / num_gt as f64;
            ar10 += hits10 as f64 / num_gt as f64;
        }
        let ap = ap_by_threshold.iter().sum::<f64>() / NUM_THRESHOLDS as f64;
        let name = gt
            .categories
            .iter()
            .find(|c| c.id == category)
            .map(|c| c.name.clone())
            .unwrap_or_default();
        per_class.push(ClassReport {
            category_id: category,
            name,
            num_gt,
            num_predictions,
            ap_by_threshold,
            ap,
            ar1: ar1 / NUM_THRESHOLDS as f64,
            ar10: ar10 / NUM_THRESHOLDS as f64,
        });
    }

    let mean = |f: &dyn Fn(&ClassReport) -> f64| {
        if per_class.is_empty() {
            0.0
        } else {
            per_class.iter().map(f).sum::<f64>() / per_class.len() as f64
        }
    };
    let ap_by_threshold: Vec<f64> = (0..NUM_THRESHOLDS)
        .map(|k| mean(&|c: &ClassReport| c.ap_by_threshold[k]))
        .collect();
    Ok(ApReport {
        map: mean(&|c| c.ap),
        ap50: ap_by_threshold[0],
        ap75: ap_by_threshold[5],
        ar1: mean(&|c| c.ar1),
        ar10: mean(&|c| c.ar10),
        ap_by_threshold,
        per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::DenseMask;

    fn rect(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Option<RleMask> {
        Some(DenseMask::from_rect(10, 10, rows, cols).to_rle())
    }

    fn gt_file(tracks: Vec<GtTrack>) -> GtFile {
        GtFile {
            videos: vec![VideoInfo {
                id: 1,
                height: 10,
                width: 10,
                length: 4,
            }],
            categories: vec![CategoryInfo {
                id: 7,
                name: "cow".into(),
            }],
            annotations: tracks,
        }
    }

    fn pred(track_id: u64, score: f64, segs: Vec<Option<RleMask>>) -> ResultEntry {
        ResultEntry {
            video_id: 1,
            track_id: Some(track_id),
            category_id: 7,
            score,
            segmentations: segs,
        }
    }

    #[test]
    fn thresholds_are_exact() {
        let t = iou_thresholds();
        assert_eq!(t[0], 0.5);
        assert_eq!(t[2], 0.6);
        assert_eq!(t[5], 0.75);
        assert_eq!(t[9], 0.95);
    }

    #[test]
    fn track_iou_cases() {
        let g = vec![rect(0..4, 0..4); 4];
        assert_eq!(track_iou(&g, &g).unwrap(), 1.0);
        let half = vec![rect(0..4, 0..4), None, rect(0..4, 0..4), None];
        assert_eq!(track_iou(&half, &g).unwrap(), 0.5);
        let apart = vec![rect(6..10, 6..10); 4];
        assert_eq!(track_iou(&apart, &g).unwrap(), 0.0);
        assert_eq!(track_iou(&[], &[]).unwrap(), 0.0);
    }

    #[test]
    fn perfect_predictions() {
        let segs = vec![rect(0..4, 0..4), rect(1..5, 1..5), None, rect(2..6, 2..6)];
        let gt = gt_file(vec![GtTrack {
            id: 0,
            video_id: 1,
            category_id: 7,
            segmentations: segs.clone(),
        }]);
        let r = evaluate(&[pred(0, 1.0, segs)], &gt).unwrap();
        assert_eq!(
            (r.map, r.ap50, r.ap75, r.ar1, r.ar10),
            (1.0, 1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn single_prediction_at_iou_point_six() {
        // 5x4 ground truth against a 3x4 prediction inside it: 12 / 20 = 0.6.
        let gt = gt_file(vec![GtTrack {
            id: 0,
            video_id: 1,
            category_id: 7,
            segmentations: vec![rect(0..5, 0..4)],
        }]);
        let p = pred(0, 0.8, vec![rect(0..3, 0..4)]);
        assert_eq!(
            track_iou(&p.segmentations, &gt.annotations[0].segmentations).unwrap(),
            0.6
        );
        let r = evaluate(&[p], &gt).unwrap();
        assert_eq!(r.per_class[0].ap, 0.3);
        assert_eq!(r.map, 0.3);
    }

    #[test]
    fn empty_predictions() {
        let gt = gt_file(vec![GtTrack {
            id: 0,
            video_id: 1,
            category_id: 7,
            segmentations: vec![rect(0..5, 0..4)],
        }]);
        let r = evaluate(&[], &gt).unwrap();
        assert_eq!((r.map, r.ar1, r.ar10), (0.0, 0.0, 0.0));
    }

    #[test]
    fn validation_errors() {
        let gt = gt_file(vec![]);
        let mut p = pred(0, 0.5, vec![]);
        p.category_id = 99;
        assert!(matches!(
            evaluate(&[p], &gt),
            Err(Error::UnknownCategory(99))
        ));
        let dup = vec![pred(3, 0.5, vec![]), pred(3, 0.4, vec![])];
        assert!(matches!(
            evaluate(&dup, &gt),
            Err(Error::DuplicateTrack { video: 1, track: 3 })
        ));
    }

    #[test]
    fn interpolation_matches_hand_values() {
        // TP, FP, TP with two ground truths: precision envelope [1, 2/3, 2/3].
        let ap = interpolated_ap(&[true, false, true], 2);
        let expected = (51.0 * 1.0 + 50.0 * (2.0 / 3.0)) / 101.0;
        assert!((ap - expected).abs() < 1e-15);
        assert_eq!(interpolated_ap(&[], 3), 0.0);
    }

    #[test]
    fn report_table_lists_classes() {
        let gt = gt_file(vec![GtTrack {
            id: 0,
            video_id: 1,
            category_id: 7,
            segmentations: vec![rect(0..5, 0..4)],
        }]);
        let table = evaluate(&[], &gt).unwrap().to_table();
        assert!(table.contains("mAP") && table.contains("cow"));
    }
}
