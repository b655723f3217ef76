//! Brute-force evaluator over every small instance on a 1x2 canvas with two
//! frames, written from the metric definition with exact integer
//! arithmetic.

use masktrack::eval::{evaluate, CategoryInfo, GtFile, GtTrack, ResultEntry, VideoInfo};
use masktrack::mask::DenseMask;

const FRAMES: usize = 2;
const CLASSES: [u32; 2] = [1, 2];
const SCORES: [f64; 2] = [0.9, 0.6];

/// Per frame: `None` when absent, else a 2-bit pixel set.
type Segs = [Option<u8>; FRAMES];

fn all_segs() -> Vec<Segs> {
    let cell = [None, Some(0b01), Some(0b10), Some(0b11)];
    let mut out = Vec::new();
    for a in cell {
        for b in cell {
            out.push([a, b]);
        }
    }
    out
}

fn to_rles(segs: &Segs) -> Vec<Option<masktrack::mask::RleMask>> {
    segs.iter()
        .map(|s| {
            s.map(|bits| {
                DenseMask::from_bits(1, 2, vec![bits & 1 != 0, bits & 2 != 0])
                    .unwrap()
                    .to_rle()
            })
        })
        .collect()
}

/// Exact IoU as (intersection, union).
fn iou(a: &Segs, b: &Segs) -> (u32, u32) {
    let (mut i, mut u) = (0, 0);
    for t in 0..FRAMES {
        let (x, y) = (a[t].unwrap_or(0), b[t].unwrap_or(0));
        i += (x & y).count_ones();
        u += (x | y).count_ones();
    }
    (i, u)
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub gt: Vec<(u32, Segs)>,
    /// (class, score, segs); the track id is the position.
    pub preds: Vec<(u32, f64, Segs)>,
}

/// Class AP at threshold `pct / 100`, from the definition: for each recall
/// level r in {0, 0.01, ..., 1}, the best precision at any rank whose recall
/// reaches r.
fn class_ap(inst: &Instance, class: u32, pct: u32) -> f64 {
    let gts: Vec<&Segs> = inst.gt.iter().filter(|g| g.0 == class).map(|g| &g.1).collect();
    let mut preds: Vec<(usize, f64, &Segs)> = inst
        .preds
        .iter()
        .enumerate()
        .filter(|(_, p)| p.0 == class)
        .map(|(i, p)| (i, p.1, &p.2))
        .collect();
    preds.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let n = gts.len() as u32;
    let mut taken = vec![false; gts.len()];
    // (hits, rank) at each prefix
    let mut curve = Vec::new();
    let mut hits = 0u32;
    for (k, p) in preds.iter().enumerate() {
        let mut best: Option<(usize, (u32, u32))> = None;
        for (g, gt) in gts.iter().enumerate() {
            let (i, u) = iou(p.2, gt);
            let passes = u > 0 && 100 * i >= pct * u;
            let better = best.is_none_or(|(_, (bi, bu))| i * bu > bi * u);
            if !taken[g] && passes && better {
                best = Some((g, (i, u)));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            hits += 1;
        }
        curve.push((hits, k as u32 + 1));
    }
    let mut total = 0.0;
    for r in 0..=100u32 {
        let best = curve
            .iter()
            .filter(|&&(h, _)| 100 * h >= r * n)
            .map(|&(h, k)| h as f64 / k as f64)
            .fold(0.0, f64::max);
        total += best;
    }
    total / 101.0
}

pub fn reference_map(inst: &Instance) -> f64 {
    let mut classes: Vec<u32> = inst.gt.iter().map(|g| g.0).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.is_empty() {
        return 0.0;
    }
    let per_class: Vec<f64> = classes
        .iter()
        .map(|&c| (0..10).map(|k| class_ap(inst, c, 50 + 5 * k)).sum::<f64>() / 10.0)
        .collect();
    per_class.iter().sum::<f64>() / per_class.len() as f64
}

pub fn library_map(inst: &Instance) -> f64 {
    let gt = GtFile {
        videos: vec![VideoInfo {
            id: 1,
            height: 1,
            width: 2,
            length: FRAMES,
        }],
        categories: CLASSES
            .iter()
            .map(|&id| CategoryInfo {
                id,
                name: format!("c{id}"),
            })
            .collect(),
        annotations: inst
            .gt
            .iter()
            .enumerate()
            .map(|(i, (c, s))| GtTrack {
                id: i as u64,
                video_id: 1,
                category_id: *c,
                segmentations: to_rles(s),
            })
            .collect(),
    };
    let preds: Vec<ResultEntry> = inst
        .preds
        .iter()
        .enumerate()
        .map(|(i, (c, score, s))| ResultEntry {
            video_id: 1,
            track_id: Some(i as u64),
            category_id: *c,
            score: *score,
            segmentations: to_rles(s),
        })
        .collect();
    evaluate(&preds, &gt).unwrap().map
}

/// Every instance with one to three ground-truth tracks and at most three
/// tracks overall, visited in a fixed order.
pub fn for_each_instance(mut f: impl FnMut(&Instance)) {
    let segs = all_segs();
    let gt_choices: Vec<(u32, Segs)> = CLASSES
        .iter()
        .flat_map(|&c| segs.iter().map(move |&s| (c, s)))
        .collect();
    let pred_choices: Vec<(u32, f64, Segs)> = CLASSES
        .iter()
        .flat_map(|&c| {
            SCORES
                .iter()
                .flat_map(move |&p| all_segs().into_iter().map(move |s| (c, p, s)))
        })
        .collect();

    fn rec<T: Clone>(pool: &[T], k: usize, cur: &mut Vec<T>, out: &mut dyn FnMut(&[T])) {
        if cur.len() == k {
            out(cur);
            return;
        }
        for x in pool {
            cur.push(x.clone());
            rec(pool, k, cur, out);
            cur.pop();
        }
    }

    for num_gt in 1..=3 {
        rec(&gt_choices, num_gt, &mut Vec::new(), &mut |gt| {
            for num_pred in 0..=3 - num_gt {
                rec(&pred_choices, num_pred, &mut Vec::new(), &mut |preds| {
                    f(&Instance {
                        gt: gt.to_vec(),
                        preds: preds.to_vec(),
                    })
                });
            }
        });
    }
}

pub struct ReferenceReport {
    pub instances: usize,
    pub mismatches: usize,
    pub first_mismatch: Option<(Instance, f64, f64)>,
}

pub fn compare_with_reference() -> ReferenceReport {
    let mut report = ReferenceReport {
        instances: 0,
        mismatches: 0,
        first_mismatch: None,
    };
    for_each_instance(|inst| {
        report.instances += 1;
        let (lib, reference) = (library_map(inst), reference_map(inst));
        if (lib - reference).abs() > 1e-12 {
            report.mismatches += 1;
            if report.first_mismatch.is_none() {
                report.first_mismatch = Some((inst.clone(), lib, reference));
            }
        }
    });
    report
}
