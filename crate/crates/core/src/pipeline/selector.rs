use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::GtTrack;
use crate::mask::{mask_iou, DenseMask, Image};
use crate::msn::{heuristic_select, select, MsnModel, Side};

/// Chooses between two non-empty candidate masks for one track on one
/// frame. In the tracker, A is the segmentation mask and B the propagated
/// mask; when merging passes, A is the forward mask and B the backward one.
pub trait Selector {
    fn choose(
        &mut self,
        frame: usize,
        image: &Image,
        mask_a: &DenseMask,
        mask_b: &DenseMask,
    ) -> Result<Side>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SelectorKind {
    Msn,
    Heuristic,
    Oracle,
    AlwaysSeg,
    AlwaysProp,
}

impl SelectorKind {
    pub const ALL: [SelectorKind; 5] = [
        SelectorKind::Msn,
        SelectorKind::Heuristic,
        SelectorKind::Oracle,
        SelectorKind::AlwaysSeg,
        SelectorKind::AlwaysProp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectorKind::Msn => "msn",
            SelectorKind::Heuristic => "heuristic",
            SelectorKind::Oracle => "oracle",
            SelectorKind::AlwaysSeg => "always-seg",
            SelectorKind::AlwaysProp => "always-prop",
        }
    }
}

impl std::str::FromStr for SelectorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        SelectorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown selector {s:?}"))
    }
}

/// Order-symmetrized mask selection network.
#[derive(Clone, Copy, Debug)]
pub struct MsnSelector<'a> {
    pub model: &'a MsnModel,
}

impl Selector for MsnSelector<'_> {
    fn choose(
        &mut self,
        _frame: usize,
        image: &Image,
        mask_a: &DenseMask,
        mask_b: &DenseMask,
    ) -> Result<Side> {
        Ok(select(self.model, image, mask_a, mask_b)?.winner)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct HeuristicSelector;

impl Selector for HeuristicSelector {
    fn choose(
        &mut self,
        _frame: usize,
        image: &Image,
        mask_a: &DenseMask,
        mask_b: &DenseMask,
    ) -> Result<Side> {
        heuristic_select(image, mask_a, mask_b)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct AlwaysSegmentation;

impl Selector for AlwaysSegmentation {
    fn choose(&mut self, _: usize, _: &Image, _: &DenseMask, _: &DenseMask) -> Result<Side> {
        Ok(Side::A)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct AlwaysPropagation;

impl Selector for AlwaysPropagation {
    fn choose(&mut self, _: usize, _: &Image, _: &DenseMask, _: &DenseMask) -> Result<Side> {
        Ok(Side::B)
    }
}

/// Picks the candidate with the higher IoU against the ground-truth object
/// that best matches either candidate. Ties go to A.
#[derive(Clone, Debug)]
pub struct OracleSelector {
    /// Per frame: visible ground-truth masks.
    frames: Vec<Vec<DenseMask>>,
}

impl OracleSelector {
    pub fn new(gt: &[GtTrack], length: usize) -> Self {
        let mut frames = vec![Vec::new(); length];
        for track in gt {
            for (f, seg) in track.segmentations.iter().enumerate().take(length) {
                if let Some(m) = seg {
                    frames[f].push(m.to_dense());
                }
            }
        }
        OracleSelector { frames }
    }
}

impl Selector for OracleSelector {
    fn choose(
        &mut self,
        frame: usize,
        _image: &Image,
        mask_a: &DenseMask,
        mask_b: &DenseMask,
    ) -> Result<Side> {
        let mut best: Option<(f64, f64, f64)> = None;
        for gt in self.frames.get(frame).into_iter().flatten() {
            let (a, b) = (mask_iou(mask_a, gt)?, mask_iou(mask_b, gt)?);
            if best.is_none_or(|(m, _, _)| a.max(b) > m) {
                best = Some((a.max(b), a, b));
            }
        }
        Ok(match best {
            Some((_, a, b)) if b > a => Side::B,
            _ => Side::A,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::erode;

    #[test]
    fn selector_names_round_trip() {
        for k in SelectorKind::ALL {
            assert_eq!(k.name().parse::<SelectorKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert!("best".parse::<SelectorKind>().is_err());
    }

    #[test]
    fn oracle_prefers_ground_truth() {
        let gt = DenseMask::from_rect(16, 16, 2..12, 2..12);
        let track = GtTrack {
            id: 0,
            video_id: 0,
            category_id: 1,
            segmentations: vec![Some(gt.to_rle())],
        };
        let mut oracle = OracleSelector::new(&[track], 1);
        let img = Image::new(16, 16);
        let worse = erode(&gt, 2);
        assert_eq!(oracle.choose(0, &img, &gt, &worse).unwrap(), Side::A);
        assert_eq!(oracle.choose(0, &img, &worse, &gt).unwrap(), Side::B);
        assert_eq!(oracle.choose(0, &img, &gt, &gt).unwrap(), Side::A);
    }
}
