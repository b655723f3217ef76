//! Optimal assignment on a small cost matrix, then IoU association of
//! segmentation masks with propagated masks.

use masktrack::assign::{associate, hungarian, CostMatrix, Sense};
use masktrack::mask::DenseMask;

fn main() -> masktrack::Result<()> {
    let cost = CostMatrix::from_rows(&[
        vec![4.0, 1.0, 3.0],
        vec![2.0, 0.0, 5.0],
        vec![3.0, 2.0, 2.0],
        vec![1.0, 4.0, 4.0],
    ])?;
    let a = hungarian(&cost, Sense::Minimize)?;
    println!("pairs {:?} total {} unmatched rows {:?}", a.pairs, a.total, a.unmatched_rows);

    let seg = [
        DenseMask::from_rect(20, 20, 2..8, 2..8).to_rle(),
        DenseMask::from_rect(20, 20, 10..18, 10..18).to_rle(),
        DenseMask::from_rect(20, 20, 0..2, 18..20).to_rle(),
    ];
    let prop = [
        DenseMask::from_rect(20, 20, 11..18, 9..17).to_rle(),
        DenseMask::from_rect(20, 20, 3..9, 3..9).to_rle(),
    ];
    let m = associate(&seg, &prop, 0.1)?;
    for p in &m.matches {
        println!("segmentation {} <-> propagated {} (IoU {:.3})", p.seg, p.prop, p.iou);
    }
    println!("new candidates {:?}, unmatched tracks {:?}", m.unmatched_seg, m.unmatched_prop);
    Ok(())
}
