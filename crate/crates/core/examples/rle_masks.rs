//! Encodes two overlapping masks as column-major run lengths and compares
//! their IoU with a pixel count.

use masktrack::mask::{mask_iou, paint_disk, rle_decode, rle_encode, DenseMask};

fn main() -> masktrack::Result<()> {
    let a = DenseMask::from_rect(8, 10, 1..6, 2..8);
    let mut b = DenseMask::new(8, 10);
    paint_disk(&mut b, 4, 6, 2.5, true);

    let (ra, rb) = (rle_encode(&a), rle_encode(&b));
    println!("a: area {} counts {:?}", a.area(), ra.counts());
    println!("b: area {} counts {:?}", b.area(), rb.counts());
    assert_eq!(rle_decode(&ra)?, a);

    let inter = a.intersection(&b)?.area();
    let union = a.union(&b)?.area();
    println!(
        "IoU from runs {:.4}, from pixels {inter}/{union} = {:.4}",
        mask_iou(&ra, &rb)?,
        inter as f64 / union as f64
    );
    println!("json: {}", serde_json::to_string(&ra).expect("serializable"));
    Ok(())
}
