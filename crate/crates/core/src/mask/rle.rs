use super::{DenseMask, RleMask};
use crate::error::{Error, Result};

/// Encodes in column-major scan order: column 0 top to bottom, then column 1.
pub fn rle_encode(mask: &DenseMask) -> RleMask {
    let (h, w) = mask.size();
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for c in 0..w {
        for r in 0..h {
            let v = mask.get(r, c);
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    RleMask {
        height: h,
        width: w,
        counts,
    }
}

pub fn rle_decode(rle: &RleMask) -> Result<DenseMask> {
    let (h, w) = rle.size();
    let total: u64 = rle.counts.iter().map(|&c| c as u64).sum();
    if total != (h * w) as u64 {
        return Err(Error::MalformedRle(format!(
            "counts sum to {total}, canvas has {} pixels",
            h * w
        )));
    }
    let mut mask = DenseMask::new(h, w);
    let mut pos = 0usize;
    for (i, &run) in rle.counts.iter().enumerate() {
        let run = run as usize;
        if i % 2 == 1 {
            for p in pos..pos + run {
                mask.set(p % h, p / h, true);
            }
        }
        pos += run;
    }
    Ok(mask)
}

/// Number of pixels set in both run sequences (same canvas assumed).
pub(super) fn run_intersection(a: &[u32], b: &[u32]) -> u64 {
    let (mut i, mut j) = (0usize, 0usize);
    let (mut left_a, mut left_b) = (a[0] as u64, b[0] as u64);
    let (mut on_a, mut on_b) = (false, false);
    let mut inter = 0u64;
    while i < a.len() && j < b.len() {
        let step = left_a.min(left_b);
        if on_a && on_b {
            inter += step;
        }
        left_a -= step;
        left_b -= step;
        if left_a == 0 {
            i += 1;
            if i < a.len() {
                left_a = a[i] as u64;
                on_a = !on_a;
            }
        }
        if left_b == 0 {
            j += 1;
            if j < b.len() {
                left_b = b[j] as u64;
                on_b = !on_b;
            }
        }
    }
    inter
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{mask_iou, BinaryMask};
    use proptest::prelude::*;

    #[test]
    fn encode_examples() {
        assert_eq!(rle_encode(&DenseMask::new(3, 3)).counts(), &[9]);

        let mut corner = DenseMask::new(2, 2);
        corner.set(0, 0, true);
        assert_eq!(rle_encode(&corner).counts(), &[0, 1, 3]);

        let full = DenseMask::from_fn(2, 2, |_, _| true);
        assert_eq!(rle_encode(&full).counts(), &[0, 4]);
    }

    #[test]
    fn column_major_scan() {
        // Pixel (row 1, col 0) is the second pixel in column-major order.
        let mut m = DenseMask::new(2, 3);
        m.set(1, 0, true);
        assert_eq!(rle_encode(&m).counts(), &[1, 1, 4]);
        // Pixel (row 0, col 1) is the third.
        let mut m = DenseMask::new(2, 3);
        m.set(0, 1, true);
        assert_eq!(rle_encode(&m).counts(), &[2, 1, 3]);
    }

    #[test]
    fn decode_examples() {
        let zeros = RleMask::new(3, 3, vec![9]).unwrap();
        assert_eq!(rle_decode(&zeros).unwrap(), DenseMask::new(3, 3));

        let ones = RleMask::new(2, 2, vec![0, 4]).unwrap();
        assert_eq!(rle_decode(&ones).unwrap().area(), 4);

        let corner = RleMask::new(2, 2, vec![0, 1, 3]).unwrap();
        let dense = rle_decode(&corner).unwrap();
        assert!(dense.get(0, 0));
        assert_eq!(dense.area(), 1);
        assert_eq!(rle_encode(&dense), corner);
    }

    #[test]
    fn malformed_counts_rejected() {
        assert!(matches!(
            RleMask::new(2, 2, vec![1, 2]),
            Err(Error::MalformedRle(_))
        ));
        assert!(matches!(
            RleMask::new(2, 2, vec![1, 0, 3]),
            Err(Error::MalformedRle(_))
        ));
        let bad = RleMask {
            height: 2,
            width: 2,
            counts: vec![5],
        };
        assert!(matches!(rle_decode(&bad), Err(Error::MalformedRle(_))));
    }

    fn arb_mask() -> impl Strategy<Value = DenseMask> {
        (1usize..=24, 1usize..=24).prop_flat_map(|(h, w)| {
            proptest::collection::vec(any::<bool>(), h * w)
                .prop_map(move |bits| DenseMask::from_bits(h, w, bits).unwrap())
        })
    }

    fn arb_pair() -> impl Strategy<Value = (DenseMask, DenseMask)> {
        (1usize..=20, 1usize..=20).prop_flat_map(|(h, w)| {
            let bits = || proptest::collection::vec(any::<bool>(), h * w);
            (bits(), bits()).prop_map(move |(a, b)| {
                (
                    DenseMask::from_bits(h, w, a).unwrap(),
                    DenseMask::from_bits(h, w, b).unwrap(),
                )
            })
        })
    }

    proptest! {
        #[test]
        fn round_trip(m in arb_mask()) {
            let rle = rle_encode(&m);
            prop_assert_eq!(rle.area(), m.area());
            prop_assert_eq!(rle_decode(&rle).unwrap(), m);
        }

        #[test]
        fn rle_and_dense_geometry_agree((a, b) in arb_pair()) {
            let (ra, rb) = (a.to_rle(), b.to_rle());
            prop_assert_eq!(ra.intersection_area(&rb).unwrap(), a.intersection_area(&b).unwrap());
            let iou = mask_iou(&a, &b).unwrap();
            prop_assert_eq!(mask_iou(&ra, &rb).unwrap(), iou);
            prop_assert!((0.0..=1.0).contains(&iou));
            prop_assert_eq!(mask_iou(&b, &a).unwrap(), iou);
            let inter = a.intersection(&b).unwrap().area();
            let union = a.union(&b).unwrap().area();
            prop_assert_eq!(inter + union, a.area() + b.area());
            if !a.is_empty() {
                prop_assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
            }
        }
    }
}
