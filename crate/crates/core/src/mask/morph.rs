use rand::Rng;

use super::DenseMask;

/// Erosion by a `(2r+1) x (2r+1)` square. Pixels beyond the canvas count as
/// background.
pub fn erode(mask: &DenseMask, radius: usize) -> DenseMask {
    if radius == 0 {
        return mask.clone();
    }
    let inverted = DenseMask::from_fn(mask.height(), mask.width(), |r, c| !mask.get(r, c));
    let grown = square_filter(&inverted, radius, true);
    DenseMask::from_fn(mask.height(), mask.width(), |r, c| !grown.get(r, c))
}

/// Dilation by a `(2r+1) x (2r+1)` square.
pub fn dilate(mask: &DenseMask, radius: usize) -> DenseMask {
    if radius == 0 {
        return mask.clone();
    }
    square_filter(mask, radius, false)
}

// Separable max filter. With `outside_set`, out-of-canvas pixels count as set
// (used to make erosion treat the border as background).
fn square_filter(mask: &DenseMask, radius: usize, outside_set: bool) -> DenseMask {
    let (h, w) = mask.size();
    let mut horizontal = DenseMask::new(h, w);
    for r in 0..h {
        for c in 0..w {
            let lo = c.checked_sub(radius);
            let hi = c + radius;
            let clipped = lo.is_none() || hi >= w;
            let any = (lo.unwrap_or(0)..=hi.min(w - 1)).any(|k| mask.get(r, k));
            horizontal.set(r, c, any || (outside_set && clipped));
        }
    }
    let mut out = DenseMask::new(h, w);
    for c in 0..w {
        for r in 0..h {
            let lo = r.checked_sub(radius);
            let hi = r + radius;
            let clipped = lo.is_none() || hi >= h;
            let any = (lo.unwrap_or(0)..=hi.min(h - 1)).any(|k| horizontal.get(k, c));
            out.set(r, c, any || (outside_set && clipped));
        }
    }
    out
}

/// Set pixels with a 4-neighbour that is unset or off the canvas.
pub fn boundary(mask: &DenseMask) -> DenseMask {
    let (h, w) = mask.size();
    DenseMask::from_fn(h, w, |r, c| {
        if !mask.get(r, c) {
            return false;
        }
        r == 0
            || c == 0
            || r + 1 == h
            || c + 1 == w
            || !mask.get(r - 1, c)
            || !mask.get(r + 1, c)
            || !mask.get(r, c - 1)
            || !mask.get(r, c + 1)
    })
}

/// Shifts by `(dx, dy)` pixels; content leaving the canvas is dropped.
pub fn translate(mask: &DenseMask, dx: i64, dy: i64) -> DenseMask {
    let (h, w) = mask.size();
    DenseMask::from_fn(h, w, |r, c| {
        let sr = r as i64 - dy;
        let sc = c as i64 - dx;
        sr >= 0
            && sc >= 0
            && (sr as usize) < h
            && (sc as usize) < w
            && mask.get(sr as usize, sc as usize)
    })
}

/// Sets (or clears) every pixel within Euclidean distance `radius` of
/// `(row, col)`.
pub fn paint_disk(mask: &mut DenseMask, row: usize, col: usize, radius: f64, value: bool) {
    let (h, w) = mask.size();
    let reach = radius.floor() as usize;
    for r in row.saturating_sub(reach)..=(row + reach).min(h - 1) {
        for c in col.saturating_sub(reach)..=(col + reach).min(w - 1) {
            let (dr, dc) = (r as f64 - row as f64, c as f64 - col as f64);
            if dr * dr + dc * dc <= radius * radius {
                mask.set(r, c, value);
            }
        }
    }
}

/// Ragged-boundary perturbation: each pixel on either side of the contour,
/// with probability `level`, stamps a radius-1 disk that randomly adds or
/// removes foreground.
pub fn jitter_boundary(mask: &DenseMask, level: f64, rng: &mut impl Rng) -> DenseMask {
    let level = level.clamp(0.0, 1.0);
    if level == 0.0 {
        return mask.clone();
    }
    let (h, w) = mask.size();
    let inner = boundary(mask);
    let outer = DenseMask::from_fn(h, w, |r, c| {
        !mask.get(r, c)
            && ((r > 0 && mask.get(r - 1, c))
                || (r + 1 < h && mask.get(r + 1, c))
                || (c > 0 && mask.get(r, c - 1))
                || (c + 1 < w && mask.get(r, c + 1)))
    });
    let mut out = mask.clone();
    for r in 0..h {
        for c in 0..w {
            if (inner.get(r, c) || outer.get(r, c)) && rng.gen_bool(level) {
                let value = rng.gen_bool(0.5);
                paint_disk(&mut out, r, c, 1.0, value);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erode_dilate_square() {
        let m = DenseMask::from_rect(9, 9, 2..7, 2..7);
        assert_eq!(erode(&m, 1), DenseMask::from_rect(9, 9, 3..6, 3..6));
        assert_eq!(dilate(&m, 1), DenseMask::from_rect(9, 9, 1..8, 1..8));
        assert_eq!(erode(&m, 3).area(), 0);
    }

    #[test]
    fn erosion_treats_border_as_background() {
        let full = DenseMask::from_fn(5, 5, |_, _| true);
        assert_eq!(erode(&full, 1), DenseMask::from_rect(5, 5, 1..4, 1..4));
    }

    #[test]
    fn boundary_of_rect() {
        let m = DenseMask::from_rect(6, 6, 1..5, 1..5);
        assert_eq!(boundary(&m).area(), 12);
    }

    #[test]
    fn jitter_is_identity_at_zero_and_local_otherwise() {
        use rand::SeedableRng;
        let m = DenseMask::from_rect(20, 20, 5..15, 5..15);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        assert_eq!(jitter_boundary(&m, 0.0, &mut rng), m);
        let j = jitter_boundary(&m, 0.5, &mut rng);
        assert_ne!(j, m);
        // Changes stay within two pixels of the contour.
        assert!(erode(&m, 2).difference(&j).unwrap().is_empty());
        assert!(j.difference(&dilate(&m, 2)).unwrap().is_empty());
    }

    #[test]
    fn disk_painting() {
        let mut m = DenseMask::new(5, 5);
        paint_disk(&mut m, 2, 2, 1.0, true);
        assert_eq!(m.area(), 5);
        paint_disk(&mut m, 0, 0, 1.5, true);
        assert!(m.get(1, 1));
    }

    #[test]
    fn translate_clips() {
        let m = DenseMask::from_rect(4, 4, 0..2, 0..2);
        assert_eq!(translate(&m, 2, 2), DenseMask::from_rect(4, 4, 2..4, 2..4));
        assert_eq!(translate(&m, 1, 0), DenseMask::from_rect(4, 4, 0..2, 1..3));
        assert!(translate(&m, 4, 0).is_empty());
    }
}
