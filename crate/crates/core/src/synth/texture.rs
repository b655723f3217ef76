/// Seeded value noise in `[0, 1)`: a hashed lattice every `cell` pixels,
/// smoothstep-interpolated between lattice points.
pub fn value_noise(seed: u64, x: i64, y: i64, cell: i64) -> f32 {
    let (cx, cy) = (x.div_euclid(cell), y.div_euclid(cell));
    let (fx, fy) = (
        x.rem_euclid(cell) as f32 / cell as f32,
        y.rem_euclid(cell) as f32 / cell as f32,
    );
    let smooth = |t: f32| t * t * (3.0 - 2.0 * t);
    let (sx, sy) = (smooth(fx), smooth(fy));
    let v00 = lattice(seed, cx, cy);
    let v10 = lattice(seed, cx + 1, cy);
    let v01 = lattice(seed, cx, cy + 1);
    let v11 = lattice(seed, cx + 1, cy + 1);
    let top = v00 + (v10 - v00) * sx;
    let bottom = v01 + (v11 - v01) * sx;
    top + (bottom - top) * sy
}

/// Two octaves of [`value_noise`].
pub fn fractal_noise(seed: u64, x: i64, y: i64, cell: i64) -> f32 {
    let coarse = value_noise(seed, x, y, cell.max(2));
    let fine = value_noise(seed ^ 0xa5a5_a5a5, x, y, (cell / 2).max(1));
    0.65 * coarse + 0.35 * fine
}

fn lattice(seed: u64, x: i64, y: i64) -> f32 {
    let h = splitmix(seed ^ splitmix(x as u64 ^ splitmix(y as u64)));
    (h >> 40) as f32 / (1u64 << 24) as f32
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fully saturated colour for a hue in `[0, 1)`, darkened to `value`.
pub fn hue_color(hue: f32, value: f32) -> [f32; 3] {
    let h = hue.rem_euclid(1.0) * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [r * value, g * value, b * value]
}
