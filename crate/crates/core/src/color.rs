//! RGB/HSV conversion on `[0, 1]` channels, hue in radians.

use std::f64::consts::TAU;

pub fn rgb_to_hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let hue = if delta <= 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let saturation = if max > 0.0 { delta / max } else { 0.0 };
    [hue * TAU / 6.0, saturation, max]
}

pub fn hsv_to_rgb([h, s, v]: [f64; 3]) -> [f64; 3] {
    let sector = h.rem_euclid(TAU) / TAU * 6.0;
    let c = v * s;
    let x = c * (1.0 - (sector.rem_euclid(2.0) - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match sector as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [r + m, g + m, b + m]
}

/// Rotates hue by `angle` radians; saturation and value are untouched.
#[inline]
pub fn rotate_hue(rgb: [f64; 3], angle: f64) -> [f64; 3] {
    if angle == 0.0 {
        return rgb;
    }
    let [h, s, v] = rgb_to_hsv(rgb);
    if s == 0.0 {
        return rgb;
    }
    hsv_to_rgb([h + angle, s, v])
}

#[inline]
pub fn to_u8(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}
