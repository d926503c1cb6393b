use std::f64::consts::TAU;

use image::{Rgb, RgbImage};
use rand::Rng;

use crate::color::{rotate_hue, to_u8};

/// Texture with every texel's hue rotated by `angle` radians.
pub fn hue_shift_texture_by(texture: &RgbImage, angle: f64) -> RgbImage {
    let mut out = texture.clone();
    for p in out.pixels_mut() {
        let rgb = p.0.map(|c| c as f64 / 255.0);
        *p = Rgb(rotate_hue(rgb, angle).map(to_u8));
    }
    out
}

/// Texture with hue rotated by a uniform angle in `[0, 2π)`; returns the angle too.
pub fn hue_shift_texture<R: Rng + ?Sized>(texture: &RgbImage, rng: &mut R) -> (RgbImage, f64) {
    let angle = rng.random_range(0.0..TAU);
    (hue_shift_texture_by(texture, angle), angle)
}
