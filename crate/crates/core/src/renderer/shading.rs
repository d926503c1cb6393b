use std::f64::consts::TAU;

use image::RgbImage;
use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Material;

/// A directional light. `direction` points from the surface toward the light,
/// in camera coordinates (so lights in front of the scene have negative z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightSource {
    pub direction: Vector3<f64>,
    pub color: [f64; 3],
    pub ambient: f64,
}

impl LightSource {
    pub fn white(direction: Vector3<f64>, ambient: f64) -> Self {
        Self {
            direction: direction.normalize(),
            color: [1.0; 3],
            ambient,
        }
    }

    /// Component of the direction along the axis pointing back at the camera.
    pub fn elevation(&self) -> f64 {
        -self.direction.z
    }
}

/// Direction uniform over the hemisphere facing the camera; each color channel
/// scaled by a factor in `[1 - jitter, 1]` and the result renormalized so the
/// brightest channel is 1.
pub fn sample_light<R: Rng + ?Sized>(rng: &mut R, color_jitter: f64, ambient_range: [f64; 2]) -> LightSource {
    debug_assert!((0.0..=1.0).contains(&color_jitter));
    // Uniform on the hemisphere: the cosine to the pole is uniform in [0, 1].
    let cos_t: f64 = rng.random_range(0.0..=1.0);
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = rng.random_range(0.0..TAU);
    let direction = Vector3::new(sin_t * phi.cos(), sin_t * phi.sin(), -cos_t);
    let mut color = [1.0; 3];
    if color_jitter > 0.0 {
        for c in &mut color {
            *c = rng.random_range(1.0 - color_jitter..=1.0);
        }
        let max = color.iter().cloned().fold(0.0, f64::max);
        for c in &mut color {
            *c /= max;
        }
    }
    let ambient = if ambient_range[1] > ambient_range[0] {
        rng.random_range(ambient_range[0]..=ambient_range[1])
    } else {
        ambient_range[0]
    };
    LightSource {
        direction,
        color,
        ambient,
    }
}

/// Diffuse and specular contribution of one light, unclamped.
#[inline]
fn direct_term(
    normal: &Vector3<f64>,
    view: &Vector3<f64>,
    light: &LightSource,
    m: &Material,
    base: [f64; 3],
) -> [f64; 3] {
    let n_dot_l = normal.dot(&light.direction);
    let diffuse = m.diffuse * n_dot_l.max(0.0);
    let specular = if m.specular > 0.0 && n_dot_l > 0.0 {
        let r = normal * (2.0 * n_dot_l) - light.direction;
        m.specular * r.dot(view).max(0.0).powf(m.shininess)
    } else {
        0.0
    };
    [0, 1, 2].map(|c| diffuse * base[c] * light.color[c] + specular * light.color[c])
}

/// Phong: `ambient * base + kd * max(0, n.l) * base * light + ks * max(0, r.v)^n * light`,
/// clamped to `[0, 1]` per channel.
pub fn phong_shade(
    normal: &Vector3<f64>,
    view_dir: &Vector3<f64>,
    light: &LightSource,
    material: &Material,
    base_color: [f64; 3],
) -> [f64; 3] {
    shade_lights(normal, view_dir, std::slice::from_ref(light), material, base_color)
}

/// Several lights: direct terms add up, the ambient term uses the strongest
/// ambient level among them.
pub fn shade_lights(
    normal: &Vector3<f64>,
    view_dir: &Vector3<f64>,
    lights: &[LightSource],
    material: &Material,
    base: [f64; 3],
) -> [f64; 3] {
    let ambient = material.ambient * lights.iter().map(|l| l.ambient).fold(0.0, f64::max);
    let mut out = base.map(|b| ambient * b);
    for light in lights {
        let d = direct_term(normal, view_dir, light, material, base);
        for c in 0..3 {
            out[c] += d[c];
        }
    }
    out.map(|c| c.clamp(0.0, 1.0))
}

#[inline]
fn texel(tex: &RgbImage, x: i64, y: i64) -> [f64; 3] {
    let x = x.clamp(0, tex.width() as i64 - 1) as u32;
    let y = y.clamp(0, tex.height() as i64 - 1) as u32;
    let p = tex.get_pixel(x, y).0;
    [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0]
}

/// Bilinear lookup with clamp-to-edge. `v` runs bottom to top as in OBJ, and
/// texel centers sit at half-integer positions.
pub fn sample_bilinear(tex: &RgbImage, uv: [f64; 2]) -> [f64; 3] {
    let x = uv[0] * tex.width() as f64 - 0.5;
    let y = (1.0 - uv[1]) * tex.height() as f64 - 0.5;
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as i64, y0 as i64);
    let t00 = texel(tex, x0, y0);
    let t10 = texel(tex, x0 + 1, y0);
    let t01 = texel(tex, x0, y0 + 1);
    let t11 = texel(tex, x0 + 1, y0 + 1);
    [0, 1, 2].map(|c| {
        let top = t00[c] * (1.0 - fx) + t10[c] * fx;
        let bottom = t01[c] * (1.0 - fx) + t11[c] * fx;
        top * (1.0 - fy) + bottom * fy
    })
}
