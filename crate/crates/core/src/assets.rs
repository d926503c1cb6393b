//! Procedural textured meshes, used for demos and tests when no scanned models
//! are at hand.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::{Rgb, RgbImage};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{area_weighted_normals, normalize_mesh, write_mesh, GeometryError, Material, TexturedMesh};

pub fn checker_texture(size: u32, a: [u8; 3], b: [u8; 3]) -> RgbImage {
    let cell = (size / 8).max(1);
    RgbImage::from_fn(size, size, |x, y| {
        if ((x / cell) + (y / cell)).is_multiple_of(2) {
            Rgb(a)
        } else {
            Rgb(b)
        }
    })
}

/// Smooth random color field: a few sinusoids per channel.
pub fn noise_texture<R: Rng + ?Sized>(size: u32, rng: &mut R) -> RgbImage {
    let waves: Vec<[f64; 4]> = (0..9)
        .map(|_| {
            [
                rng.random_range(1.0..8.0),
                rng.random_range(1.0..8.0),
                rng.random_range(0.0..TAU),
                rng.random_range(0.3..1.0),
            ]
        })
        .collect();
    let base: [f64; 3] = [rng.random(), rng.random(), rng.random()];
    RgbImage::from_fn(size, size, |x, y| {
        let (u, v) = (x as f64 / size as f64, y as f64 / size as f64);
        let mut px = [0u8; 3];
        for (c, slot) in px.iter_mut().enumerate() {
            let mut s = 0.0;
            for w in &waves[c * 3..c * 3 + 3] {
                s += w[3] * (TAU * (w[0] * u + w[1] * v) + w[2]).sin();
            }
            let value = base[c] + 0.25 * s;
            *slot = (value.clamp(0.0, 1.0) * 255.0).round() as u8;
        }
        Rgb(px)
    })
}

pub fn stripe_texture(size: u32, colors: &[[u8; 3]], stripes: u32) -> RgbImage {
    RgbImage::from_fn(size, size, |x, _| {
        let i = (x * stripes / size) as usize % colors.len();
        Rgb(colors[i])
    })
}

fn finish(
    vertices: Vec<Vector3<f64>>,
    normals: Option<Vec<Vector3<f64>>>,
    uvs: Vec<[f64; 2]>,
    triangles: Vec<[u32; 3]>,
    texture: RgbImage,
) -> TexturedMesh {
    let normals = normals.unwrap_or_else(|| {
        let group: Vec<usize> = (0..vertices.len()).collect();
        area_weighted_normals(&vertices, &triangles, &group)
    });
    TexturedMesh::new(
        vertices,
        normals,
        uvs,
        triangles,
        Arc::new(texture),
        Material::default(),
    )
    .expect("procedural mesh is well formed")
}

/// Grid over (u, v) in [0,1]^2 with a seam column, mapped through `surface`.
fn parametric(
    segments: u32,
    rings: u32,
    texture: RgbImage,
    surface: impl Fn(f64, f64) -> (Vector3<f64>, Vector3<f64>),
) -> TexturedMesh {
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut uvs = Vec::new();
    for i in 0..=rings {
        for j in 0..=segments {
            let u = j as f64 / segments as f64;
            let v = i as f64 / rings as f64;
            let (p, n) = surface(u, v);
            vertices.push(p);
            normals.push(n);
            uvs.push([u, 1.0 - v]);
        }
    }
    let row = segments + 1;
    let mut triangles = Vec::new();
    for i in 0..rings {
        for j in 0..segments {
            let a = i * row + j;
            let b = a + 1;
            let c = a + row;
            let d = c + 1;
            triangles.push([a, c, b]);
            triangles.push([b, c, d]);
        }
    }
    finish(vertices, Some(normals), uvs, triangles, texture)
}

pub fn uv_sphere(segments: u32, rings: u32, texture: RgbImage) -> TexturedMesh {
    parametric(segments, rings, texture, |u, v| {
        let theta = u * TAU;
        let phi = v * PI;
        let n = Vector3::new(phi.sin() * theta.cos(), phi.cos(), phi.sin() * theta.sin());
        (n, n)
    })
}

pub fn torus(major: f64, minor: f64, texture: RgbImage) -> TexturedMesh {
    parametric(48, 24, texture, |u, v| {
        let (a, b) = (u * TAU, v * TAU);
        let n = Vector3::new(b.cos() * a.cos(), b.sin(), b.cos() * a.sin());
        let center = Vector3::new(major * a.cos(), 0.0, major * a.sin());
        (center + n * minor, n)
    })
}

/// Sphere with low-frequency radial bumps; a stand-in for irregular scans.
pub fn blob<R: Rng + ?Sized>(rng: &mut R, texture: RgbImage) -> TexturedMesh {
    let terms: Vec<[f64; 5]> = (0..5)
        .map(|_| {
            [
                rng.random_range(1..4) as f64,
                rng.random_range(1..4) as f64,
                rng.random_range(0.0..TAU),
                rng.random_range(0.0..TAU),
                rng.random_range(0.04..0.15),
            ]
        })
        .collect();
    let stretch = Vector3::new(
        rng.random_range(0.6..1.0),
        rng.random_range(0.6..1.0),
        rng.random_range(0.6..1.0),
    );
    let radius = move |theta: f64, phi: f64| {
        1.0 + terms
            .iter()
            .map(|t| t[4] * (t[0] * theta + t[2]).sin() * (t[1] * phi + t[3]).cos())
            .sum::<f64>()
    };
    let sphere = parametric(40, 24, texture, |u, v| {
        let (theta, phi) = (u * TAU, v * PI);
        let d = Vector3::new(phi.sin() * theta.cos(), phi.cos(), phi.sin() * theta.sin());
        let p = d.component_mul(&stretch) * radius(theta, phi);
        (p, d)
    });
    // Recompute normals on the deformed surface, welding the seam column.
    let seg = 41usize;
    let group: Vec<usize> = (0..sphere.vertices.len())
        .map(|i| {
            let (r, c) = (i / seg, i % seg);
            if r == 0 {
                0
            } else if r == 24 {
                1
            } else {
                2 + r * seg + if c == seg - 1 { 0 } else { c }
            }
        })
        .collect();
    let normals = area_weighted_normals(&sphere.vertices, &sphere.triangles, &group);
    TexturedMesh { normals, ..sphere }
}

/// Axis-aligned box with the given half extents; each face maps the full texture.
pub fn box_mesh(half: [f64; 3], texture: RgbImage) -> TexturedMesh {
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut uvs = Vec::new();
    let mut triangles = Vec::new();
    let h = Vector3::from(half);
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            let mut n = Vector3::zeros();
            n[axis] = sign;
            let a = Vector3::ith((axis + 1) % 3, 1.0);
            let b = n.cross(&a);
            let base = vertices.len() as u32;
            for (s, t) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                let p = (n + a * s + b * t).component_mul(&h);
                vertices.push(p);
                normals.push(n);
                uvs.push([(s + 1.0) / 2.0, (t + 1.0) / 2.0]);
            }
            triangles.push([base, base + 1, base + 2]);
            triangles.push([base, base + 2, base + 3]);
        }
    }
    finish(vertices, Some(normals), uvs, triangles, texture)
}

/// Closed cylinder along y.
pub fn cylinder(radius: f64, half_height: f64, texture: RgbImage) -> TexturedMesh {
    let segments = 40u32;
    let side = parametric(segments, 1, texture, |u, v| {
        let a = u * TAU;
        let n = Vector3::new(a.cos(), 0.0, a.sin());
        (
            Vector3::new(n.x * radius, half_height - 2.0 * half_height * v, n.z * radius),
            n,
        )
    });
    let TexturedMesh {
        mut vertices,
        mut normals,
        mut uvs,
        mut triangles,
        texture,
        material,
    } = side;
    for sign in [1.0, -1.0] {
        let center = vertices.len() as u32;
        vertices.push(Vector3::new(0.0, sign * half_height, 0.0));
        normals.push(Vector3::new(0.0, sign, 0.0));
        uvs.push([0.5, 0.5]);
        for j in 0..=segments {
            let a = j as f64 / segments as f64 * TAU;
            vertices.push(Vector3::new(a.cos() * radius, sign * half_height, a.sin() * radius));
            normals.push(Vector3::new(0.0, sign, 0.0));
            uvs.push([0.5 + 0.5 * a.cos(), 0.5 + 0.5 * a.sin()]);
        }
        for j in 0..segments {
            let (p, q) = (center + 1 + j, center + 2 + j);
            triangles.push(if sign > 0.0 { [center, q, p] } else { [center, p, q] });
        }
    }
    TexturedMesh::new(vertices, normals, uvs, triangles, texture, material).expect("well formed")
}

fn random_color<R: Rng + ?Sized>(rng: &mut R) -> [u8; 3] {
    [rng.random(), rng.random(), rng.random()]
}

/// One random procedural model, already unit-normalized.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, texture_size: u32) -> TexturedMesh {
    let texture = match rng.random_range(0..3) {
        0 => noise_texture(texture_size, rng),
        1 => {
            let colors: Vec<[u8; 3]> = (0..rng.random_range(2..5)).map(|_| random_color(rng)).collect();
            stripe_texture(texture_size, &colors, rng.random_range(3..12))
        }
        _ => checker_texture(texture_size, random_color(rng), random_color(rng)),
    };
    let mesh = match rng.random_range(0..5) {
        0 => uv_sphere(32, 20, texture),
        1 => box_mesh(
            [
                rng.random_range(0.3..1.0),
                rng.random_range(0.3..1.0),
                rng.random_range(0.3..1.0),
            ],
            texture,
        ),
        2 => cylinder(rng.random_range(0.3..0.8), rng.random_range(0.4..1.0), texture),
        3 => torus(1.0, rng.random_range(0.3..0.6), texture),
        _ => blob(rng, texture),
    };
    let mut mesh = normalize_mesh(&mesh).expect("non-degenerate");
    mesh.material.specular = rng.random_range(0.0..0.4);
    mesh.material.shininess = rng.random_range(4.0..64.0);
    mesh
}

/// Writes `count` random models as `<prefix>_NNN.obj` (+ MTL + PNG) into `dir`.
pub fn write_random_library(
    dir: &Path,
    prefix: &str,
    count: usize,
    seed: u64,
    texture_size: u32,
) -> Result<Vec<PathBuf>, GeometryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| write_mesh(&random_model(&mut rng, texture_size), dir, &format!("{prefix}_{i:03}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn procedural_normals_are_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = random_model(&mut rng, 32);
            assert!(m.normals.iter().all(|n| (n.norm() - 1.0).abs() < 1e-4));
            assert!((m.max_radius() - 1.0).abs() < 1e-6);
            assert!(m.centroid().norm() < 1e-6);
        }
    }

    #[test]
    fn box_normals_point_outward() {
        let m = box_mesh([1.0, 2.0, 3.0], checker_texture(8, [0; 3], [255; 3]));
        for tri in &m.triangles {
            let [a, b, c] = tri.map(|i| m.vertices[i as usize]);
            let face = (b - a).cross(&(c - a));
            assert!(face.dot(&m.normals[tri[0] as usize]) > 0.0);
        }
    }
}
