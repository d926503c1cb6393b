//! Deterministic software rasterizer.
//!
//! Each layer is drawn in two passes: a z-buffered visibility pass that keeps
//! the nearest (placement, triangle, weights) per pixel, then one shading pass
//! over visible pixels. Ties in depth keep the earlier placement.

mod raster;
mod shading;

use image::{Rgb, RgbImage};
use nalgebra::Vector3;

pub use raster::{for_each_fragment, object_mask, Fragment, NEAR_PLANE};
pub use shading::{phong_shade, sample_bilinear, sample_light, shade_lights, LightSource};

use crate::color::to_u8;
use crate::composer::{hue_shift_texture_by, PlacedObject};
use crate::geometry::{CameraIntrinsics, TexturedMesh};

/// Per-layer raster: 8-bit color, camera depth (`+inf` where empty) and
/// instance ids (0 = empty, otherwise placement index + 1).
#[derive(Debug, Clone, PartialEq)]
pub struct RenderBuffer {
    pub width: u32,
    pub height: u32,
    pub rgb: RgbImage,
    pub depth: Vec<f64>,
    pub instance: Vec<u32>,
}

impl RenderBuffer {
    pub fn new(width: u32, height: u32) -> Self {
        Self::with_background(RgbImage::new(width, height))
    }

    /// Empty layer whose uncovered pixels show `image`.
    pub fn with_background(image: RgbImage) -> Self {
        let n = image.width() as usize * image.height() as usize;
        Self {
            width: image.width(),
            height: image.height(),
            rgb: image,
            depth: vec![f64::INFINITY; n],
            instance: vec![0; n],
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.instance.len()
    }

    pub fn covered_pixels(&self) -> usize {
        self.instance.iter().filter(|&&i| i != 0).count()
    }

    /// Visible pixel count per placement, indexed by placement index.
    pub fn visible_counts(&self, placements: usize) -> Vec<u64> {
        let mut counts = vec![0u64; placements];
        for &id in &self.instance {
            if id != 0 {
                if let Some(c) = counts.get_mut(id as usize - 1) {
                    *c += 1;
                }
            }
        }
        counts
    }
}

#[derive(Clone, Copy)]
struct Visible {
    placement: u32,
    triangle: u32,
    weights: [f64; 3],
}

/// Renders `placements` into a fresh black layer.
pub fn rasterize(
    placements: &[PlacedObject],
    meshes: &[TexturedMesh],
    cam: &CameraIntrinsics,
    lights: &[LightSource],
) -> RenderBuffer {
    let mut buffer = RenderBuffer::new(cam.width, cam.height);
    rasterize_onto(&mut buffer, placements, meshes, cam, lights);
    buffer
}

/// Renders `placements` over an existing layer, z-testing against its depth.
/// Instance ids are `index + 1` into `placements`.
pub fn rasterize_onto(
    buffer: &mut RenderBuffer,
    placements: &[PlacedObject],
    meshes: &[TexturedMesh],
    cam: &CameraIntrinsics,
    lights: &[LightSource],
) {
    assert_eq!(
        (buffer.width, buffer.height),
        (cam.width, cam.height),
        "layer size must match the camera"
    );
    let n = buffer.pixel_count();
    let mut visible: Vec<Option<Visible>> = vec![None; n];

    for (index, placement) in placements.iter().enumerate() {
        let mesh = &meshes[placement.model_id];
        let id = index as u32 + 1;
        let (depth, instance) = (&mut buffer.depth, &mut buffer.instance);
        for_each_fragment(mesh, &placement.pose, placement.scale, cam, |f| {
            if f.depth < depth[f.pixel] {
                depth[f.pixel] = f.depth;
                instance[f.pixel] = id;
                visible[f.pixel] = Some(Visible {
                    placement: index as u32,
                    triangle: f.triangle,
                    weights: f.weights(),
                });
            }
        });
    }

    // Hue-shifted texture copies, made once per placement that shows up.
    let mut shown = vec![false; placements.len()];
    for slot in visible.iter().flatten() {
        shown[slot.placement as usize] = true;
    }
    let shifted: Vec<Option<RgbImage>> = placements
        .iter()
        .zip(&shown)
        .map(|(p, &shown)| {
            (shown && p.hue_shift != 0.0).then(|| hue_shift_texture_by(&meshes[p.model_id].texture, p.hue_shift))
        })
        .collect();

    let width = buffer.width as usize;
    for (pixel, slot) in visible.iter().enumerate() {
        let Some(v) = slot else { continue };
        let placement = &placements[v.placement as usize];
        let mesh = &meshes[placement.model_id];
        let tri = mesh.triangles[v.triangle as usize];
        let w = v.weights;
        let mut uv = [0.0; 2];
        let mut normal = Vector3::zeros();
        for k in 0..3 {
            let i = tri[k] as usize;
            uv[0] += w[k] * mesh.uvs[i][0];
            uv[1] += w[k] * mesh.uvs[i][1];
            normal += mesh.normals[i] * w[k];
        }
        let mut normal = placement.pose.rotation * normal;
        let len = normal.norm();
        if len > 0.0 {
            normal /= len;
        }
        let (x, y) = ((pixel % width) as f64 + 0.5, (pixel / width) as f64 + 0.5);
        let point = cam.unproject(x, y, buffer.depth[pixel]);
        let view = -point.normalize();
        // Two-sided: shade the side facing the camera.
        if normal.dot(&view) < 0.0 {
            normal = -normal;
        }
        let texture = shifted[v.placement as usize].as_ref().unwrap_or(&mesh.texture);
        let base = sample_bilinear(texture, uv);
        let color = shade_lights(&normal, &view, lights, &mesh.material, base);
        buffer
            .rgb
            .put_pixel((pixel % width) as u32, (pixel / width) as u32, Rgb(color.map(to_u8)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::composer::Layer;
    use crate::geometry::{Material, Pose};
    use nalgebra::UnitQuaternion;
    use std::sync::Arc;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(120.0, 120.0, 40.0, 30.0, 80, 60).unwrap()
    }

    fn quad(texture: RgbImage) -> TexturedMesh {
        // Unit square in the z = 0 plane facing -z; uv (0,0) at the bottom-left.
        TexturedMesh::new(
            vec![
                Vector3::new(-1.0, 1.0, 0.0),
                Vector3::new(1.0, 1.0, 0.0),
                Vector3::new(1.0, -1.0, 0.0),
                Vector3::new(-1.0, -1.0, 0.0),
            ],
            vec![-Vector3::z(); 4],
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
            Arc::new(texture),
            Material {
                ambient: 1.0,
                diffuse: 0.0,
                specular: 0.0,
                shininess: 1.0,
            },
        )
        .unwrap()
    }

    fn place(model_id: usize, z: f64, x: f64) -> PlacedObject {
        PlacedObject {
            model_id,
            pose: Pose::new(UnitQuaternion::identity(), Vector3::new(x, 0.0, z)).unwrap(),
            scale: 1.0,
            hue_shift: 0.0,
            layer: Layer::Foreground,
        }
    }

    fn ambient_light() -> LightSource {
        LightSource::white(Vector3::new(0.0, 0.0, -1.0), 1.0)
    }

    #[test]
    fn empty_scene_is_blank() {
        let b = rasterize(&[], &[], &cam(), &[ambient_light()]);
        assert!(b.instance.iter().all(|&i| i == 0));
        assert!(b.rgb.pixels().all(|p| p.0 == [0, 0, 0]));
        assert!(b.depth.iter().all(|d| d.is_infinite()));
    }

    #[test]
    fn nearer_quad_wins_overlap() {
        let red = quad(RgbImage::from_pixel(2, 2, Rgb([255, 0, 0])));
        let blue = quad(RgbImage::from_pixel(2, 2, Rgb([0, 0, 255])));
        // Far quad drawn first, then the near one, then reversed order.
        for order in [[(0usize, 3.0, -0.4), (1, 2.0, 0.4)], [(1, 2.0, 0.4), (0, 3.0, -0.4)]] {
            let placements: Vec<_> = order.iter().map(|&(m, z, x)| place(m, z, x)).collect();
            let meshes = vec![red.clone(), blue.clone()];
            let b = rasterize(&placements, &meshes, &cam(), &[ambient_light()]);
            let near_id = placements.iter().position(|p| p.model_id == 1).unwrap() as u32 + 1;
            // Center of the image lies inside both quads.
            let center = 30 * 80 + 40;
            assert_eq!(b.instance[center], near_id);
            assert_eq!(b.rgb.get_pixel(40, 30).0, [0, 0, 255]);
            // Instance set iff depth finite.
            for (i, d) in b.instance.iter().zip(&b.depth) {
                assert_eq!(*i != 0, d.is_finite());
            }
        }
    }

    #[test]
    fn visible_counts_partition_covered_pixels() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let meshes: Vec<_> = (0..4).map(|_| assets::random_model(&mut rng, 16)).collect();
        let placements: Vec<_> = (0..4)
            .map(|i| place(i, 4.0 + i as f64 * 0.3, i as f64 * 0.5 - 0.75))
            .collect();
        let b = rasterize(&placements, &meshes, &cam(), &[ambient_light()]);
        let counts = b.visible_counts(4);
        assert_eq!(counts.iter().sum::<u64>() as usize, b.covered_pixels());
    }

    #[test]
    fn rendering_is_bit_identical() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(8);
        let meshes: Vec<_> = (0..3).map(|_| assets::random_model(&mut rng, 32)).collect();
        let mut placements: Vec<_> = (0..3).map(|i| place(i, 3.0 + i as f64, 0.2 * i as f64)).collect();
        placements[1].hue_shift = 1.3;
        let light = LightSource::white(Vector3::new(0.3, -0.2, -1.0), 0.3);
        let a = rasterize(&placements, &meshes, &cam(), &[light]);
        let b = rasterize(&placements, &meshes, &cam(), &[light]);
        assert_eq!(a, b);
    }
}
