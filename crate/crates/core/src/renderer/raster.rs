use crate::geometry::{CameraIntrinsics, Pose, TexturedMesh};

/// Vertices closer than this are treated as behind the camera and their
/// triangles dropped.
pub const NEAR_PLANE: f64 = 1e-6;

#[derive(Clone, Copy)]
struct ScreenVertex {
    x: f64,
    y: f64,
    inv_z: f64,
}

/// One covered pixel sample of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct Fragment {
    pub pixel: usize,
    pub triangle: u32,
    /// Camera-space z at the pixel center.
    pub depth: f64,
    screen: [f64; 3],
    inv_z: [f64; 3],
}

impl Fragment {
    /// Perspective-correct barycentric weights of the triangle's corners.
    #[inline]
    pub fn weights(&self) -> [f64; 3] {
        [0, 1, 2].map(|k| self.screen[k] * self.inv_z[k] * self.depth)
    }
}

/// Visits every (triangle, pixel) pair whose pixel center lies inside the
/// projected triangle, edges included. No depth test is applied here.
pub fn for_each_fragment(
    mesh: &TexturedMesh,
    pose: &Pose,
    scale: f64,
    cam: &CameraIntrinsics,
    mut visit: impl FnMut(Fragment),
) {
    let width = cam.width as i64;
    let height = cam.height as i64;
    let screen: Vec<Option<ScreenVertex>> = mesh
        .vertices
        .iter()
        .map(|v| {
            let p = pose.apply(v, scale);
            (p.z > NEAR_PLANE).then(|| {
                let [x, y] = cam.project(&p);
                ScreenVertex { x, y, inv_z: 1.0 / p.z }
            })
        })
        .collect();

    for (index, tri) in mesh.triangles.iter().enumerate() {
        let (Some(a), Some(b), Some(c)) = (
            screen[tri[0] as usize],
            screen[tri[1] as usize],
            screen[tri[2] as usize],
        ) else {
            continue;
        };
        let area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
        if area.abs() < 1e-12 || !area.is_finite() {
            continue;
        }
        let inv_area = 1.0 / area;
        let min_x = a.x.min(b.x).min(c.x);
        let max_x = a.x.max(b.x).max(c.x);
        let min_y = a.y.min(b.y).min(c.y);
        let max_y = a.y.max(b.y).max(c.y);
        // Pixel i is sampled at i + 0.5.
        let x0 = ((min_x - 0.5).ceil() as i64).max(0);
        let x1 = ((max_x - 0.5).floor() as i64).min(width - 1);
        let y0 = ((min_y - 0.5).ceil() as i64).max(0);
        let y1 = ((max_y - 0.5).floor() as i64).min(height - 1);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        // Edge functions are affine in the sample position: step them.
        let e0_dx = (c.y - b.y) * -inv_area;
        let e1_dx = (a.y - c.y) * -inv_area;
        let px0 = x0 as f64 + 0.5;
        for y in y0..=y1 {
            let py = y as f64 + 0.5;
            let mut w0 = ((c.x - b.x) * (py - b.y) - (c.y - b.y) * (px0 - b.x)) * inv_area;
            let mut w1 = ((a.x - c.x) * (py - c.y) - (a.y - c.y) * (px0 - c.x)) * inv_area;
            let row = y as usize * width as usize;
            for x in x0..=x1 {
                let w2 = 1.0 - w0 - w1;
                if w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0 {
                    let inv_z = w0 * a.inv_z + w1 * b.inv_z + w2 * c.inv_z;
                    let depth = 1.0 / inv_z;
                    visit(Fragment {
                        pixel: row + x as usize,
                        triangle: index as u32,
                        depth,
                        screen: [w0, w1, w2],
                        inv_z: [a.inv_z, b.inv_z, c.inv_z],
                    });
                }
                w0 += e0_dx;
                w1 += e1_dx;
            }
        }
    }
}

/// Pixel indices covered by the model, each listed once, ascending.
pub fn object_mask(mesh: &TexturedMesh, pose: &Pose, scale: f64, cam: &CameraIntrinsics) -> Vec<usize> {
    let mut pixels = Vec::new();
    for_each_fragment(mesh, pose, scale, cam, |f| pixels.push(f.pixel));
    pixels.sort_unstable();
    pixels.dedup();
    pixels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use nalgebra::{UnitQuaternion, Vector3};

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64).unwrap()
    }

    #[test]
    fn edge_weights_match_direct_evaluation() {
        let mesh = assets::box_mesh([1.0, 1.0, 1.0], assets::checker_texture(4, [0; 3], [255; 3]));
        let pose = Pose::new(
            UnitQuaternion::from_euler_angles(0.4, 0.7, 0.1),
            Vector3::new(0.1, 0.2, 6.0),
        )
        .unwrap();
        let c = cam();
        let mut count = 0;
        for_each_fragment(&mesh, &pose, 1.0, &c, |f| {
            let tri = mesh.triangles[f.triangle as usize];
            let p: Vec<Vector3<f64>> = tri
                .iter()
                .map(|&i| pose.apply(&mesh.vertices[i as usize], 1.0))
                .collect();
            // Interpolated camera point must project onto the pixel center.
            let w = f.weights();
            let q = p[0] * w[0] + p[1] * w[1] + p[2] * w[2];
            let [u, v] = c.project(&q);
            let (px, py) = ((f.pixel % 64) as f64 + 0.5, (f.pixel / 64) as f64 + 0.5);
            assert!((u - px).abs() < 1e-6 && (v - py).abs() < 1e-6);
            assert!((q.z - f.depth).abs() < 1e-9);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            count += 1;
        });
        assert!(count > 100);
    }

    #[test]
    fn mask_is_inside_projected_bbox() {
        let mesh = assets::uv_sphere(24, 16, assets::checker_texture(4, [0; 3], [255; 3]));
        let pose = Pose::new(UnitQuaternion::identity(), Vector3::new(0.0, 0.0, 5.0)).unwrap();
        let c = cam();
        let b = crate::geometry::project_bbox(&mesh, &pose, &c).unwrap().bbox;
        let mask = object_mask(&mesh, &pose, 1.0, &c);
        assert!(!mask.is_empty());
        for p in mask {
            let (x, y) = ((p % 64) as f64 + 0.5, (p / 64) as f64 + 0.5);
            assert!(x >= b.x_min && x <= b.x_max && y >= b.y_min && y <= b.y_max);
        }
    }
}
