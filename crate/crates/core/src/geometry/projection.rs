use serde::{Deserialize, Serialize};

use super::{CameraIntrinsics, GeometryError, Pose, TexturedMesh};

/// Axis-aligned rectangle in continuous pixel coordinates. Pixel `(i, j)` spans
/// `[i, i+1) x [j, j+1)` and is sampled at its center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn width(&self) -> f64 {
        (self.x_max - self.x_min).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.y_max - self.y_min).max(0.0)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn max_dimension(&self) -> f64 {
        self.width().max(self.height())
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Intersection area over the smaller box's area.
    pub fn overlap_ratio(&self, other: &BBox) -> f64 {
        let smaller = self.area().min(other.area());
        if smaller <= 0.0 {
            return 0.0;
        }
        self.intersection_area(other) / smaller
    }

    pub fn clip(&self, width: u32, height: u32) -> BBox {
        let (w, h) = (width as f64, height as f64);
        BBox {
            x_min: self.x_min.clamp(0.0, w),
            y_min: self.y_min.clamp(0.0, h),
            x_max: self.x_max.clamp(0.0, w),
            y_max: self.y_max.clamp(0.0, h),
        }
    }

    pub fn is_strictly_inside(&self, width: u32, height: u32) -> bool {
        self.x_min > 0.0 && self.y_min > 0.0 && self.x_max < width as f64 && self.y_max < height as f64
    }

    /// COCO layout `[x, y, w, h]`.
    pub fn to_xywh(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.width(), self.height()]
    }

    pub fn from_xywh([x, y, w, h]: [f64; 4]) -> BBox {
        BBox {
            x_min: x,
            y_min: y,
            x_max: x + w,
            y_max: y + h,
        }
    }
}

/// Result of projecting a whole model: the image-clipped box, the unclipped
/// box and the fraction of the unclipped box cut away by the image border.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedBox {
    pub bbox: BBox,
    pub unclipped: BBox,
    pub truncation: f64,
}

pub fn project_bbox(mesh: &TexturedMesh, pose: &Pose, cam: &CameraIntrinsics) -> Result<ProjectedBox, GeometryError> {
    project_bbox_scaled(mesh, pose, 1.0, cam)
}

/// [`project_bbox`] for a model under isotropic `scale`.
pub fn project_bbox_scaled(
    mesh: &TexturedMesh,
    pose: &Pose,
    scale: f64,
    cam: &CameraIntrinsics,
) -> Result<ProjectedBox, GeometryError> {
    let mut b = BBox {
        x_min: f64::INFINITY,
        y_min: f64::INFINITY,
        x_max: f64::NEG_INFINITY,
        y_max: f64::NEG_INFINITY,
    };
    for (index, v) in mesh.vertices.iter().enumerate() {
        let p = pose.apply(v, scale);
        if !(p.z > 1e-9) {
            return Err(GeometryError::BehindCamera { vertex: index, z: p.z });
        }
        let [u, w] = cam.project(&p);
        b.x_min = b.x_min.min(u);
        b.x_max = b.x_max.max(u);
        b.y_min = b.y_min.min(w);
        b.y_max = b.y_max.max(w);
    }
    let clipped = b.clip(cam.width, cam.height);
    let full = b.area();
    let truncation = if full > 0.0 {
        (1.0 - clipped.area() / full).clamp(0.0, 1.0)
    } else if b.is_strictly_inside(cam.width, cam.height) {
        0.0
    } else {
        1.0
    };
    Ok(ProjectedBox {
        bbox: clipped,
        unclipped: b,
        truncation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use nalgebra::{UnitQuaternion, Vector3};
    use proptest::prelude::*;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 480.0, 360.0, 960, 720).unwrap()
    }

    fn sphere() -> TexturedMesh {
        assets::uv_sphere(96, 64, assets::checker_texture(8, [255; 3], [0; 3]))
    }

    /// Scalar pinhole projection written out longhand.
    fn oracle_bbox(mesh: &TexturedMesh, pose: &Pose, cam: &CameraIntrinsics) -> [f64; 4] {
        let r = pose.rotation.to_rotation_matrix();
        let m = r.matrix();
        let t = pose.translation;
        let mut out = [f64::MAX, f64::MAX, f64::MIN, f64::MIN];
        for v in &mesh.vertices {
            let x = m[(0, 0)] * v.x + m[(0, 1)] * v.y + m[(0, 2)] * v.z + t.x;
            let y = m[(1, 0)] * v.x + m[(1, 1)] * v.y + m[(1, 2)] * v.z + t.y;
            let z = m[(2, 0)] * v.x + m[(2, 1)] * v.y + m[(2, 2)] * v.z + t.z;
            let u = cam.fx * x / z + cam.cx;
            let w = cam.fy * y / z + cam.cy;
            out[0] = out[0].min(u);
            out[1] = out[1].min(w);
            out[2] = out[2].max(u);
            out[3] = out[3].max(w);
        }
        out
    }

    #[test]
    fn unit_sphere_at_depth_four() {
        // Silhouette of a unit sphere at distance 4 has tangent half-angle
        // asin(1/4); its half-width on the image is f * tan(asin(1/4)) = f / sqrt(15).
        // Dense direct sampling of the sphere surface gives the oracle value.
        let c = cam();
        let mut half = 0.0f64;
        let n = 2000;
        for i in 0..n {
            let theta = std::f64::consts::PI * 2.0 * i as f64 / n as f64;
            for j in 0..200 {
                let phi = std::f64::consts::PI * j as f64 / 199.0;
                let p = Vector3::new(phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos() + 4.0);
                half = half.max((c.fx * p.x / p.z).abs());
            }
        }
        assert!((half - 500.0 / 15f64.sqrt()).abs() < 0.05);

        let pose = Pose::new(UnitQuaternion::identity(), Vector3::new(0.0, 0.0, 4.0)).unwrap();
        let p = project_bbox(&sphere(), &pose, &c).unwrap();
        let cx = (p.bbox.x_min + p.bbox.x_max) / 2.0;
        let cy = (p.bbox.y_min + p.bbox.y_max) / 2.0;
        assert!((cx - 480.0).abs() < 1e-6 && (cy - 360.0).abs() < 0.2);
        // The tessellated sphere sits inside the true silhouette.
        assert!((p.bbox.width() / 2.0 - half).abs() < 0.5, "{}", p.bbox.width() / 2.0);
        assert_eq!(p.truncation, 0.0);
    }

    /// Andrew's monotone chain.
    fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cross =
            |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
        let mut hull: Vec<[f64; 2]> = Vec::new();
        for pass in 0..2 {
            let start = hull.len();
            let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
                Box::new(pts.iter())
            } else {
                Box::new(pts.iter().rev())
            };
            for &p in iter {
                while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                    hull.pop();
                }
                hull.push(p);
            }
            hull.pop();
        }
        hull
    }

    #[test]
    fn left_border_truncates_half() {
        let c = cam();
        // Off-axis perspective skews the silhouette, so re-center the projected
        // box (not the model origin) on x = 0.
        let mut pose = Pose::new(UnitQuaternion::identity(), c.unproject(0.0, 360.0, 8.0)).unwrap();
        for _ in 0..4 {
            let u = project_bbox(&sphere(), &pose, &c).unwrap().unclipped;
            pose.translation.x -= (u.x_min + u.x_max) / 2.0 * pose.translation.z / c.fx;
        }
        let p = project_bbox(&sphere(), &pose, &c).unwrap();
        // Oracle: pixel count of the projected convex hull, all vs. x >= 0.
        let pts: Vec<[f64; 2]> = sphere()
            .vertices
            .iter()
            .map(|v| c.project(&pose.apply(v, 1.0)))
            .collect();
        let hull = convex_hull(pts);
        let inside_hull = |x: f64, y: f64| {
            (0..hull.len()).all(|i| {
                let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
                (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]) >= 0.0
            })
        };
        let (mut total, mut kept) = (0usize, 0usize);
        for y in -200..900 {
            for x in -200..200 {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                if inside_hull(px, py) {
                    total += 1;
                    if px >= 0.0 {
                        kept += 1;
                    }
                }
            }
        }
        assert!(total > 1000);
        let oracle = 1.0 - kept as f64 / total as f64;
        assert!((oracle - 0.5).abs() < 0.02, "oracle {oracle}");
        assert!((p.truncation - oracle).abs() < 0.02, "{} vs {oracle}", p.truncation);
    }

    #[test]
    fn behind_camera_is_an_error() {
        let pose = Pose::new(UnitQuaternion::identity(), Vector3::new(0.0, 0.0, 0.5)).unwrap();
        assert!(matches!(
            project_bbox(&sphere(), &pose, &cam()),
            Err(GeometryError::BehindCamera { .. })
        ));
    }

    #[test]
    fn overlap_ratio_uses_smaller_box() {
        let a = BBox {
            x_min: 0.0,
            y_min: 0.0,
            x_max: 10.0,
            y_max: 10.0,
        };
        let b = BBox {
            x_min: 5.0,
            y_min: 5.0,
            x_max: 7.0,
            y_max: 7.0,
        };
        assert_eq!(a.overlap_ratio(&b), 1.0);
        let c = BBox {
            x_min: 8.0,
            y_min: 0.0,
            x_max: 18.0,
            y_max: 10.0,
        };
        assert!((a.overlap_ratio(&c) - 0.2).abs() < 1e-12);
        let d = BBox {
            x_min: 20.0,
            y_min: 0.0,
            x_max: 30.0,
            y_max: 10.0,
        };
        assert_eq!(a.overlap_ratio(&d), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matches_scalar_oracle(
            roll in -3.1f64..3.1, pitch in -1.5f64..1.5, yaw in -3.1f64..3.1,
            x in -3.0f64..3.0, y in -3.0f64..3.0, z in 2.5f64..20.0,
        ) {
            let mesh = sphere();
            let c = cam();
            let pose = Pose::new(UnitQuaternion::from_euler_angles(roll, pitch, yaw), Vector3::new(x, y, z)).unwrap();
            let p = project_bbox(&mesh, &pose, &c).unwrap();
            let o = oracle_bbox(&mesh, &pose, &c);
            let u = p.unclipped;
            prop_assert!((u.x_min - o[0]).abs() < 1e-4 && (u.y_min - o[1]).abs() < 1e-4);
            prop_assert!((u.x_max - o[2]).abs() < 1e-4 && (u.y_max - o[3]).abs() < 1e-4);
            if u.is_strictly_inside(c.width, c.height) {
                prop_assert_eq!(p.truncation, 0.0);
            }
        }

        #[test]
        fn rigid_invariance(
            roll in -3.1f64..3.1, pitch in -1.5f64..1.5, yaw in -3.1f64..3.1,
            r2 in -3.1f64..3.1, p2 in -1.5f64..1.5, y2 in -3.1f64..3.1,
            z in 3.0f64..12.0,
        ) {
            let mesh = assets::box_mesh([1.0, 0.6, 0.3], assets::checker_texture(4, [9; 3], [200; 3]));
            let c = cam();
            let pose = Pose::new(UnitQuaternion::from_euler_angles(roll, pitch, yaw), Vector3::new(0.2, -0.4, z)).unwrap();
            let extra = UnitQuaternion::from_euler_angles(r2, p2, y2);
            let mut rotated = mesh.clone();
            for v in &mut rotated.vertices {
                *v = extra * *v;
            }
            let composed = Pose::new(pose.rotation * extra.inverse(), pose.translation).unwrap();
            let a = project_bbox(&mesh, &pose, &c).unwrap().unclipped;
            let b = project_bbox(&rotated, &composed, &c).unwrap().unclipped;
            prop_assert!((a.x_min - b.x_min).abs() < 1e-4 && (a.x_max - b.x_max).abs() < 1e-4);
            prop_assert!((a.y_min - b.y_min).abs() < 1e-4 && (a.y_max - b.y_max).abs() < 1e-4);
        }
    }
}
