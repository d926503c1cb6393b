use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Largest accepted relative jitter for [`perturb_intrinsics`].
pub const MAX_INTRINSICS_JITTER: f64 = 0.2;

/// Pinhole camera in the OpenCV convention: x right, y down, z forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.width > 0
            && self.height > 0
            && (0.0..self.width as f64).contains(&self.cx)
            && (0.0..self.height as f64).contains(&self.cy);
        if ok {
            Ok(())
        } else {
            Err(GeometryError::InvalidIntrinsics(*self))
        }
    }

    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> [f64; 2] {
        [self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy]
    }

    /// Camera-frame point at depth `z` whose projection is pixel coordinate `(u, v)`.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx * z, (v - self.cy) / self.fy * z, z)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Multiplies each of fx, fy, cx, cy by an independent factor drawn from
/// `[1 - jitter, 1 + jitter]`.
pub fn perturb_intrinsics<R: Rng + ?Sized>(
    base: &CameraIntrinsics,
    rng: &mut R,
    jitter_fraction: f64,
) -> Result<CameraIntrinsics, GeometryError> {
    if !(0.0..=MAX_INTRINSICS_JITTER).contains(&jitter_fraction) {
        return Err(GeometryError::JitterOutOfRange(jitter_fraction));
    }
    if jitter_fraction == 0.0 {
        return Ok(*base);
    }
    let mut factor = || rng.random_range(1.0 - jitter_fraction..=1.0 + jitter_fraction);
    let mut cam = *base;
    cam.fx *= factor();
    cam.fy *= factor();
    cam.cx *= factor();
    cam.cy *= factor();
    cam.cx = cam.cx.min(cam.width as f64 - 1e-6);
    cam.cy = cam.cy.min(cam.height as f64 - 1e-6);
    Ok(cam)
}
