use std::f64::consts::TAU;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Curriculum coordinates a pose was generated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PoseProvenance {
    pub scale_index: usize,
    pub view_index: usize,
    pub inplane_index: usize,
}

/// Rigid model-to-camera transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "PoseRecord", try_from = "PoseRecord")]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
    pub provenance: Option<PoseProvenance>,
}

impl Pose {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let pose = Self {
            rotation,
            translation,
            provenance: None,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn with_provenance(mut self, provenance: PoseProvenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if (self.rotation.quaternion().norm() - 1.0).abs() > 1e-6 {
            return Err(GeometryError::InvalidPose("rotation is not a unit quaternion"));
        }
        if !(self.translation.z > 0.0) {
            return Err(GeometryError::InvalidPose("translation must have z > 0"));
        }
        Ok(())
    }

    /// Camera-frame position of model point `p` under isotropic `scale`.
    #[inline]
    pub fn apply(&self, p: &Vector3<f64>, scale: f64) -> Vector3<f64> {
        self.rotation * (p * scale) + self.translation
    }
}

/// Rotation drawn uniformly from SO(3) (Shoemake's subgroup algorithm).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> UnitQuaternion<f64> {
    let u1: f64 = rng.random();
    let a = TAU * rng.random::<f64>();
    let b = TAU * rng.random::<f64>();
    let (r1, r2) = ((1.0 - u1).sqrt(), u1.sqrt());
    UnitQuaternion::new_normalize(Quaternion::new(r2 * b.cos(), r1 * a.sin(), r1 * a.cos(), r2 * b.sin()))
}

/// Wire form of [`Pose`]: quaternion as `[w, x, y, z]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseRecord {
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<PoseProvenance>,
}

impl From<Pose> for PoseRecord {
    fn from(p: Pose) -> Self {
        let q = p.rotation.quaternion();
        Self {
            rotation: [q.w, q.i, q.j, q.k],
            translation: [p.translation.x, p.translation.y, p.translation.z],
            provenance: p.provenance,
        }
    }
}

impl TryFrom<PoseRecord> for Pose {
    type Error = GeometryError;

    fn try_from(r: PoseRecord) -> Result<Self, Self::Error> {
        let [w, x, y, z] = r.rotation;
        let q = Quaternion::new(w, x, y, z);
        if (q.norm() - 1.0).abs() > 1e-6 {
            return Err(GeometryError::InvalidPose("rotation is not a unit quaternion"));
        }
        let pose = Pose {
            rotation: UnitQuaternion::new_unchecked(q),
            translation: Vector3::from(r.translation),
            provenance: r.provenance,
        };
        pose.validate()?;
        Ok(pose)
    }
}
