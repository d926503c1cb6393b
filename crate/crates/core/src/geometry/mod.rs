//! Meshes, camera model, poses and projection.

mod camera;
mod mesh;
pub mod obj;
mod pose;
mod projection;

use std::path::PathBuf;

pub use camera::{perturb_intrinsics, CameraIntrinsics, MAX_INTRINSICS_JITTER};
pub use mesh::{area_weighted_normals, normalize_mesh, Material, TexturedMesh};
pub use obj::{load_mesh, write_mesh};
pub use pose::{random_rotation, Pose, PoseProvenance, PoseRecord};
pub use projection::{project_bbox, project_bbox_scaled, BBox, ProjectedBox};

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("mesh file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: {element} index {index} out of range ({count} defined)")]
    ObjIndexOutOfRange {
        path: PathBuf,
        line: usize,
        element: obj::Element,
        index: i64,
        count: usize,
    },
    #[error("{path}: no textured material (usemtl {material:?})")]
    MissingTexture { path: PathBuf, material: Option<String> },
    #[error("{mesh}: texture {texture} does not exist")]
    TextureNotFound { mesh: PathBuf, texture: PathBuf },
    #[error("texture {path}: {source}")]
    TextureDecode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("triangle {face} references vertex {index} but mesh has {count}")]
    TriangleIndex { face: usize, index: usize, count: usize },
    #[error("attribute counts differ: {vertices} vertices, {normals} normals, {uvs} uvs")]
    AttributeCount {
        vertices: usize,
        normals: usize,
        uvs: usize,
    },
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error("texture is empty")]
    EmptyTexture,
    #[error("all vertices coincide; cannot normalize")]
    ZeroExtent,
    #[error("invalid camera intrinsics {0:?}")]
    InvalidIntrinsics(CameraIntrinsics),
    #[error("intrinsics jitter {0} outside [0, 0.2]")]
    JitterOutOfRange(f64),
    #[error("invalid pose: {0}")]
    InvalidPose(&'static str),
    #[error("vertex {vertex} projects from behind the camera (z = {z})")]
    BehindCamera { vertex: usize, z: f64 },
}
