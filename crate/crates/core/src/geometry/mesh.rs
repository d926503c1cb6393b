use std::sync::Arc;

use image::RgbImage;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Phong coefficients. Colors in MTL files are collapsed to their channel mean;
/// the texture supplies the chroma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub ambient: f64,
    pub diffuse: f64,
    pub specular: f64,
    pub shininess: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            ambient: 1.0,
            diffuse: 0.8,
            specular: 0.15,
            shininess: 20.0,
        }
    }
}

/// A triangle mesh with one RGB texture.
///
/// Vertices are unified: each entry carries its own normal and UV, so a
/// position on a texture seam appears once per distinct UV.
#[derive(Debug, Clone)]
pub struct TexturedMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub normals: Vec<Vector3<f64>>,
    pub uvs: Vec<[f64; 2]>,
    pub triangles: Vec<[u32; 3]>,
    pub texture: Arc<RgbImage>,
    pub material: Material,
}

impl TexturedMesh {
    /// Builds a mesh, checking index ranges and attribute counts.
    pub fn new(
        vertices: Vec<Vector3<f64>>,
        normals: Vec<Vector3<f64>>,
        uvs: Vec<[f64; 2]>,
        triangles: Vec<[u32; 3]>,
        texture: Arc<RgbImage>,
        material: Material,
    ) -> Result<Self, GeometryError> {
        if vertices.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        if normals.len() != vertices.len() || uvs.len() != vertices.len() {
            return Err(GeometryError::AttributeCount {
                vertices: vertices.len(),
                normals: normals.len(),
                uvs: uvs.len(),
            });
        }
        let count = vertices.len();
        for (face, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i as usize >= count) {
                return Err(GeometryError::TriangleIndex {
                    face,
                    index: bad as usize,
                    count,
                });
            }
        }
        if texture.width() == 0 || texture.height() == 0 {
            return Err(GeometryError::EmptyTexture);
        }
        Ok(Self {
            vertices,
            normals,
            uvs,
            triangles,
            texture,
            material,
        })
    }

    pub fn centroid(&self) -> Vector3<f64> {
        let sum: Vector3<f64> = self.vertices.iter().sum();
        sum / self.vertices.len() as f64
    }

    pub fn max_radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Area-weighted vertex normals: each face contributes its unnormalized cross
/// product to its corners. `group` maps every vertex to a smoothing key so that
/// seam duplicates of one position share a normal.
pub fn area_weighted_normals(vertices: &[Vector3<f64>], triangles: &[[u32; 3]], group: &[usize]) -> Vec<Vector3<f64>> {
    let groups = group.iter().copied().max().map_or(0, |m| m + 1);
    let mut acc = vec![Vector3::zeros(); groups];
    for tri in triangles {
        let [a, b, c] = tri.map(|i| vertices[i as usize]);
        let n = (b - a).cross(&(c - a));
        for &i in tri {
            acc[group[i as usize]] += n;
        }
    }
    group
        .iter()
        .map(|&g| {
            let n = acc[g];
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                Vector3::z()
            }
        })
        .collect()
}

/// De-means the mesh and scales it so the farthest vertex sits on the unit sphere.
pub fn normalize_mesh(mesh: &TexturedMesh) -> Result<TexturedMesh, GeometryError> {
    if mesh.vertices.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    let centroid = mesh.centroid();
    let radius = mesh.vertices.iter().map(|v| (v - centroid).norm()).fold(0.0, f64::max);
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(GeometryError::ZeroExtent);
    }
    let mut out = mesh.clone();
    for v in &mut out.vertices {
        *v = (*v - centroid) / radius;
    }
    Ok(out)
}
