//! Out-of-plane views from a subdivided icosahedron, in-plane steps and
//! camera distances: together they span the foreground pose space.

use std::collections::HashMap;
use std::f64::consts::TAU;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

pub const MAX_SUBDIVISION_LEVEL: u32 = 5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ViewSphereError {
    #[error("subdivision level {0} exceeds the supported maximum of 5")]
    LevelTooHigh(u32),
    #[error("distances must satisfy 0 < near < far (got near = {near}, far = {far})")]
    InvalidDistances { near: f64, far: f64 },
    #[error("need at least two scale levels, got {0}")]
    TooFewLevels(usize),
    #[error("need at least one in-plane step")]
    NoInplaneSteps,
    #[error("scale distances must be strictly increasing")]
    UnorderedDistances,
}

/// Unit view directions; every vertex is a distinct out-of-plane rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewpointSphere {
    pub vertices: Vec<Vector3<f64>>,
    pub subdivision_level: u32,
}

impl ViewpointSphere {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

pub fn expected_vertex_count(level: u32) -> usize {
    10 * 4usize.pow(level) + 2
}

/// The 12 vertices and 20 faces of the regular icosahedron, vertices on the unit sphere.
pub fn icosahedron() -> (Vec<Vector3<f64>>, Vec<[u32; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let vertices = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (vertices, faces)
}

/// Splits every face into four at edge midpoints, reprojecting new vertices to
/// the unit sphere. Shared edges produce one midpoint.
pub fn subdivide_icosahedron(level: u32) -> Result<ViewpointSphere, ViewSphereError> {
    if level > MAX_SUBDIVISION_LEVEL {
        return Err(ViewSphereError::LevelTooHigh(level));
    }
    let (mut vertices, mut faces) = icosahedron();
    for _ in 0..level {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let mut mid = |p: u32, q: u32| {
                let key = (p.min(q), p.max(q));
                *midpoints.entry(key).or_insert_with(|| {
                    vertices.push(((vertices[p as usize] + vertices[q as usize]) / 2.0).normalize());
                    (vertices.len() - 1) as u32
                })
            };
            let ab = mid(a, b);
            let bc = mid(b, c);
            let ca = mid(c, a);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    Ok(ViewpointSphere {
        vertices,
        subdivision_level: level,
    })
}

/// Rotation `Q` with `Q * z = vertex`, followed (in the canonical frame) by an
/// in-plane turn of `inplane_angle` about z.
///
/// The in-plane zero is the projection of world +Z onto the plane orthogonal
/// to `vertex`, or of +X when `vertex` lies within 1e-3 of +-Z. A model posed
/// with `Q^-1` is therefore seen by the camera from direction `vertex`.
pub fn viewpoint_rotation(vertex: &Vector3<f64>, inplane_angle: f64) -> UnitQuaternion<f64> {
    let forward = vertex.normalize();
    let reference = if (forward - Vector3::z()).norm() < 1e-3 || (forward + Vector3::z()).norm() < 1e-3 {
        Vector3::x()
    } else {
        Vector3::z()
    };
    let a = (reference - forward * reference.dot(&forward)).normalize();
    let b = forward.cross(&a);
    let frame = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[a, b, forward]));
    let spin = Rotation3::from_axis_angle(&Vector3::z_axis(), inplane_angle);
    UnitQuaternion::from_rotation_matrix(&(frame * spin))
}

/// Distances whose reciprocals are evenly spaced between `1/near` and `1/far`,
/// so projected size steps linearly from level to level. Nearest first.
pub fn scale_distances(d_near: f64, d_far: f64, num_levels: usize) -> Result<Vec<f64>, ViewSphereError> {
    if !(d_near > 0.0 && d_far > d_near && d_far.is_finite()) {
        return Err(ViewSphereError::InvalidDistances {
            near: d_near,
            far: d_far,
        });
    }
    if num_levels < 2 {
        return Err(ViewSphereError::TooFewLevels(num_levels));
    }
    let (a, b) = (1.0 / d_near, 1.0 / d_far);
    let last = num_levels - 1;
    Ok((0..num_levels)
        .map(|i| match i {
            0 => d_near,
            i if i == last => d_far,
            i => 1.0 / (a + (b - a) * i as f64 / last as f64),
        })
        .collect())
}

/// The full enumerable foreground pose space.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSpace {
    pub sphere: ViewpointSphere,
    pub inplane_steps: usize,
    pub scale_distances: Vec<f64>,
}

impl PoseSpace {
    pub fn new(
        sphere: ViewpointSphere,
        inplane_steps: usize,
        scale_distances: Vec<f64>,
    ) -> Result<Self, ViewSphereError> {
        if inplane_steps == 0 {
            return Err(ViewSphereError::NoInplaneSteps);
        }
        if scale_distances.is_empty()
            || scale_distances.windows(2).any(|w| !(w[1] > w[0]))
            || !(scale_distances[0] > 0.0)
        {
            return Err(ViewSphereError::UnorderedDistances);
        }
        Ok(Self {
            sphere,
            inplane_steps,
            scale_distances,
        })
    }

    pub fn num_views(&self) -> usize {
        self.sphere.len()
    }

    pub fn num_scales(&self) -> usize {
        self.scale_distances.len()
    }

    /// Number of (scale, view, in-plane) tuples.
    pub fn len(&self) -> usize {
        self.num_scales() * self.num_views() * self.inplane_steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn inplane_angle(&self, index: usize) -> f64 {
        TAU * index as f64 / self.inplane_steps as f64
    }

    /// Object-to-camera rotation for a view and in-plane step.
    pub fn rotation(&self, view_index: usize, inplane_index: usize) -> UnitQuaternion<f64> {
        viewpoint_rotation(&self.sphere.vertices[view_index], self.inplane_angle(inplane_index)).inverse()
    }
}
