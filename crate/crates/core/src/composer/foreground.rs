use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ComposeError, Layer, PlacedObject};
use crate::curriculum::{ItemSource, ScheduleItem};
use crate::geometry::{project_bbox, CameraIntrinsics, Pose, ProjectedBox, TexturedMesh};
use crate::renderer::object_mask;
use crate::viewsphere::PoseSpace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForegroundConstraints {
    pub max_truncation: f64,
    /// Bbox intersection over the smaller bbox area.
    pub max_overlap: f64,
    pub attempts: usize,
    pub max_objects: usize,
}

impl Default for ForegroundConstraints {
    fn default() -> Self {
        Self {
            max_truncation: 0.5,
            max_overlap: 0.3,
            attempts: 100,
            max_objects: 12,
        }
    }
}

/// Foreground placements of one image.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForegroundScene {
    pub placements: Vec<PlacedObject>,
    pub items: Vec<ScheduleItem>,
    pub boxes: Vec<ProjectedBox>,
    /// Items consumed without placement: they failed even in an empty scene.
    pub skipped: Vec<ScheduleItem>,
    /// Union mask of the placements; only tracked with a coverage target.
    pub mask: Option<Vec<bool>>,
}

impl ForegroundScene {
    pub fn coverage(&self) -> Option<f64> {
        self.mask
            .as_ref()
            .map(|m| m.iter().filter(|&&b| b).count() as f64 / m.len() as f64)
    }
}

fn try_place<R: Rng + ?Sized>(
    rng: &mut R,
    item: &ScheduleItem,
    mesh: &TexturedMesh,
    space: &PoseSpace,
    cam: &CameraIntrinsics,
    constraints: &ForegroundConstraints,
    boxes: &[ProjectedBox],
) -> Result<Option<(Pose, ProjectedBox)>, ComposeError> {
    let prov = item.pose_provenance;
    let rotation = space.rotation(prov.view_index, prov.inplane_index);
    let distance = space.scale_distances[prov.scale_index];
    for _ in 0..constraints.attempts {
        let u = rng.random_range(0.0..cam.width as f64);
        let v = rng.random_range(0.0..cam.height as f64);
        let pose = Pose::new(rotation, cam.unproject(u, v, distance))?.with_provenance(prov);
        let projected = project_bbox(mesh, &pose, cam)?;
        if projected.truncation > constraints.max_truncation {
            continue;
        }
        if boxes
            .iter()
            .any(|b| b.bbox.overlap_ratio(&projected.bbox) > constraints.max_overlap)
        {
            continue;
        }
        return Ok(Some((pose, projected)));
    }
    Ok(None)
}

/// Places schedule items one after another, each at the first of up to
/// `attempts` uniform image locations that satisfies the truncation and
/// overlap limits. The scene ends at the first item that cannot be placed;
/// that item stays pending in `source` for the next scene. An item that fails
/// in an empty scene can never be placed and is consumed as skipped.
///
/// With `coverage_target`, the object limit is replaced by a stop rule on the
/// union mask: placement ends once the target is reached, keeping the last
/// object only if that lands closer to the target.
pub fn place_foreground<R: Rng + ?Sized, S: ItemSource + ?Sized>(
    rng: &mut R,
    source: &mut S,
    models: &[TexturedMesh],
    space: &PoseSpace,
    cam: &CameraIntrinsics,
    constraints: &ForegroundConstraints,
    coverage_target: Option<f64>,
) -> Result<ForegroundScene, ComposeError> {
    if models.is_empty() {
        return Err(ComposeError::NoModels);
    }
    let n = cam.pixel_count();
    let mut scene = ForegroundScene {
        mask: coverage_target.map(|_| vec![false; n]),
        ..Default::default()
    };
    let goal = coverage_target.map(|t| (t * n as f64).round() as usize);
    let mut covered = 0usize;
    loop {
        if goal.is_none() && scene.placements.len() >= constraints.max_objects {
            break;
        }
        if goal.is_some_and(|g| covered >= g) {
            break;
        }
        let item = source.peek();
        let mesh = &models[item.object_id];
        let Some((pose, projected)) = try_place(rng, &item, mesh, space, cam, constraints, &scene.boxes)? else {
            if scene.placements.is_empty() {
                source.consume();
                scene.skipped.push(item);
                log::warn!("skipping schedule item {item:?}: no valid location in an empty scene");
            }
            break;
        };
        if let (Some(g), Some(mask)) = (goal, scene.mask.as_mut()) {
            let fresh: Vec<usize> = object_mask(mesh, &pose, 1.0, cam)
                .into_iter()
                .filter(|&p| !mask[p])
                .collect();
            let after = covered + fresh.len();
            if after >= g && after - g > g - covered {
                break;
            }
            for p in fresh {
                mask[p] = true;
            }
            covered = after;
        }
        source.consume();
        scene.placements.push(PlacedObject {
            model_id: item.object_id,
            pose,
            scale: 1.0,
            hue_shift: 0.0,
            layer: Layer::Foreground,
        });
        scene.items.push(item);
        scene.boxes.push(projected);
    }
    Ok(scene)
}
