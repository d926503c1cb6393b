//! Deterministic pose/object schedule for the foreground layer.
//!
//! Advancement order, fastest first: object, in-plane step, view, scale.
//! Scale 0 is the nearest distance, so each epoch starts with the largest
//! projections and ends with the smallest.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::PoseProvenance;
use crate::viewsphere::PoseSpace;

/// What to render next: an object index and its pose-space coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScheduleItem {
    pub object_id: usize,
    pub pose_provenance: PoseProvenance,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumCursor {
    pub scale_index: usize,
    pub view_index: usize,
    pub inplane_index: usize,
    pub object_index: usize,
    pub epoch: u64,
}

impl CurriculumCursor {
    pub fn is_valid(&self, num_objects: usize, space: &PoseSpace) -> bool {
        self.object_index < num_objects
            && self.inplane_index < space.inplane_steps
            && self.view_index < space.num_views()
            && self.scale_index < space.num_scales()
    }

    pub fn current(&self) -> ScheduleItem {
        ScheduleItem {
            object_id: self.object_index,
            pose_provenance: PoseProvenance {
                scale_index: self.scale_index,
                view_index: self.view_index,
                inplane_index: self.inplane_index,
            },
        }
    }

    /// Position within the epoch, counting from 0.
    pub fn ordinal(&self, num_objects: usize, space: &PoseSpace) -> usize {
        ((self.scale_index * space.num_views() + self.view_index) * space.inplane_steps + self.inplane_index)
            * num_objects
            + self.object_index
    }

    /// Returns the current item and the cursor advanced past it.
    pub fn next(&self, num_objects: usize, space: &PoseSpace) -> (ScheduleItem, CurriculumCursor) {
        debug_assert!(self.is_valid(num_objects, space));
        let item = self.current();
        let mut c = *self;
        c.object_index += 1;
        if c.object_index == num_objects {
            c.object_index = 0;
            c.inplane_index += 1;
            if c.inplane_index == space.inplane_steps {
                c.inplane_index = 0;
                c.view_index += 1;
                if c.view_index == space.num_views() {
                    c.view_index = 0;
                    c.scale_index += 1;
                    if c.scale_index == space.num_scales() {
                        c.scale_index = 0;
                        c.epoch += 1;
                    }
                }
            }
        }
        (item, c)
    }
}

/// Uniform, independent draw of object, scale, view and in-plane step.
pub fn random_item<R: Rng + ?Sized>(rng: &mut R, num_objects: usize, space: &PoseSpace) -> ScheduleItem {
    let object_id = rng.random_range(0..num_objects);
    let scale_index = rng.random_range(0..space.num_scales());
    let view_index = rng.random_range(0..space.num_views());
    let inplane_index = rng.random_range(0..space.inplane_steps);
    ScheduleItem {
        object_id,
        pose_provenance: PoseProvenance {
            scale_index,
            view_index,
            inplane_index,
        },
    }
}

/// A source of schedule items that supports retrying the head item: an item
/// is only consumed once it has been placed (or deliberately skipped).
pub trait ItemSource {
    fn peek(&mut self) -> ScheduleItem;
    fn consume(&mut self);
}

#[derive(Debug, Clone)]
pub struct CurriculumSource<'a> {
    pub cursor: CurriculumCursor,
    num_objects: usize,
    space: &'a PoseSpace,
}

impl<'a> CurriculumSource<'a> {
    pub fn new(cursor: CurriculumCursor, num_objects: usize, space: &'a PoseSpace) -> Self {
        Self {
            cursor,
            num_objects,
            space,
        }
    }
}

impl ItemSource for CurriculumSource<'_> {
    fn peek(&mut self) -> ScheduleItem {
        self.cursor.current()
    }

    fn consume(&mut self) {
        self.cursor = self.cursor.next(self.num_objects, self.space).1;
    }
}

/// Random pose sampling; a drawn item stays pending until consumed.
pub struct RandomSource<'a, R: Rng> {
    rng: R,
    pending: Option<ScheduleItem>,
    num_objects: usize,
    space: &'a PoseSpace,
}

impl<'a, R: Rng> RandomSource<'a, R> {
    pub fn new(rng: R, num_objects: usize, space: &'a PoseSpace) -> Self {
        Self {
            rng,
            pending: None,
            num_objects,
            space,
        }
    }
}

impl<R: Rng> ItemSource for RandomSource<'_, R> {
    fn peek(&mut self) -> ScheduleItem {
        let (rng, n, space) = (&mut self.rng, self.num_objects, self.space);
        *self.pending.get_or_insert_with(|| random_item(rng, n, space))
    }

    fn consume(&mut self) {
        self.pending = None;
    }
}
