use std::f64::consts::{FRAC_PI_4, TAU};

use nalgebra::UnitQuaternion;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ComposeError, Layer, PlacedObject};
use crate::geometry::{project_bbox, random_rotation, CameraIntrinsics, Pose, TexturedMesh};
use crate::renderer::for_each_fragment;
use crate::viewsphere::PoseSpace;

/// Projected diameter in pixels of a sphere of radius `scale` centered on the
/// optical axis at `distance`, using focal length `focal`.
pub fn sphere_diameter(scale: f64, distance: f64, focal: f64) -> f64 {
    2.0 * focal * scale / (distance * distance - scale * scale).sqrt()
}

/// Inverse of [`sphere_diameter`].
pub fn sphere_scale_for_diameter(diameter: f64, distance: f64, focal: f64) -> f64 {
    let r = 0.5 * diameter;
    distance * r / (focal * focal + r * r).sqrt()
}

/// Admissible background scales, expressed for unit-sphere models at a fixed
/// camera distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleRange {
    pub s_min: f64,
    pub s_max: f64,
    /// Mean projected bbox max-dimension of the foreground, in pixels.
    pub average_size: f64,
    pub distance: f64,
    pub focal: f64,
}

impl ScaleRange {
    pub fn diameter(&self, scale: f64) -> f64 {
        sphere_diameter(scale, self.distance, self.focal)
    }

    pub fn scale_for(&self, diameter: f64) -> f64 {
        sphere_scale_for_diameter(diameter, self.distance, self.focal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundSettings {
    /// Size band relative to the average foreground size.
    pub size_multipliers: [f64; 2],
    /// Camera distance all background objects are placed at.
    pub distance: f64,
    /// Lower bound on the per-image sub-range width, as a fraction of the full range.
    pub min_subrange_fraction: f64,
    /// Side of one occupancy cell in pixels.
    pub occupancy_cell: u32,
    pub hue_jitter: bool,
    /// Placement budget as a multiple of the expected object count.
    pub guard_factor: f64,
}

impl Default for BackgroundSettings {
    fn default() -> Self {
        Self {
            size_multipliers: [0.9, 1.5],
            distance: 20.0,
            min_subrange_fraction: 0.1,
            occupancy_cell: 8,
            hue_jitter: true,
            guard_factor: 10.0,
        }
    }
}

/// Average foreground size over all models and scale levels, each model seen
/// with identity rotation at the principal point, converted into the unit
/// sphere scales whose projections span `multipliers` times that size.
pub fn background_scale_range(
    fg_models: &[TexturedMesh],
    space: &PoseSpace,
    cam: &CameraIntrinsics,
    settings: &BackgroundSettings,
) -> Result<ScaleRange, ComposeError> {
    if fg_models.is_empty() {
        return Err(ComposeError::NoModels);
    }
    let mut total = 0.0;
    for mesh in fg_models {
        for &d in &space.scale_distances {
            let pose = Pose::new(UnitQuaternion::identity(), cam.unproject(cam.cx, cam.cy, d))?;
            total += project_bbox(mesh, &pose, cam)?.unclipped.max_dimension();
        }
    }
    let average_size = total / (fg_models.len() * space.num_scales()) as f64;
    let focal = cam.fx.max(cam.fy);
    let [lo, hi] = settings.size_multipliers;
    Ok(ScaleRange {
        s_min: sphere_scale_for_diameter(lo * average_size, settings.distance, focal),
        s_max: sphere_scale_for_diameter(hi * average_size, settings.distance, focal),
        average_size,
        distance: settings.distance,
        focal,
    })
}

/// Background placements of one image and their bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundLayer {
    pub placements: Vec<PlacedObject>,
    /// Per-image scale sub-range.
    pub subrange: [f64; 2],
    /// Projected diameter drawn for each placement.
    pub diameters: Vec<f64>,
    /// Pixels covered by a placement or given as pre-covered, excluding blocked ones.
    pub covered: Vec<bool>,
    pub covered_count: usize,
}

/// Draws the per-image scale sub-range: two sorted uniform draws, widened
/// symmetrically (then shifted back inside) to the minimum width.
fn draw_subrange<R: Rng + ?Sized>(rng: &mut R, range: &ScaleRange, min_fraction: f64) -> [f64; 2] {
    let (lo, hi) = (range.s_min, range.s_max);
    let a = rng.random_range(lo..=hi);
    let b = rng.random_range(lo..=hi);
    let (mut a, mut b) = (a.min(b), a.max(b));
    let min_width = (hi - lo) * min_fraction.clamp(0.0, 1.0);
    if b - a < min_width {
        let mid = 0.5 * (a + b);
        a = mid - 0.5 * min_width;
        b = mid + 0.5 * min_width;
        if a < lo {
            (a, b) = (lo, lo + min_width);
        } else if b > hi {
            (a, b) = (hi - min_width, hi);
        }
    }
    [a, b]
}

/// Candidate pixels grouped into square occupancy cells; a cell leaves the
/// open set once every candidate pixel in it is covered.
struct Occupancy {
    width: usize,
    height: usize,
    cell: usize,
    cells_x: usize,
    remaining: Vec<u32>,
    open: Vec<usize>,
    slot: Vec<usize>,
    covered: Vec<bool>,
    blocked: Option<Vec<bool>>,
    covered_count: usize,
}

impl Occupancy {
    fn new(width: usize, height: usize, cell: usize, blocked: Option<&[bool]>) -> Self {
        let cells_x = width.div_ceil(cell);
        let cells_y = height.div_ceil(cell);
        let mut remaining = vec![0u32; cells_x * cells_y];
        for y in 0..height {
            for x in 0..width {
                if !blocked.is_some_and(|b| b[y * width + x]) {
                    remaining[(y / cell) * cells_x + x / cell] += 1;
                }
            }
        }
        let mut open = Vec::new();
        let mut slot = vec![usize::MAX; remaining.len()];
        for (c, &r) in remaining.iter().enumerate() {
            if r > 0 {
                slot[c] = open.len();
                open.push(c);
            }
        }
        Self {
            width,
            height,
            cell,
            cells_x,
            remaining,
            open,
            slot,
            covered: vec![false; width * height],
            blocked: blocked.map(<[bool]>::to_vec),
            covered_count: 0,
        }
    }

    fn cell_of(&self, pixel: usize) -> usize {
        let (x, y) = (pixel % self.width, pixel / self.width);
        (y / self.cell) * self.cells_x + x / self.cell
    }

    fn is_candidate(&self, pixel: usize) -> bool {
        !self.covered[pixel] && !self.blocked.as_ref().is_some_and(|b| b[pixel])
    }

    /// Marks a pixel covered; returns whether it was newly covered.
    fn cover(&mut self, pixel: usize) -> bool {
        if !self.is_candidate(pixel) {
            return false;
        }
        self.covered[pixel] = true;
        self.covered_count += 1;
        let c = self.cell_of(pixel);
        self.remaining[c] -= 1;
        if self.remaining[c] == 0 {
            let at = self.slot[c];
            let last = *self.open.last().expect("open cell set out of sync");
            self.open.swap_remove(at);
            if last != c {
                self.slot[last] = at;
            }
            self.slot[c] = usize::MAX;
        }
        true
    }

    fn uncover(&mut self, pixel: usize) {
        debug_assert!(self.covered[pixel]);
        self.covered[pixel] = false;
        self.covered_count -= 1;
        let c = self.cell_of(pixel);
        if self.remaining[c] == 0 {
            self.slot[c] = self.open.len();
            self.open.push(c);
        }
        self.remaining[c] += 1;
    }

    /// Uniform open cell, then a uniform candidate pixel inside it.
    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let c = self.open[rng.random_range(0..self.open.len())];
        let (cx, cy) = (c % self.cells_x * self.cell, c / self.cells_x * self.cell);
        let mut candidates = Vec::with_capacity(self.cell * self.cell);
        for y in cy..(cy + self.cell).min(self.height) {
            for x in cx..(cx + self.cell).min(self.width) {
                let p = y * self.width + x;
                if self.is_candidate(p) {
                    candidates.push(p);
                }
            }
        }
        candidates[rng.random_range(0..candidates.len())]
    }
}

/// When to stop adding background objects.
pub(super) enum FillTarget {
    /// Until no candidate pixel is left.
    Full,
    /// Until this fraction of all pixels is covered, keeping the last object
    /// only if that lands closer to the target.
    Fraction(f64),
}

#[allow(clippy::too_many_arguments)]
pub(super) fn fill_background<R: Rng + ?Sized>(
    rng: &mut R,
    pool: &[TexturedMesh],
    cam: &CameraIntrinsics,
    range: &ScaleRange,
    settings: &BackgroundSettings,
    blocked: Option<&[bool]>,
    precovered: &[usize],
    target: FillTarget,
) -> Result<BackgroundLayer, ComposeError> {
    if pool.is_empty() {
        return Err(ComposeError::NoModels);
    }
    let (width, height) = (cam.width as usize, cam.height as usize);
    let n = width * height;
    let mut occ = Occupancy::new(width, height, settings.occupancy_cell.max(1) as usize, blocked);
    for &p in precovered {
        occ.cover(p);
    }
    let subrange = draw_subrange(rng, range, settings.min_subrange_fraction);
    let band = [range.diameter(subrange[0]), range.diameter(subrange[1])];
    let mean_area = FRAC_PI_4 * (0.5 * (band[0] + band[1])).powi(2);
    let guard = (settings.guard_factor * (n as f64 / mean_area).ceil()) as usize + 100;
    let goal = match target {
        FillTarget::Full => None,
        FillTarget::Fraction(f) => Some((f * n as f64).round() as usize),
    };

    let mut placements = Vec::new();
    let mut diameters = Vec::new();
    let mut newly = Vec::new();
    loop {
        if occ.open.is_empty() || goal.is_some_and(|g| occ.covered_count >= g) {
            break;
        }
        if placements.len() >= guard {
            if goal.is_some() {
                break;
            }
            return Err(ComposeError::CoverageNotReached {
                placements: placements.len(),
                uncovered: occ.open.len(),
            });
        }
        let pixel = occ.pick(rng);
        let model_id = rng.random_range(0..pool.len());
        let rotation = random_rotation(rng);
        let diameter = if band[1] > band[0] {
            rng.random_range(band[0]..=band[1])
        } else {
            band[0]
        };
        let hue_shift = if settings.hue_jitter {
            rng.random_range(0.0..TAU)
        } else {
            0.0
        };
        let (u, v) = ((pixel % width) as f64 + 0.5, (pixel / width) as f64 + 0.5);
        let pose = Pose::new(rotation, cam.unproject(u, v, range.distance))?;
        let scale = range.scale_for(diameter);
        let before = occ.covered_count;
        newly.clear();
        for_each_fragment(&pool[model_id], &pose, scale, cam, |f| {
            if occ.cover(f.pixel) {
                newly.push(f.pixel);
            }
        });
        if let Some(g) = goal {
            if occ.covered_count >= g && occ.covered_count - g > g.saturating_sub(before) {
                for &p in &newly {
                    occ.uncover(p);
                }
                break;
            }
        }
        placements.push(PlacedObject {
            model_id,
            pose,
            scale,
            hue_shift,
            layer: Layer::Background,
        });
        diameters.push(diameter);
    }
    Ok(BackgroundLayer {
        placements,
        subrange,
        diameters,
        covered_count: occ.covered_count,
        covered: occ.covered,
    })
}

/// Covers the whole frame with randomly posed, scaled and hue-shifted
/// background models, each centered on a pixel not yet covered.
pub fn compose_background<R: Rng + ?Sized>(
    rng: &mut R,
    pool: &[TexturedMesh],
    cam: &CameraIntrinsics,
    range: &ScaleRange,
    settings: &BackgroundSettings,
) -> Result<BackgroundLayer, ComposeError> {
    fill_background(rng, pool, cam, range, settings, None, &[], FillTarget::Full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::viewsphere::{subdivide_icosahedron, PoseSpace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(300.0, 300.0, 80.0, 60.0, 160, 120).unwrap()
    }

    fn space(distances: Vec<f64>) -> PoseSpace {
        PoseSpace::new(subdivide_icosahedron(0).unwrap(), 1, distances).unwrap()
    }

    fn sphere(radius: f64) -> TexturedMesh {
        let mut m = assets::uv_sphere(96, 64, assets::checker_texture(4, [0; 3], [255; 3]));
        for v in &mut m.vertices {
            *v *= radius;
        }
        m
    }

    #[test]
    fn diameter_inverse_round_trips() {
        for s in [0.1, 1.0, 5.0, 15.0] {
            let d = sphere_diameter(s, 20.0, 800.0);
            assert!((sphere_scale_for_diameter(d, 20.0, 800.0) - s).abs() < 1e-9);
        }
    }

    #[test]
    fn single_sphere_range_is_its_own_size() {
        let settings = BackgroundSettings::default();
        let r = background_scale_range(&[sphere(1.0)], &space(vec![5.0]), &cam(), &settings).unwrap();
        let own = sphere_diameter(1.0, 5.0, 300.0);
        // Tessellated silhouette sits slightly inside the analytic one.
        assert!((r.average_size - own).abs() / own < 0.005);
        assert!((r.diameter(r.s_min) - 0.9 * r.average_size).abs() < 1e-9);
        assert!((r.diameter(r.s_max) - 1.5 * r.average_size).abs() < 1e-9);
    }

    #[test]
    fn two_models_average_their_sizes() {
        // Radii chosen so the silhouettes at distance 10 measure 100 and 200 px.
        let c = CameraIntrinsics::new(500.0, 500.0, 480.0, 360.0, 960, 720).unwrap();
        let ra = sphere_scale_for_diameter(100.0, 10.0, 500.0);
        let rb = sphere_scale_for_diameter(200.0, 10.0, 500.0);
        let settings = BackgroundSettings::default();
        let r = background_scale_range(&[sphere(ra), sphere(rb)], &space(vec![10.0]), &c, &settings).unwrap();
        assert!((r.average_size - 150.0).abs() < 1.0, "{}", r.average_size);
        assert!((r.diameter(r.s_min) - 135.0).abs() < 1.0);
        assert!((r.diameter(r.s_max) - 225.0).abs() < 1.5);
    }

    #[test]
    fn empty_model_list_is_an_error() {
        let err = background_scale_range(&[], &space(vec![5.0]), &cam(), &BackgroundSettings::default());
        assert!(matches!(err, Err(ComposeError::NoModels)));
    }

    #[test]
    fn subrange_stays_inside_and_keeps_min_width() {
        let range = ScaleRange {
            s_min: 1.0,
            s_max: 3.0,
            average_size: 0.0,
            distance: 20.0,
            focal: 100.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let [a, b] = draw_subrange(&mut rng, &range, 0.1);
            assert!(a >= 1.0 && b <= 3.0 && b - a >= 0.2 - 1e-12);
        }
    }

    fn pool(seed: u64) -> Vec<TexturedMesh> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..6).map(|_| assets::random_model(&mut rng, 16)).collect()
    }

    fn range_for(cam: &CameraIntrinsics, size: f64) -> ScaleRange {
        let s = BackgroundSettings::default();
        let focal = cam.fx.max(cam.fy);
        ScaleRange {
            s_min: sphere_scale_for_diameter(0.9 * size, s.distance, focal),
            s_max: sphere_scale_for_diameter(1.5 * size, s.distance, focal),
            average_size: size,
            distance: s.distance,
            focal,
        }
    }

    #[test]
    fn composition_covers_every_pixel() {
        let c = cam();
        let pool = pool(1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let layer = compose_background(
            &mut rng,
            &pool,
            &c,
            &range_for(&c, 30.0),
            &BackgroundSettings::default(),
        )
        .unwrap();
        assert!(layer.covered.iter().all(|&c| c));
        assert_eq!(layer.covered_count, c.pixel_count());
        assert!(layer
            .placements
            .iter()
            .all(|p| p.layer == Layer::Background && p.scale > 0.0));
    }

    #[test]
    fn huge_object_needs_one_placement() {
        let c = cam();
        let settings = BackgroundSettings {
            hue_jitter: false,
            ..Default::default()
        };
        let mut range = range_for(&c, 1000.0);
        range.s_min = range.s_max;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer = compose_background(&mut rng, &[sphere(1.0)], &c, &range, &settings).unwrap();
        assert_eq!(layer.placements.len(), 1);
    }

    #[test]
    fn fraction_target_stops_near_goal() {
        let c = cam();
        let pool = pool(4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let layer = fill_background(
            &mut rng,
            &pool,
            &c,
            &range_for(&c, 20.0),
            &BackgroundSettings::default(),
            None,
            &[],
            FillTarget::Fraction(0.25),
        )
        .unwrap();
        let frac = layer.covered_count as f64 / c.pixel_count() as f64;
        assert!((frac - 0.25).abs() < 0.03, "{frac}");
        assert_eq!(layer.covered.iter().filter(|&&b| b).count(), layer.covered_count);
    }

    #[test]
    fn blocked_pixels_are_never_counted() {
        let c = cam();
        let pool = pool(5);
        let blocked: Vec<bool> = (0..c.pixel_count()).map(|p| p % 160 < 80).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let layer = fill_background(
            &mut rng,
            &pool,
            &c,
            &range_for(&c, 25.0),
            &BackgroundSettings::default(),
            Some(&blocked),
            &[],
            FillTarget::Full,
        )
        .unwrap();
        for (p, &cov) in layer.covered.iter().enumerate() {
            assert_eq!(cov, !blocked[p]);
        }
    }
}
