use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ComposeError, Layer, PlacedObject};
use crate::geometry::{project_bbox, random_rotation, CameraIntrinsics, Pose, TexturedMesh};
use crate::renderer::{for_each_fragment, object_mask, RenderBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OccluderSettings {
    /// Chance that a foreground object receives an occluder.
    pub probability: f64,
    pub coverage_range: [f64; 2],
    /// Accepted gap between achieved and target coverage.
    pub tolerance: f64,
    /// Largest fraction of a non-target object an occluder may hide.
    pub spill_tolerance: f64,
    pub attempts: usize,
    pub bisection_steps: usize,
    /// Objects with fewer visible pixels are never occluded.
    pub min_visible_pixels: u64,
    pub hue_jitter: bool,
}

impl Default for OccluderSettings {
    fn default() -> Self {
        Self {
            probability: 0.5,
            coverage_range: [0.1, 0.3],
            tolerance: 0.03,
            spill_tolerance: 0.02,
            attempts: 8,
            bisection_steps: 24,
            min_visible_pixels: 50,
            hue_jitter: true,
        }
    }
}

/// An occluder and the foreground placement it was sized against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccluderPlacement {
    pub object: PlacedObject,
    pub target: usize,
    pub target_coverage: f64,
    /// Fraction of the target's visible pixels hidden by all occluders so far.
    pub achieved_coverage: f64,
}

/// Pixels of `mask` that land on foreground instance `id` and are not yet hidden.
fn fresh_hits(mask: &[usize], fg: &RenderBuffer, hidden: &[bool], id: u32) -> u64 {
    mask.iter().filter(|&&p| fg.instance[p] == id && !hidden[p]).count() as u64
}

/// Sizes an occluder for each selected foreground object so that it hides a
/// uniformly drawn fraction of the object's visible pixels in `fg`.
///
/// The occluder is centered at a uniform point of the object's bbox at the
/// object's depth, and its scale is found by doubling then bisection on the
/// measured mask coverage. An attempt is kept only if the coverage lands within
/// `tolerance` of the target and no other foreground object is hidden beyond
/// its allowance: `spill_tolerance` for objects without an occluder, their own
/// target plus tolerance for those with one. Objects whose attempts
/// all fail get no occluder.
pub fn place_occluders<R: Rng + ?Sized>(
    rng: &mut R,
    fg: &[PlacedObject],
    fg_models: &[TexturedMesh],
    fg_buffer: &RenderBuffer,
    pool: &[TexturedMesh],
    cam: &CameraIntrinsics,
    settings: &OccluderSettings,
) -> Result<Vec<OccluderPlacement>, ComposeError> {
    if pool.is_empty() {
        return Err(ComposeError::NoModels);
    }
    let pre = fg_buffer.visible_counts(fg.len());
    let mut hidden = vec![false; fg_buffer.pixel_count()];
    let mut hidden_count = vec![0u64; fg.len()];
    let mut occluded: Vec<Option<f64>> = vec![None; fg.len()];
    let mut out = Vec::new();
    let [lo, hi] = settings.coverage_range;
    debug_assert!(0.0 < lo && lo <= hi);
    let mut stamps = vec![0u32; fg_buffer.pixel_count()];
    let mut epoch = 0u32;

    for (j, target_obj) in fg.iter().enumerate() {
        if !rng.random_bool(settings.probability.clamp(0.0, 1.0)) || pre[j] < settings.min_visible_pixels {
            continue;
        }
        let id = j as u32 + 1;
        let bbox = project_bbox(&fg_models[target_obj.model_id], &target_obj.pose, cam)?.bbox;
        let depth = target_obj.pose.translation.z;
        let mut placed = false;
        for _ in 0..settings.attempts {
            let model_id = rng.random_range(0..pool.len());
            let rotation = random_rotation(rng);
            let hue_shift = if settings.hue_jitter {
                rng.random_range(0.0..TAU)
            } else {
                0.0
            };
            let target = rng.random_range(lo..=hi);
            let u = rng.random_range(bbox.x_min..=bbox.x_max);
            let v = rng.random_range(bbox.y_min..=bbox.y_max);
            let pose = Pose::new(rotation, cam.unproject(u, v, depth))?;
            let mesh = &pool[model_id];
            let base = hidden_count[j];
            let mut coverage = |scale: f64| {
                // Stamps dedupe pixels shared by several triangles without a sort.
                epoch += 1;
                let mut hits = 0u64;
                for_each_fragment(mesh, &pose, scale, cam, |f| {
                    if stamps[f.pixel] != epoch {
                        stamps[f.pixel] = epoch;
                        hits += (fg_buffer.instance[f.pixel] == id && !hidden[f.pixel]) as u64;
                    }
                });
                (base + hits) as f64 / pre[j] as f64
            };
            let mut best = (f64::INFINITY, 0.0);
            let consider = |best: &mut (f64, f64), scale: f64, cov: f64| {
                if (cov - target).abs() < best.0 {
                    *best = ((cov - target).abs(), scale);
                }
            };

            // Area grows with scale squared: start from the analytic estimate,
            // double until the target is passed, then bisect.
            let radius_px = (target * pre[j] as f64 / PI).sqrt();
            let max_scale = 0.9 * depth;
            let mut high = (radius_px * depth / cam.fx.max(cam.fy)).min(max_scale);
            let mut low = 0.0;
            let mut reached = false;
            loop {
                let cov = coverage(high);
                consider(&mut best, high, cov);
                if cov >= target {
                    reached = true;
                    break;
                }
                if high >= max_scale {
                    break;
                }
                low = high;
                high = (high * 2.0).min(max_scale);
            }
            if !reached {
                continue;
            }
            for _ in 0..settings.bisection_steps {
                if best.0 <= 0.5 * settings.tolerance {
                    break;
                }
                let mid = 0.5 * (low + high);
                let cov = coverage(mid);
                consider(&mut best, mid, cov);
                if cov < target {
                    low = mid;
                } else {
                    high = mid;
                }
            }
            if best.0 > settings.tolerance {
                continue;
            }
            let scale = best.1;
            let mask = object_mask(mesh, &pose, scale, cam);
            let cov = (base + fresh_hits(&mask, fg_buffer, &hidden, id)) as f64 / pre[j] as f64;
            let mut extra = vec![0u64; fg.len()];
            for &p in &mask {
                let inst = fg_buffer.instance[p];
                if inst != 0 && !hidden[p] {
                    extra[inst as usize - 1] += 1;
                }
            }
            let spill_ok = (0..fg.len()).filter(|&k| k != j && pre[k] > 0).all(|k| {
                let limit = occluded[k].map_or(settings.spill_tolerance, |t| t + settings.tolerance);
                (hidden_count[k] + extra[k]) as f64 / pre[k] as f64 <= limit
            });
            if !spill_ok {
                continue;
            }
            for &p in &mask {
                hidden[p] = true;
            }
            for (k, e) in extra.iter().enumerate() {
                hidden_count[k] += e;
            }
            occluded[j] = Some(target);
            out.push(OccluderPlacement {
                object: PlacedObject {
                    model_id,
                    pose,
                    scale,
                    hue_shift,
                    layer: Layer::Occluder,
                },
                target: j,
                target_coverage: target,
                achieved_coverage: cov,
            });
            placed = true;
            break;
        }
        if !placed {
            log::debug!("no occluder found for foreground object {j}");
        }
    }
    Ok(out)
}
