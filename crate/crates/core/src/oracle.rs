//! Brute-force reference implementations for tests.
//!
//! Visibility here is decided by casting rays against every triangle, a
//! different algorithm from the z-buffer used by [`crate::density`].

use nalgebra::{Point3, Vector3};

use crate::density::{DensityMap, GenerationConfig};
use crate::error::Result;
use crate::gaze::{gaussian_weight, Fixation, Frustum};
use crate::geometry::{sample_world_position, SampledMesh, Scene};
use crate::raster::DepthBuffer;

/// Hits closer than this to the target do not count as occluders.
pub const RAY_SLACK: f64 = 1e-6;

/// World-space triangles of a scene, grouped per object with a bounding
/// sphere for early rejection.
pub struct RayCaster {
    objects: Vec<(Point3<f64>, f64, Vec<[Point3<f64>; 3]>)>,
}

impl RayCaster {
    pub fn new(scene: &Scene) -> Self {
        let objects = scene
            .objects
            .iter()
            .map(|o| {
                let tris: Vec<[Point3<f64>; 3]> = o
                    .mesh
                    .triangles
                    .iter()
                    .map(|t| t.map(|i| o.transform.apply_point(&o.mesh.positions[i as usize])))
                    .collect();
                let n = (3 * tris.len()).max(1) as f64;
                let centre = Point3::from(tris.iter().flatten().map(|p| p.coords).sum::<Vector3<f64>>() / n);
                let radius = tris.iter().flatten().map(|p| (p - centre).norm()).fold(0.0, f64::max);
                (centre, radius, tris)
            })
            .collect();
        Self { objects }
    }

    /// True iff nothing lies on the segment from `origin` to `target` closer
    /// than `RAY_SLACK` before the target.
    pub fn visible(&self, origin: &Point3<f64>, target: &Point3<f64>) -> bool {
        let d = target - origin;
        let len = d.norm();
        if len == 0.0 {
            return true;
        }
        let dir = d / len;
        let limit = len - RAY_SLACK;
        for (centre, radius, tris) in &self.objects {
            // Segment against bounding sphere.
            let oc = centre - origin;
            let along = oc.dot(&dir).clamp(0.0, len);
            if (oc - dir * along).norm() > radius * (1.0 + 1e-9) + 1e-12 {
                continue;
            }
            for tri in tris {
                if let Some(t) = ray_triangle(origin, &dir, tri) {
                    if t < limit {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Möller–Trumbore: distance along the unit `dir` to the triangle, if hit
/// in front of `origin`.
pub fn ray_triangle(origin: &Point3<f64>, dir: &Vector3<f64>, tri: &[Point3<f64>; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() <= 1e-14 * e1.norm() * e2.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = inv * s.dot(&h);
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = inv * dir.dot(&q);
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = inv * e2.dot(&q);
    (t > 0.0).then_some(t)
}

/// One-off ray cast; build a [`RayCaster`] for repeated queries.
pub fn ray_visible(scene: &Scene, origin: &Point3<f64>, target: &Point3<f64>) -> bool {
    RayCaster::new(scene).visible(origin, target)
}

/// Closed cone test by angle.
pub fn cone_contains(gaze_dir: &Vector3<f64>, p: &Vector3<f64>, phi: f64) -> bool {
    let dot = p.dot(gaze_dir);
    dot > 0.0 && p.cross(gaze_dir).norm().atan2(dot) <= phi
}

/// Whether a camera-space point lies inside a frustum, tested against the
/// side planes directly rather than through a projection matrix.
pub fn frustum_contains(f: &Frustum, p: &Point3<f64>) -> bool {
    let depth = -p.z;
    if !(depth >= f.near && depth <= f.far) {
        return false;
    }
    let s = depth / f.near;
    p.x >= f.left * s && p.x <= f.right * s && p.y >= f.bottom * s && p.y <= f.top * s
}

/// Contribution of one world point to one fixation, with ray-cast
/// occlusion.
pub fn naive_contribution(caster: &RayCaster, fixation: &Fixation, theta_cone: &crate::gaze::GazeCone, world: &Point3<f64>) -> f64 {
    let p = fixation.to_camera(world);
    if !frustum_contains(&fixation.frustum, &p) {
        return 0.0;
    }
    let w = gaussian_weight(&p.coords, &fixation.gaze_dir, fixation.duration, theta_cone);
    if w > 0.0 && caster.visible(&fixation.camera_position, world) {
        w
    } else {
        0.0
    }
}

/// Evaluates every sample of every included object against every fixation
/// with ray-cast occlusion and no filtering. Test-scale scenes only.
pub fn naive_accumulate(
    scene: &Scene,
    sampled: &[SampledMesh],
    fixations: &[Fixation],
    config: &GenerationConfig,
) -> Result<DensityMap> {
    config.validate()?;
    let cone = config.cone()?;
    let included = config.included(scene)?;
    let mut map = DensityMap::zeros(sampled);
    for f in fixations.iter().filter(|f| config.time_window.contains(f.start_time)) {
        let posed = scene.with_overrides(&f.overrides)?;
        let caster = RayCaster::new(&posed);
        for (oi, (o, sm)) in posed.objects.iter().zip(sampled).enumerate() {
            if !included[oi] {
                continue;
            }
            for (ti, ts) in sm.triangles.iter().enumerate() {
                for s in 0..ts.sample_count as usize {
                    let world = sample_world_position(o, sm, ti, s)?;
                    map.values[oi][ts.sample_offset + s] += naive_contribution(&caster, f, &cone, &world);
                }
            }
        }
    }
    map.global_max = map.scan_max();
    Ok(map)
}

/// Relative depth jump between neighbouring pixels that counts as an edge.
const EDGE_JUMP: f64 = 0.01;

fn is_edge_pair(buffer: &DepthBuffer, a: (usize, usize), b: (usize, usize)) -> bool {
    match (buffer.fragment(a.0, a.1), buffer.fragment(b.0, b.1)) {
        (None, None) => false,
        (Some(_), None) | (None, Some(_)) => true,
        (Some(fa), Some(fb)) => {
            if fa.triangle.object != fb.triangle.object {
                return true;
            }
            // Does b's surface, extended to a's pixel centre, predict a's
            // depth?
            let (x, y) = (a.0 as f64 + 0.5, a.1 as f64 + 0.5);
            let da = buffer.depth(a.0, a.1);
            (fb.depth_at(x, y) - da).abs() > EDGE_JUMP * da
        }
    }
}

/// Distance in pixels from screen position `(x, y)` to the nearest depth
/// discontinuity within `radius` pixels, or infinity. Discontinuities are
/// located at the midpoint between the two pixel centres they separate.
pub fn depth_edge_distance(buffer: &DepthBuffer, x: f64, y: f64, radius: usize) -> f64 {
    let (w, h) = (buffer.width(), buffer.height());
    let cx = (x.max(0.0) as usize).min(w - 1);
    let cy = (y.max(0.0) as usize).min(h - 1);
    let mut best = f64::INFINITY;
    for py in cy.saturating_sub(radius)..=(cy + radius).min(h - 1) {
        for px in cx.saturating_sub(radius)..=(cx + radius).min(w - 1) {
            for (qx, qy) in [(px + 1, py), (px, py + 1)] {
                if qx >= w || qy >= h {
                    continue;
                }
                if is_edge_pair(buffer, (px, py), (qx, qy)) || is_edge_pair(buffer, (qx, qy), (px, py)) {
                    let mx = (px + qx) as f64 / 2.0 + 0.5;
                    let my = (py + qy) as f64 / 2.0 + 0.5;
                    best = best.min(((mx - x).powi(2) + (my - y).powi(2)).sqrt());
                }
            }
        }
    }
    best
}
