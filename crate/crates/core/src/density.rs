//! Accumulation of fixations into per-sample density values.
//!
//! Fixations are processed one after another in log order. Within a
//! fixation, samples are evaluated in parallel over [`SampleChunk`]s: every
//! chunk owns a disjoint slice of the value array, so each sample is written
//! by exactly one worker, and the running maximum is merged from per-chunk
//! maxima. Results do not depend on the number of workers.

use std::borrow::Cow;
use std::time::{Duration, Instant};

use nalgebra::{Matrix4, Point3, Vector3, Vector4};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaze::{gaussian_weight, CropFrustum, Fixation, GazeCone, TimeWindow, DEFAULT_THETA};
use crate::geometry::{barycentric_unchecked, SampledMesh, Scene, MAX_RESOLUTION};
use crate::raster::{ClipScene, CulledScene, DepthBuffer, DepthEpsilon};

/// Slack on the crop NDC cube, absorbing rounding in points that sit exactly
/// on the cone boundary.
const CROP_NDC_SLACK: f64 = 1e-9;

/// Parameters of a generation run.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerationConfig {
    /// Target sampling density, samples per m².
    pub k: f64,
    /// Angular standard deviation of the gaze, radians.
    pub theta: f64,
    /// Side length of the square per-fixation depth buffer, pixels.
    pub zbuffer_resolution: u32,
    pub epsilon_abs: f64,
    pub epsilon_rel: f64,
    pub time_window: TimeWindow,
    pub filtering_enabled: bool,
    /// Objects that accumulate values. `None` means all. Excluded objects
    /// still occlude.
    pub objects: Option<Vec<String>>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            k: 40_000.0,
            theta: DEFAULT_THETA,
            zbuffer_resolution: 512,
            epsilon_abs: 1e-3,
            epsilon_rel: 1e-3,
            time_window: TimeWindow::all(),
            filtering_enabled: true,
            objects: None,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::config("k", format!("must be positive and finite, got {}", self.k)));
        }
        GazeCone::new(self.theta)?;
        if self.zbuffer_resolution == 0 || self.zbuffer_resolution > MAX_RESOLUTION {
            return Err(Error::config(
                "zbuffer_resolution",
                format!("must lie in 1..={MAX_RESOLUTION}, got {}", self.zbuffer_resolution),
            ));
        }
        for (field, v) in [("epsilon_abs", self.epsilon_abs), ("epsilon_rel", self.epsilon_rel)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(field, format!("must be non-negative and finite, got {v}")));
            }
        }
        let w = self.time_window;
        if w.start.is_nan() || w.end.is_nan() || w.start > w.end {
            return Err(Error::config(
                "time_window",
                format!("start must not exceed end, got [{}, {})", w.start, w.end),
            ));
        }
        Ok(())
    }

    pub fn cone(&self) -> Result<GazeCone> {
        GazeCone::new(self.theta)
    }

    pub fn epsilon(&self) -> DepthEpsilon {
        DepthEpsilon {
            abs: self.epsilon_abs,
            rel: self.epsilon_rel,
        }
    }

    /// Per scene object, whether it accumulates values.
    pub fn included(&self, scene: &Scene) -> Result<Vec<bool>> {
        match &self.objects {
            None => Ok(vec![true; scene.objects.len()]),
            Some(ids) => {
                let mut mask = vec![false; scene.objects.len()];
                for id in ids {
                    let i = scene
                        .object_index(id)
                        .ok_or_else(|| Error::config("objects", format!("unknown object `{id}`")))?;
                    mask[i] = true;
                }
                Ok(mask)
            }
        }
    }
}

/// Per-object sample values laid out like the matching [`SampledMesh`]es.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMap {
    pub object_ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub global_max: f64,
    pub normalized: bool,
}

impl DensityMap {
    pub fn zeros(sampled: &[SampledMesh]) -> Self {
        Self {
            object_ids: sampled.iter().map(|m| m.object_id.clone()).collect(),
            values: sampled.iter().map(|m| vec![0.0; m.total_samples]).collect(),
            global_max: 0.0,
            normalized: false,
        }
    }

    pub fn total_samples(&self) -> usize {
        self.values.iter().map(Vec::len).sum()
    }

    pub fn check_layout(&self, sampled: &[SampledMesh]) -> Result<()> {
        let describe = |ids: &mut dyn Iterator<Item = (&String, usize)>| {
            ids.map(|(id, n)| format!("{id}:{n}")).collect::<Vec<_>>().join(",")
        };
        let same = self.values.len() == sampled.len()
            && self
                .values
                .iter()
                .zip(&self.object_ids)
                .zip(sampled)
                .all(|((v, id), m)| v.len() == m.total_samples && *id == m.object_id);
        if same {
            return Ok(());
        }
        Err(Error::LayoutMismatch {
            expected: describe(&mut self.object_ids.iter().zip(self.values.iter().map(Vec::len))),
            found: describe(&mut sampled.iter().map(|m| (&m.object_id, m.total_samples))),
        })
    }

    /// Maximum by full scan.
    pub fn scan_max(&self) -> f64 {
        self.values.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Element-wise sum of two maps with the same layout.
    pub fn sum(&self, other: &DensityMap) -> Result<DensityMap> {
        if self.object_ids != other.object_ids || self.values.iter().map(Vec::len).ne(other.values.iter().map(Vec::len)) {
            return Err(Error::LayoutMismatch {
                expected: self.object_ids.join(","),
                found: other.object_ids.join(","),
            });
        }
        let values: Vec<Vec<f64>> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        let mut out = DensityMap {
            object_ids: self.object_ids.clone(),
            values,
            global_max: 0.0,
            normalized: false,
        };
        out.global_max = out.scan_max();
        Ok(out)
    }

    /// Divides every value by the global maximum. Idempotent; an all-zero
    /// map stays zero.
    pub fn normalize(&mut self) {
        if self.normalized {
            return;
        }
        if self.global_max > 0.0 {
            let m = self.global_max;
            self.values.par_iter_mut().for_each(|v| v.iter_mut().for_each(|x| *x /= m));
            self.global_max = 1.0;
        }
        self.normalized = true;
    }

    pub fn bit_identical(&self, other: &DensityMap) -> bool {
        self.object_ids == other.object_ids
            && self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}

/// Consuming form of [`DensityMap::normalize`].
pub fn normalize(mut map: DensityMap) -> DensityMap {
    map.normalize();
    map
}

/// Wall-clock time spent per phase, summed over fixations.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    pub cull: Duration,
    pub rasterize: Duration,
    pub accumulate: Duration,
    pub normalize: Duration,
}

impl PhaseTimings {
    pub fn total(&self) -> Duration {
        self.cull + self.rasterize + self.accumulate + self.normalize
    }

    fn add(&mut self, other: &PhaseTimings) {
        self.cull += other.cull;
        self.rasterize += other.rasterize;
        self.accumulate += other.accumulate;
        self.normalize += other.normalize;
    }
}

/// Which evaluation path a fixation took.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Path {
    Filtered,
    Unfiltered,
    /// Filtering was requested but the cone does not fit a crop frustum.
    Fallback,
}

/// Everything needed to evaluate samples against one fixation: the camera,
/// the Gaussian, and a depth buffer rendered either through the crop
/// frustum or the full view frustum.
pub struct FixationPass {
    pub path: Path,
    view: Matrix4<f64>,
    full_projection: Matrix4<f64>,
    crop_projection: Option<Matrix4<f64>>,
    gaze: Vector3<f64>,
    duration: f64,
    cone: GazeCone,
    eps: DepthEpsilon,
    buffer: DepthBuffer,
    culled: CulledScene,
    cull_time: Duration,
    raster_time: Duration,
}

impl FixationPass {
    /// Renders the depth buffer for `fixation` over `scene` (which must
    /// already carry the fixation's overrides).
    pub fn new(scene: &Scene, fixation: &Fixation, config: &GenerationConfig, filtered: bool) -> Result<Self> {
        fixation.validate()?;
        let cone = config.cone()?;
        let view = fixation.view_matrix();
        let full_projection = fixation.frustum.projection_matrix();
        let (path, crop_projection) = if filtered {
            match CropFrustum::new(fixation, &cone) {
                Ok(crop) => (Path::Filtered, Some(crop.projection)),
                Err(Error::GazeOutsideFrustum | Error::InvalidFrustum(_)) => (Path::Fallback, None),
                Err(e) => return Err(e),
            }
        } else {
            (Path::Unfiltered, None)
        };
        let projection = crop_projection.unwrap_or(full_projection);

        let t0 = Instant::now();
        let clip = ClipScene::build(scene, &(projection * view));
        let culled = clip.cull(scene);
        let t1 = Instant::now();
        let n = config.zbuffer_resolution as usize;
        let buffer = clip.rasterize(scene, &culled, view, projection, n, n);
        let t2 = Instant::now();

        Ok(Self {
            path,
            view,
            full_projection,
            crop_projection,
            gaze: fixation.gaze_dir.into_inner(),
            duration: fixation.duration,
            cone,
            eps: config.epsilon(),
            buffer,
            culled,
            cull_time: t1 - t0,
            raster_time: t2 - t1,
        })
    }

    pub fn depth_buffer(&self) -> &DepthBuffer {
        &self.buffer
    }

    pub fn culled(&self) -> &CulledScene {
        &self.culled
    }

    pub fn view(&self) -> &Matrix4<f64> {
        &self.view
    }

    pub fn to_camera(&self, world: &Point3<f64>) -> Point3<f64> {
        self.view.transform_point(world)
    }

    /// Contribution of a point given in camera space.
    #[inline]
    pub fn contribution(&self, p: &Point3<f64>) -> f64 {
        let h = p.to_homogeneous();
        let crop_clip = match &self.crop_projection {
            Some(proj) => {
                let c = proj * h;
                if !in_cube(&c, CROP_NDC_SLACK) {
                    return 0.0;
                }
                Some(c)
            }
            None => None,
        };
        let w = gaussian_weight(&p.coords, &self.gaze, self.duration, &self.cone);
        if w == 0.0 {
            return 0.0;
        }
        let full_clip = self.full_projection * h;
        let visible = match crop_clip {
            Some(c) => in_cube(&full_clip, 0.0) && self.buffer.is_visible_clip_within(&c, &self.eps, CROP_NDC_SLACK),
            None => self.buffer.is_visible_clip(&full_clip, &self.eps),
        };
        if visible {
            w
        } else {
            0.0
        }
    }

    /// Z-buffer verdict for a camera-space point, ignoring the Gaussian.
    pub fn visible(&self, p: &Point3<f64>) -> bool {
        let h = p.to_homogeneous();
        let full_clip = self.full_projection * h;
        match &self.crop_projection {
            Some(proj) => {
                in_cube(&full_clip, 0.0) && self.buffer.is_visible_clip_within(&(proj * h), &self.eps, CROP_NDC_SLACK)
            }
            None => self.buffer.is_visible_clip(&full_clip, &self.eps),
        }
    }

    /// Adds this fixation to the samples of one object. Returns the largest
    /// value written.
    fn accumulate_object(
        &self,
        scene: &Scene,
        object: usize,
        sampled: &SampledMesh,
        values: &mut [f64],
    ) -> f64 {
        let o = &scene.objects[object];
        // Rigid transforms and scales only: the bottom row is (0, 0, 0, 1).
        let model_view = (self.view * o.transform.matrix()).fixed_view::<3, 4>(0, 0).into_owned();
        let culled = &self.culled.per_object[object];
        if self.crop_projection.is_some() && culled.is_empty() {
            return 0.0;
        }
        let slices = split_chunks(values, sampled);
        slices
            .into_par_iter()
            .map(|(chunk, slice)| {
                let base = chunk.samples.start;
                let mut max = 0.0f64;
                let mut eval = |ti: usize| {
                    let ts = &sampled.triangles[ti];
                    let [a, b, c] = o.mesh.triangles[ti].map(|i| Point3::from(model_view * o.mesh.positions[i as usize].to_homogeneous()));
                    let r = ts.resolution;
                    let mut idx = ts.sample_offset - base;
                    for row in 0..=r {
                        for col in 0..=row {
                            let w = barycentric_unchecked(row, col, r);
                            let p = Point3::from(a.coords * w[0] + b.coords * w[1] + c.coords * w[2]);
                            let g = self.contribution(&p);
                            if g > 0.0 {
                                slice[idx] += g;
                                max = max.max(slice[idx]);
                            }
                            idx += 1;
                        }
                    }
                };
                if self.crop_projection.is_some() {
                    let lo = culled.partition_point(|&t| (t as usize) < chunk.triangles.start);
                    let hi = culled.partition_point(|&t| (t as usize) < chunk.triangles.end);
                    culled[lo..hi].iter().for_each(|&t| eval(t as usize));
                } else {
                    chunk.triangles.clone().for_each(&mut eval);
                }
                max
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// The sample filter: whether a camera-space point survives the NDC cube
/// test under a crop projection.
#[inline]
pub fn crop_ndc_accepts(crop_projection: &Matrix4<f64>, p: &Point3<f64>) -> bool {
    in_cube(&(crop_projection * p.to_homogeneous()), CROP_NDC_SLACK)
}

#[inline]
fn in_cube(clip: &Vector4<f64>, slack: f64) -> bool {
    let w = clip.w;
    let lim = (1.0 + slack) * w;
    w > 0.0 && clip.x.abs() <= lim && clip.y.abs() <= lim && clip.z.abs() <= lim
}

fn split_chunks<'a>(
    mut values: &'a mut [f64],
    sampled: &'a SampledMesh,
) -> Vec<(&'a crate::geometry::SampleChunk, &'a mut [f64])> {
    let mut out = Vec::with_capacity(sampled.chunks().len());
    for chunk in sampled.chunks() {
        let (head, tail) = values.split_at_mut(chunk.samples.len());
        out.push((chunk, head));
        values = tail;
    }
    out
}

/// Result of a generation run.
#[derive(Clone, Debug)]
pub struct Generation {
    pub map: DensityMap,
    pub timings: PhaseTimings,
    /// Fixations processed.
    pub fixations: usize,
    /// Fixations that fell back to the unfiltered path.
    pub fallbacks: usize,
}

/// Adds one fixation to `map`, updating its running maximum. Returns the
/// path taken and per-phase timings.
pub fn accumulate_fixation(
    map: &mut DensityMap,
    scene: &Scene,
    sampled: &[SampledMesh],
    fixation: &Fixation,
    config: &GenerationConfig,
) -> Result<(Path, PhaseTimings)> {
    map.check_layout(sampled)?;
    let included = config.included(scene)?;
    accumulate_checked(map, scene, sampled, fixation, config, &included)
}

fn accumulate_checked(
    map: &mut DensityMap,
    scene: &Scene,
    sampled: &[SampledMesh],
    fixation: &Fixation,
    config: &GenerationConfig,
    included: &[bool],
) -> Result<(Path, PhaseTimings)> {
    let scene: Cow<Scene> = if fixation.overrides.is_empty() {
        Cow::Borrowed(scene)
    } else {
        Cow::Owned(scene.with_overrides(&fixation.overrides)?)
    };
    let pass = FixationPass::new(&scene, fixation, config, config.filtering_enabled)?;
    let t = Instant::now();
    let mut max = map.global_max;
    for (i, (values, sm)) in map.values.iter_mut().zip(sampled).enumerate() {
        if included[i] {
            max = max.max(pass.accumulate_object(&scene, i, sm, values));
        }
    }
    map.global_max = max;
    map.normalized = false;
    let timings = PhaseTimings {
        cull: pass.cull_time,
        rasterize: pass.raster_time,
        accumulate: t.elapsed(),
        normalize: Duration::ZERO,
    };
    Ok((pass.path, timings))
}

/// Accumulates every fixation inside the configured time window, in order.
/// The returned map is not normalized.
pub fn generate(
    scene: &Scene,
    sampled: &[SampledMesh],
    fixations: &[Fixation],
    config: &GenerationConfig,
) -> Result<DensityMap> {
    Ok(generate_with(scene, sampled, fixations, config, |_, _| {})?.map)
}

/// [`generate`] with a progress callback `(done, total)` and timings.
pub fn generate_with(
    scene: &Scene,
    sampled: &[SampledMesh],
    fixations: &[Fixation],
    config: &GenerationConfig,
    mut progress: impl FnMut(usize, usize),
) -> Result<Generation> {
    config.validate()?;
    let included = config.included(scene)?;
    let mut map = DensityMap::zeros(sampled);
    if sampled.len() != scene.objects.len() || sampled.iter().zip(&scene.objects).any(|(s, o)| s.object_id != o.id) {
        return Err(Error::InvalidScene("sampled meshes do not match the scene objects".into()));
    }
    let selected: Vec<&Fixation> = fixations
        .iter()
        .filter(|f| config.time_window.contains(f.start_time))
        .collect();
    let mut timings = PhaseTimings::default();
    let mut fallbacks = 0;
    for (i, f) in selected.iter().enumerate() {
        let (path, t) = accumulate_checked(&mut map, scene, sampled, f, config, &included)?;
        if path == Path::Fallback {
            fallbacks += 1;
        }
        timings.add(&t);
        progress(i + 1, selected.len());
    }
    Ok(Generation {
        map,
        timings,
        fixations: selected.len(),
        fallbacks,
    })
}

/// [`generate_with`] followed by normalization, timing that too.
pub fn generate_normalized(
    scene: &Scene,
    sampled: &[SampledMesh],
    fixations: &[Fixation],
    config: &GenerationConfig,
    progress: impl FnMut(usize, usize),
) -> Result<Generation> {
    let mut g = generate_with(scene, sampled, fixations, config, progress)?;
    let t = Instant::now();
    g.map.normalize();
    g.timings.normalize = t.elapsed();
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::Frustum;
    use crate::synthetic;
    use approx::assert_relative_eq;
    use nalgebra::{Unit, UnitQuaternion};

    fn straight_fixation(duration: f64) -> Fixation {
        Fixation {
            start_time: 0.0,
            duration,
            camera_position: Point3::origin(),
            camera_rotation: UnitQuaternion::identity(),
            frustum: Frustum::symmetric(0.1, 0.1, 0.1, 100.0).unwrap(),
            gaze_dir: Unit::new_normalize(Vector3::new(0.0, 0.0, -1.0)),
            overrides: Vec::new(),
        }
    }

    fn setup(k: f64) -> (Scene, Vec<SampledMesh>) {
        let scene = synthetic::stacked_quads();
        let sampled = SampledMesh::build_all(&scene, k).unwrap();
        (scene, sampled)
    }

    #[test]
    fn normalize_examples() {
        let mut m = DensityMap {
            object_ids: vec!["a".into()],
            values: vec![vec![2.0, 4.0, 8.0]],
            global_max: 8.0,
            normalized: false,
        };
        m.normalize();
        assert_eq!(m.values[0], vec![0.25, 0.5, 1.0]);
        let again = normalize(m.clone());
        assert_eq!(again, m);

        let zero = normalize(DensityMap {
            object_ids: vec!["a".into()],
            values: vec![vec![0.0; 4]],
            global_max: 0.0,
            normalized: false,
        });
        assert!(zero.values[0].iter().all(|&v| v == 0.0));
        assert!(zero.normalized);
    }

    #[test]
    fn zero_fixations_give_zero_map() {
        let (scene, sampled) = setup(100.0);
        let map = generate(&scene, &sampled, &[], &GenerationConfig::default()).unwrap();
        assert_eq!(map.global_max, 0.0);
        assert!(map.values.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn on_axis_sample_gets_peak_and_occluded_get_nothing() {
        // The front quad's centre lies on the gaze ray; the quads have odd
        // resolution so one sample sits exactly at the centre.
        let front = synthetic::quad_object("front", 0.2, -2.0);
        let scene = Scene::new(vec![front, synthetic::quad_object("back", 0.2, -4.0)]).unwrap();
        let config = GenerationConfig {
            theta: 0.05,
            ..Default::default()
        };
        let sampled = SampledMesh::build_all(&scene, 1.0).unwrap();
        let mut map = DensityMap::zeros(&sampled);
        let f = straight_fixation(1.0);
        accumulate_fixation(&mut map, &scene, &sampled, &f, &config).unwrap();
        // r = 1: samples are the three corners of each triangle; the shared
        // diagonal passes through the centre, so use a point probe instead.
        let pass = FixationPass::new(&scene, &f, &config, true).unwrap();
        assert_relative_eq!(pass.contribution(&Point3::new(0.0, 0.0, -2.0)), 7.972_195_461_585_046, epsilon = 1e-12);
        assert_eq!(pass.contribution(&Point3::new(0.0, 0.0, -4.0)), 0.0);
        assert!(map.values[1].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn repeated_fixation_doubles() {
        let (scene, sampled) = setup(2000.0);
        let config = GenerationConfig {
            theta: 0.2,
            ..Default::default()
        };
        let f = straight_fixation(0.3);
        let once = generate(&scene, &sampled, std::slice::from_ref(&f), &config).unwrap();
        let twice = generate(&scene, &sampled, &[f.clone(), f], &config).unwrap();
        assert!(once.global_max > 0.0);
        for (a, b) in once.values.iter().flatten().zip(twice.values.iter().flatten()) {
            assert_eq!(2.0 * a, *b);
        }
        assert_eq!(2.0 * once.global_max, twice.global_max);
    }

    #[test]
    fn cone_missing_an_object_leaves_it_untouched() {
        let mut side = synthetic::quad_object("side", 0.5, -2.0);
        side.transform.translation.x = 1.5;
        let scene = Scene::new(vec![synthetic::quad_object("centre", 0.5, -2.0), side]).unwrap();
        let sampled = SampledMesh::build_all(&scene, 5000.0).unwrap();
        for filtering_enabled in [true, false] {
            let config = GenerationConfig {
                filtering_enabled,
                ..Default::default()
            };
            let map = generate(&scene, &sampled, &[straight_fixation(1.0)], &config).unwrap();
            assert!(map.values[0].iter().any(|&v| v > 0.0));
            assert!(map.values[1].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn excluded_objects_still_occlude() {
        let (scene, sampled) = setup(500.0);
        let config = GenerationConfig {
            theta: 0.3,
            objects: Some(vec!["back".into()]),
            ..Default::default()
        };
        let map = generate(&scene, &sampled, &[straight_fixation(1.0)], &config).unwrap();
        assert!(map.values.iter().flatten().all(|&v| v == 0.0));
        let bad = GenerationConfig {
            objects: Some(vec!["nope".into()]),
            ..Default::default()
        };
        assert!(matches!(
            generate(&scene, &sampled, &[], &bad),
            Err(Error::InvalidConfig { .. })
        ));
    }

    #[test]
    fn global_max_matches_scan() {
        let scene = synthetic::challenging_scene();
        let sampled = SampledMesh::build_all(&scene, 3000.0).unwrap();
        let fixations = synthetic::random_fixations(3, 20, &synthetic::FixationSpec::challenging());
        let config = GenerationConfig {
            theta: 0.05,
            ..Default::default()
        };
        let map = generate(&scene, &sampled, &fixations, &config).unwrap();
        assert!(map.global_max > 0.0);
        assert_eq!(map.global_max, map.scan_max());
    }

    #[test]
    fn layout_mismatch_is_reported() {
        let (scene, sampled) = setup(100.0);
        let other = SampledMesh::build_all(&scene, 5000.0).unwrap();
        let mut map = DensityMap::zeros(&other);
        let r = accumulate_fixation(&mut map, &scene, &sampled, &straight_fixation(1.0), &GenerationConfig::default());
        assert!(matches!(r, Err(Error::LayoutMismatch { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(GenerationConfig::default().validate().is_ok());
        let bad = [
            GenerationConfig { k: -1.0, ..Default::default() },
            GenerationConfig { theta: 0.0, ..Default::default() },
            GenerationConfig { zbuffer_resolution: 0, ..Default::default() },
            GenerationConfig { epsilon_abs: -1.0, ..Default::default() },
            GenerationConfig { time_window: TimeWindow::new(2.0, 1.0), ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::InvalidConfig { .. })), "{c:?}");
        }
    }
}
